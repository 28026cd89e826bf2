#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "voxflood/grid.hpp"

namespace voxflood {

// .voxv: "VOXV", u32 version (1), u8 value kind, 3 x u64 dims (nx, ny, nz),
// then the payload in x-fastest order. Everything little-endian.
enum class ValueKind : std::uint8_t { U8 = 0, F32 = 1, U32Labels = 2 };

inline constexpr std::uint32_t kVoxvVersion = 1;

struct VoxvHeader {
  ValueKind kind = ValueKind::U8;
  Dims3 dims;
};

void write_voxv(std::ostream& os, const VoxelVolume& vol, ValueKind kind);
void write_voxv(std::ostream& os, const LabelVolume& labels);
VoxvHeader read_voxv_header(std::istream& is);
VoxelVolume read_voxel_volume(std::istream& is);
LabelVolume read_label_volume(std::istream& is);

void write_voxv(const std::filesystem::path& path, const VoxelVolume& vol, ValueKind kind);
void write_voxv(const std::filesystem::path& path, const LabelVolume& labels);
VoxvHeader read_voxv_header(const std::filesystem::path& path);
VoxelVolume read_voxel_volume(const std::filesystem::path& path);
LabelVolume read_label_volume(const std::filesystem::path& path);

// Binary PGM (P5). 8-bit images are rounded and clamped to [0, 255]; masks
// are written as 0/255.
void write_pgm(const std::filesystem::path& path, const Image2D& img);
void write_pgm(const std::filesystem::path& path, const Mask2D& mask);
// 16-bit P5 (big-endian samples) plus "<path>.palette.txt" with one
// "label r g b" line per label present.
void write_label_pgm(const std::filesystem::path& path, const LabelImage& labels);

struct PgmImage {
  Dims2 dims;
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> samples;
};
PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace voxflood
