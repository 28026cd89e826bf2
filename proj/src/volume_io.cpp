#include "voxflood/volume_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace voxflood {
namespace {

constexpr std::array<char, 4> kMagic = {'V', 'O', 'X', 'V'};

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <class T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
    throw InputError("truncated .voxv stream");
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

void write_header(std::ostream& os, ValueKind kind, Dims3 d) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kVoxvVersion);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(kind));
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(d.nx));
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(d.ny));
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(d.nz));
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path.string() + "'");
  return is;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5f), 0.0f, 255.0f));
}

}  // namespace

void write_voxv(std::ostream& os, const VoxelVolume& vol, ValueKind kind) {
  write_header(os, kind, vol.dims());
  switch (kind) {
    case ValueKind::U8: {
      std::vector<char> bytes(vol.size());
      for (std::size_t i = 0; i < vol.size(); ++i) bytes[i] = static_cast<char>(to_byte(vol[i]));
      os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      break;
    }
    case ValueKind::F32:
      for (float v : vol.values()) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
      break;
    case ValueKind::U32Labels:
      throw InputError("intensity volumes cannot be written with the label value kind");
  }
}

void write_voxv(std::ostream& os, const LabelVolume& labels) {
  write_header(os, ValueKind::U32Labels, labels.dims());
  for (std::uint32_t v : labels.values()) put_le<std::uint32_t>(os, v);
}

VoxvHeader read_voxv_header(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw InputError("not a .voxv stream (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kVoxvVersion) {
    throw InputError("unsupported .voxv version " + std::to_string(version));
  }
  const auto kind = get_le<std::uint8_t>(is);
  if (kind > 2) throw InputError("unknown .voxv value kind " + std::to_string(kind));
  VoxvHeader h;
  h.kind = static_cast<ValueKind>(kind);
  h.dims.nx = static_cast<std::int64_t>(get_le<std::uint64_t>(is));
  h.dims.ny = static_cast<std::int64_t>(get_le<std::uint64_t>(is));
  h.dims.nz = static_cast<std::int64_t>(get_le<std::uint64_t>(is));
  if (!h.dims.valid()) throw InputError(".voxv dims must be >= 1");
  return h;
}

VoxelVolume read_voxel_volume(std::istream& is) {
  const VoxvHeader h = read_voxv_header(is);
  VoxelVolume vol(h.dims);
  switch (h.kind) {
    case ValueKind::U8: {
      std::vector<unsigned char> bytes(vol.size());
      if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
        throw InputError("truncated .voxv payload");
      }
      for (std::size_t i = 0; i < bytes.size(); ++i) vol[i] = bytes[i];
      break;
    }
    case ValueKind::F32:
      for (auto& v : vol.values()) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
      break;
    case ValueKind::U32Labels:
      for (auto& v : vol.values()) v = static_cast<float>(get_le<std::uint32_t>(is));
      break;
  }
  return vol;
}

LabelVolume read_label_volume(std::istream& is) {
  const VoxvHeader h = read_voxv_header(is);
  LabelVolume labels(h.dims);
  switch (h.kind) {
    case ValueKind::U32Labels:
      for (auto& v : labels.values()) v = get_le<std::uint32_t>(is);
      break;
    case ValueKind::U8:
      for (auto& v : labels.values()) v = get_le<std::uint8_t>(is);
      break;
    case ValueKind::F32:
      throw InputError("a real-valued .voxv cannot be read as a label volume");
  }
  return labels;
}

void write_voxv(const std::filesystem::path& path, const VoxelVolume& vol, ValueKind kind) {
  auto os = open_out(path);
  write_voxv(os, vol, kind);
  finish(os, path);
}

void write_voxv(const std::filesystem::path& path, const LabelVolume& labels) {
  auto os = open_out(path);
  write_voxv(os, labels);
  finish(os, path);
}

VoxvHeader read_voxv_header(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_voxv_header(is);
}

VoxelVolume read_voxel_volume(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_voxel_volume(is);
}

LabelVolume read_label_volume(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_label_volume(is);
}

void write_pgm(const std::filesystem::path& path, const Image2D& img) {
  auto os = open_out(path);
  os << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<char> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) bytes[i] = static_cast<char>(to_byte(img[i]));
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(os, path);
}

void write_pgm(const std::filesystem::path& path, const Mask2D& mask) {
  auto os = open_out(path);
  os << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  std::vector<char> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = static_cast<char>(mask[i] ? 255 : 0);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(os, path);
}

void write_label_pgm(const std::filesystem::path& path, const LabelImage& labels) {
  auto os = open_out(path);
  os << "P5\n" << labels.width() << " " << labels.height() << "\n65535\n";
  std::set<std::uint32_t> present;
  std::vector<char> bytes(labels.size() * 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t v = labels[i];
    if (v > 65535) throw InputError("label " + std::to_string(v) + " exceeds 16-bit PGM range");
    bytes[2 * i] = static_cast<char>(v >> 8);
    bytes[2 * i + 1] = static_cast<char>(v & 0xFF);
    if (v != 0) present.insert(v);
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(os, path);

  auto palette_path = path;
  palette_path += ".palette.txt";
  auto ps = open_out(palette_path);
  ps << "0 0 0 0\n";
  for (std::uint32_t label : present) {
    // Knuth multiplicative hash spreads neighbouring ids over the colour cube.
    const std::uint32_t h = label * 2654435761u;
    ps << label << " " << ((h >> 24) & 0xFF) << " " << ((h >> 16) & 0xFF) << " "
       << ((h >> 8) & 0xFF) << "\n";
  }
  finish(ps, palette_path);
}

PgmImage read_pgm(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw InputError("'" + path.string() + "' is not a binary PGM");
  PgmImage img;
  is >> img.dims.w >> img.dims.h >> img.maxval;
  is.get();
  if (!is || img.maxval == 0 || img.maxval > 65535) throw InputError("bad PGM header");
  img.samples.resize(img.dims.count());
  for (auto& s : img.samples) {
    if (img.maxval < 256) {
      s = static_cast<std::uint8_t>(is.get());
    } else {
      const int hi = is.get();
      const int lo = is.get();
      s = static_cast<std::uint16_t>((hi << 8) | lo);
    }
  }
  if (!is) throw InputError("truncated PGM payload");
  return img;
}

}  // namespace voxflood
