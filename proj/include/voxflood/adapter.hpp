#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "voxflood/segmenter.hpp"
#include "voxflood/voxel_ops.hpp"

namespace voxflood {

enum class PromptType { CenterPoint, CenterPointPlusDense };

enum class MaskSourceKind { BinaryFullRes, Logits };

struct MaskSource {
  MaskSourceKind kind = MaskSourceKind::BinaryFullRes;
  double threshold = 0.0;  // Logits only
  Upscaling upscaling = Upscaling::Bilinear;
};

enum class MergeRuleKind { Always, BreakOnEmptySlice, MinIoUToLastSlice, MinIoUToForeground };

// The stack keeps growing while IoU > threshold (MinIoU* rules).
struct MergeRule {
  MergeRuleKind kind = MergeRuleKind::BreakOnEmptySlice;
  double threshold = 0.5;
};

const char* prompt_type_name(PromptType p);
const char* merge_rule_name(MergeRuleKind k);

struct AdapterConfig {
  std::int64_t tile_size = 48;
  PromptType prompt = PromptType::CenterPoint;
  ChannelStrategy channel;
  MaskSource mask_source;
  MergeRule merge_rule;
  bool slice_median = false;  // 3x3 median on each predicted slice
  bool slice_cca = false;     // keep the component at the slice centre
  int stack_merge_min_count = 1;
  bool volume_median = false;  // 3x3x3 median on the fused proposal
  int seed_fg_slice_count = 0;
  ForegroundOptions foreground;
  std::size_t outlier_min_nonzero = 4;
  bool parallel_axes = false;
  std::optional<std::filesystem::path> diagnostics_dir;

  void validate() const;
};

bool seed_filter(const BinaryMask3D& fg_tile, int seed_fg_slice_count);

// How many of the three centre slices see the seed as foreground: the 3x3
// in-plane neighbourhood of the tile centre must be majority foreground.
int seed_fg_slice_votes(const BinaryMask3D& fg_tile);
// Same vote around an arbitrary voxel, with outside counted as background.
int seed_fg_slice_votes(const BinaryMask3D& fg, Index3 at);

struct StackResult {
  BinaryMask3D mask;
  std::size_t slices_written = 0;
  std::size_t segmenter_calls = 0;
  bool aborted = false;
  std::string reason;
};

// Optional inputs must match the tile dims. `fg_tile` is required by the
// MinIoUToForeground rule and the max-IoU-with-foreground channel strategy.
StackResult segment_stack(const VoxelVolume& tile, Axis axis, SliceSegmenter& segmenter,
                          const AdapterConfig& config, const BinaryMask3D* fg_tile,
                          const BinaryMask3D* dense_tile, const std::string& tag = "tile");

// Voxel set iff set in at least `min_count` of the stacks.
BinaryMask3D merge_stacks(const std::array<const BinaryMask3D*, 3>& stacks, int min_count);
BinaryMask3D merge_stacks(const std::array<BinaryMask3D, 3>& stacks, int min_count);

struct TileProposal {
  BinaryMask3D mask;
  std::array<BinaryMask3D, 3> stacks;  // indexed by Axis
  std::size_t segmenter_calls = 0;
  bool aborted = false;
  std::string reason;
};

// Seed is the tile centre (side/2 on every axis).
TileProposal segment_tile(const VoxelVolume& tile, SliceSegmenter& segmenter, const AdapterConfig& config,
                          const BinaryMask3D& fg_tile, const BinaryMask3D* dense_tile,
                          const std::string& tag = "tile");

}  // namespace voxflood
