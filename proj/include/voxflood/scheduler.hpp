#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voxflood/adapter.hpp"

namespace voxflood {

enum class AccumulatorUpdate { ForegroundOnly, Always };
enum class RestrictMovement { Foreground, ErodedForeground };
enum class SeedMode { Automatic, Manual };

const char* accumulator_update_name(AccumulatorUpdate a);
const char* restrict_movement_name(RestrictMovement r);

struct SchedulerConfig {
  std::int64_t movement_step = 1;
  std::int64_t check_step_width = 1;
  AccumulatorUpdate accumulator_update = AccumulatorUpdate::ForegroundOnly;
  RestrictMovement restrict_movement = RestrictMovement::Foreground;
  std::optional<std::size_t> max_steps;
  std::size_t max_tiles_per_segment = 4096;
  SeedMode seed_mode = SeedMode::Automatic;
  std::vector<Index3> seeds;  // Manual only
  std::size_t max_segments = 10000;
  // Automatic seeds need at least this foreground distance-transform depth.
  double min_seed_depth = 2.0;
  std::size_t min_segment_voxels = 1;

  void validate() const;
};

// Side of the tile actually extracted. A tile at least as large as the volume
// becomes one whole-volume tile (side 2 * max extent) and no neighbours are
// queued.
std::int64_t effective_tile_side(std::int64_t tile_size, const Dims3& volume);
bool single_tile_mode(std::int64_t tile_size, const Dims3& volume);

// Working mask cropped to `region`, false outside the volume.
BinaryMask3D dense_prompt_for(const BinaryMask3D& working, const Region3D& region);

// Face voxels (on a check_step_width lattice through the face centre) where the proposal is set,
// moved movement_step outward along the face normal. Faces are scanned in the
// order -x, +x, -y, +y, -z, +z. Only the movement-restriction mask filter is
// applied here; visited filtering is the caller's business.
std::vector<Index3> find_intersections(const BinaryMask3D& proposal, const Region3D& tile_region,
                                       const BinaryMask3D& movement_mask, const SchedulerConfig& cfg);

struct Journal {
  std::vector<std::string> lines;
  void add(std::string line) { lines.push_back(std::move(line)); }
  std::string text() const;
};

struct SegmentRun {
  BinaryMask3D mask;
  std::size_t pops = 0;
  std::size_t segmenter_calls = 0;
  bool aborted = false;
  std::string reason;
};

// Everything the flood fill needs besides the seed. `movement` is the mask
// candidates must hit (foreground, or eroded foreground).
struct FloodContext {
  const VoxelVolume& volume;
  const BinaryMask3D& foreground;
  const BinaryMask3D& movement;
  SliceSegmenter& segmenter;
  const AdapterConfig& adapter;
  const SchedulerConfig& scheduler;
  Journal* journal = nullptr;
  std::size_t segment_index = 0;
};

// Candidates already covered by the accumulated mask are not queued, neither
// are candidates whose movement_step cell was visited before.
SegmentRun run_segment(Index3 seed, const FloodContext& ctx);

BinaryMask3D movement_mask(const BinaryMask3D& foreground, RestrictMovement restrict);

struct RunSummary {
  LabelVolume labels;
  std::size_t segments = 0;
  std::size_t seeds_tried = 0;
  std::size_t pops = 0;
  std::size_t segmenter_calls = 0;
};

// Labels are assigned 1, 2, ... in seed order; a voxel already claimed by an
// earlier segment keeps its label.
RunSummary run_all(const VoxelVolume& volume, SliceSegmenter& segmenter, const AdapterConfig& adapter,
                   const SchedulerConfig& scheduler, Journal* journal = nullptr);

}  // namespace voxflood
