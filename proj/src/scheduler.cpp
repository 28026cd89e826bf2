#include "voxflood/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <unordered_set>

namespace voxflood {

const char* accumulator_update_name(AccumulatorUpdate a) {
  return a == AccumulatorUpdate::ForegroundOnly ? "fg-only" : "always";
}

const char* restrict_movement_name(RestrictMovement r) {
  return r == RestrictMovement::Foreground ? "fg" : "eroded-fg";
}

void SchedulerConfig::validate() const {
  if (movement_step < 1) throw InputError("movement-step must be >= 1");
  if (check_step_width < 1) throw InputError("check-step-width must be >= 1");
  if (max_tiles_per_segment < 1) throw InputError("max-tiles-per-segment must be >= 1");
  if (max_steps && *max_steps < 1) throw InputError("max-steps must be >= 1");
  if (min_seed_depth < 0.0) throw InputError("min-seed-depth must be >= 0");
  if (seed_mode == SeedMode::Manual && seeds.empty()) throw InputError("manual seed mode needs at least one seed");
}

std::int64_t effective_tile_side(std::int64_t tile_size, const Dims3& volume) {
  if (tile_size < 1) throw InputError("tile-size must be >= 1");
  return single_tile_mode(tile_size, volume) ? 2 * volume.max_extent() : tile_size;
}

bool single_tile_mode(std::int64_t tile_size, const Dims3& volume) { return tile_size >= volume.max_extent(); }

BinaryMask3D dense_prompt_for(const BinaryMask3D& working, const Region3D& region) {
  return crop(working, region, std::uint8_t{0});
}

namespace {

// First lattice position of a face axis; the lattice passes through the
// tile centre (n / 2).
std::int64_t lattice_start(std::int64_t n, std::int64_t w) { return (n / 2) % w; }

}  // namespace

std::vector<Index3> find_intersections(const BinaryMask3D& proposal, const Region3D& tile_region,
                                       const BinaryMask3D& movement_mask, const SchedulerConfig& cfg) {
  if (proposal.dims() != tile_region.size) throw InputError("proposal dims differ from the tile region");
  std::vector<Index3> out;
  const Dims3 s = tile_region.size;
  const std::int64_t w = cfg.check_step_width;
  const std::int64_t ms = cfg.movement_step;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    const int u = std::min(a, b), v = std::max(a, b);
    for (int side = 0; side < 2; ++side) {
      Index3 local;
      component(local, axis) = side == 0 ? 0 : extent(s, axis) - 1;
      for (std::int64_t j = lattice_start(extent(s, v), w); j < extent(s, v); j += w) {
        component(local, v) = j;
        for (std::int64_t i = lattice_start(extent(s, u), w); i < extent(s, u); i += w) {
          component(local, u) = i;
          if (!proposal[local]) continue;
          Index3 c = tile_region.origin + local;
          component(c, axis) += side == 0 ? -ms : ms;
          if (!movement_mask.dims().contains(c) || !movement_mask[c]) continue;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

std::string Journal::text() const {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

namespace {

class VisitedSet {
 public:
  VisitedSet(const Dims3& d, std::int64_t step) : step_(step) {
    q_ = {(d.nx + step - 1) / step, (d.ny + step - 1) / step, (d.nz + step - 1) / step};
  }

  // True when the cell was new.
  bool insert(Index3 c) {
    const std::int64_t key = ((c.z / step_) * q_.ny + c.y / step_) * q_.nx + c.x / step_;
    return cells_.insert(key).second;
  }

 private:
  std::int64_t step_;
  Dims3 q_;
  std::unordered_set<std::int64_t> cells_;
};

std::string fmt(Index3 p) { return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + "," + std::to_string(p.z) + ")"; }

void update_working(BinaryMask3D& working, const BinaryMask3D& proposal, const Region3D& region,
                    AccumulatorUpdate mode) {
  const Dims3 d = working.dims();
  const Dims3 s = region.size;
  for (std::int64_t z = 0; z < s.nz; ++z)
    for (std::int64_t y = 0; y < s.ny; ++y)
      for (std::int64_t x = 0; x < s.nx; ++x) {
        const Index3 p = region.origin + Index3{x, y, z};
        if (!d.contains(p)) continue;
        const std::uint8_t v = proposal(x, y, z);
        if (mode == AccumulatorUpdate::Always) {
          working[p] = v;
        } else if (v) {
          working[p] = 1;
        }
      }
}

}  // namespace

SegmentRun run_segment(Index3 seed, const FloodContext& ctx) {
  const Dims3 d = ctx.volume.dims();
  if (!d.contains(seed)) throw InputError("seed " + to_string(seed) + " outside volume " + to_string(d));
  if (ctx.foreground.dims() != d || ctx.movement.dims() != d) throw InputError("mask dims differ from volume");
  const SchedulerConfig& cfg = ctx.scheduler;
  const std::int64_t side = effective_tile_side(ctx.adapter.tile_size, d);
  const bool single = single_tile_mode(ctx.adapter.tile_size, d);
  std::size_t limit = cfg.max_tiles_per_segment;
  if (cfg.max_steps) limit = std::min(limit, *cfg.max_steps);

  SegmentRun run;
  run.mask = BinaryMask3D(d, 0);
  VisitedSet visited(d, cfg.movement_step);
  std::deque<Index3> queue{seed};
  visited.insert(seed);

  while (!queue.empty() && run.pops < limit) {
    const Index3 c = queue.front();
    queue.pop_front();
    const Region3D region = centered_region(c, side);
    const VoxelVolume tile = crop(ctx.volume, region, 0.0f);
    const BinaryMask3D fg_tile = crop(ctx.foreground, region, std::uint8_t{0});
    std::optional<BinaryMask3D> dense;
    if (ctx.adapter.prompt == PromptType::CenterPointPlusDense) dense = dense_prompt_for(run.mask, region);
    const std::string tag = "s" + std::to_string(ctx.segment_index) + "_p" + std::to_string(run.pops);
    const TileProposal prop = segment_tile(tile, ctx.segmenter, ctx.adapter, fg_tile, dense ? &*dense : nullptr, tag);
    ++run.pops;
    run.segmenter_calls += prop.segmenter_calls;

    std::ostringstream line;
    line << "pop seg=" << ctx.segment_index << " n=" << run.pops << " center=" << fmt(c);
    if (prop.aborted) {
      if (prop.reason.rfind("backend", 0) == 0) throw BackendError(prop.reason);
      if (run.pops == 1) {
        run.aborted = true;
        run.reason = prop.reason;
      }
      line << " queue=" << queue.size() << " proposal=0 candidates=0 aborted=" << prop.reason;
      if (ctx.journal) ctx.journal->add(line.str());
      continue;
    }

    update_working(run.mask, prop.mask, region, cfg.accumulator_update);
    std::size_t pushed = 0;
    if (!single) {
      for (const Index3& cand : find_intersections(prop.mask, region, ctx.movement, cfg)) {
        if (run.mask[cand] || !visited.insert(cand)) continue;
        queue.push_back(cand);
        ++pushed;
      }
    }
    line << " queue=" << queue.size() << " proposal=" << count_true(prop.mask) << " candidates=" << pushed;
    if (ctx.journal) ctx.journal->add(line.str());
  }
  if (!queue.empty() && ctx.journal) {
    ctx.journal->add("limit seg=" + std::to_string(ctx.segment_index) + " pops=" + std::to_string(run.pops) +
                     " dropped=" + std::to_string(queue.size()));
  }
  return run;
}

BinaryMask3D movement_mask(const BinaryMask3D& foreground, RestrictMovement restrict) {
  if (restrict == RestrictMovement::Foreground) return foreground;
  return morph(foreground, MorphOp::Erode, {6, 1});
}

RunSummary run_all(const VoxelVolume& volume, SliceSegmenter& segmenter, const AdapterConfig& adapter,
                   const SchedulerConfig& scheduler, Journal* journal) {
  adapter.validate();
  scheduler.validate();
  const Dims3 d = volume.dims();
  const BinaryMask3D fg = estimate_foreground(volume, adapter.foreground);
  const BinaryMask3D move = movement_mask(fg, scheduler.restrict_movement);

  RunSummary summary;
  summary.labels = LabelVolume(d, 0);
  FloodContext ctx{volume, fg, move, segmenter, adapter, scheduler, journal, 0};

  const bool automatic = scheduler.seed_mode == SeedMode::Automatic;
  std::vector<Index3> seeds;
  VoxelVolume depth;
  if (automatic) {
    depth = distance_transform(fg);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      if (!fg[i] || depth[i] < scheduler.min_seed_depth) continue;
      // Seeds the tile seed filter would reject are never tried.
      if (adapter.seed_fg_slice_count > 0 &&
          seed_fg_slice_votes(fg, depth.index_of(i)) < adapter.seed_fg_slice_count)
        continue;
      order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return depth[a] > depth[b]; });
    seeds.reserve(order.size());
    for (std::size_t i : order) seeds.push_back(depth.index_of(i));
  } else {
    for (const Index3& s : scheduler.seeds)
      if (!d.contains(s)) throw InputError("seed " + to_string(s) + " outside volume " + to_string(d));
    seeds = scheduler.seeds;
  }

  BinaryMask3D excluded(d, 0);
  for (const Index3& seed : seeds) {
    if (summary.segments >= scheduler.max_segments) break;
    if (automatic && (excluded[seed] || summary.labels[seed] != 0)) continue;
    ++summary.seeds_tried;
    ctx.segment_index = summary.seeds_tried;
    const SegmentRun run = run_segment(seed, ctx);
    summary.pops += run.pops;
    summary.segmenter_calls += run.segmenter_calls;

    std::size_t fresh = 0;
    for (std::size_t i = 0; i < run.mask.size(); ++i) fresh += run.mask[i] && summary.labels[i] == 0;
    std::ostringstream line;
    line << "segment " << ctx.segment_index << " seed=" << fmt(seed) << " pops=" << run.pops;
    if (!run.aborted && fresh > 0 && fresh >= scheduler.min_segment_voxels) {
      const auto label = static_cast<std::uint32_t>(++summary.segments);
      for (std::size_t i = 0; i < run.mask.size(); ++i)
        if (run.mask[i] && summary.labels[i] == 0) summary.labels[i] = label;
      line << " label=" << label << " voxels=" << fresh;
    } else {
      line << " skipped=" << (run.aborted ? run.reason : fresh == 0 ? "empty" : "too-small");
    }
    if (journal) journal->add(line.str());

    if (automatic) {
      for (std::size_t i = 0; i < run.mask.size(); ++i)
        if (run.mask[i]) excluded[i] = 1;
      const double r = depth[seed];
      const auto ri = static_cast<std::int64_t>(std::floor(r));
      for (std::int64_t z = std::max<std::int64_t>(0, seed.z - ri); z <= std::min(d.nz - 1, seed.z + ri); ++z)
        for (std::int64_t y = std::max<std::int64_t>(0, seed.y - ri); y <= std::min(d.ny - 1, seed.y + ri); ++y)
          for (std::int64_t x = std::max<std::int64_t>(0, seed.x - ri); x <= std::min(d.nx - 1, seed.x + ri); ++x) {
            const double dx = x - seed.x, dy = y - seed.y, dz = z - seed.z;
            if (dx * dx + dy * dy + dz * dz < r * r) excluded(x, y, z) = 1;
          }
      excluded[seed] = 1;
    }
  }
  return summary;
}

}  // namespace voxflood
