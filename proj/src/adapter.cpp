#include "voxflood/adapter.hpp"

#include <thread>

#include "voxflood/metrics.hpp"
#include "voxflood/volume_io.hpp"

namespace voxflood {

const char* prompt_type_name(PromptType p) {
  return p == PromptType::CenterPoint ? "center-point" : "center-point-plus-dense";
}

const char* merge_rule_name(MergeRuleKind k) {
  switch (k) {
    case MergeRuleKind::Always: return "always";
    case MergeRuleKind::BreakOnEmptySlice: return "break-on-empty-slice";
    case MergeRuleKind::MinIoUToLastSlice: return "min-iou-to-last-slice";
    case MergeRuleKind::MinIoUToForeground: return "min-iou-to-foreground";
  }
  return "?";
}

void AdapterConfig::validate() const {
  if (tile_size < 1) throw InputError("tile-size must be >= 1");
  if (stack_merge_min_count < 1 || stack_merge_min_count > 3) throw InputError("slice-fg-count must be 1, 2 or 3");
  if (seed_fg_slice_count < 0 || seed_fg_slice_count > 3) throw InputError("seed-fg-count must be in [0, 3]");
  if (merge_rule.threshold < 0.0 || merge_rule.threshold > 1.0) throw InputError("merge threshold must be in [0, 1]");
  if (foreground.threshold_fraction < 0.0 || foreground.threshold_fraction > 1.0) {
    throw InputError("fg-threshold must be in [0, 1]");
  }
  if (foreground.closing_radius < 0) throw InputError("fg-closing-radius must be >= 0");
}

namespace {

Index3 tile_center(const Dims3& d) { return {d.nx / 2, d.ny / 2, d.nz / 2}; }

void check_cubic(const Dims3& d) {
  if (d.nx != d.ny || d.ny != d.nz) throw InputError("tile must be cubic, got " + to_string(d));
}

Index3 plane_point(Index3 c, Axis axis, std::int64_t k) {
  component(c, static_cast<int>(axis)) = k;
  return c;
}

void write_plane(BinaryMask3D& stack, const Mask2D& m, Axis axis, std::int64_t k) {
  const PlaneAxes pa = plane_axes(axis);
  Index3 p;
  component(p, pa.normal) = k;
  for (std::int64_t j = 0; j < m.height(); ++j) {
    component(p, pa.v) = j;
    for (std::int64_t i = 0; i < m.width(); ++i) {
      component(p, pa.u) = i;
      stack[p] = m(i, j);
    }
  }
}

struct SliceOutcome {
  Mask2D mask;
  Mask2D fg;  // empty grid unless a foreground tile was given
  SliceState state = SliceState::Normal;
};

class StackRunner {
 public:
  StackRunner(const VoxelVolume& tile, Axis axis, SliceSegmenter& segmenter, const AdapterConfig& config,
              const BinaryMask3D* fg_tile, const BinaryMask3D* dense_tile, const std::string& tag)
      : tile_(tile), axis_(axis), seg_(segmenter), cfg_(config), fg_(fg_tile), dense_(dense_tile), tag_(tag) {
    side_ = tile.dims().nx;
    anchor_ = {side_ / 2, side_ / 2};
    center_ = tile_center(tile.dims());
  }

  SliceOutcome process(std::int64_t k, StackResult& result) {
    const Index3 p = plane_point(center_, axis_, k);
    const Dims2 sd{side_, side_};
    const Dims2 canvas{kCanvasSize, kCanvasSize};
    SliceOutcome out;
    out.mask = Mask2D(sd, 0);
    if (fg_) out.fg = extract_plane(*fg_, p, axis_, sd, std::uint8_t{0});

    const Image2D raw = extract_plane(tile_, p, axis_, sd, 0.0f);
    out.state = detect_empty_or_outlier(raw, cfg_.outlier_min_nonzero);
    if (out.state != SliceState::Normal) return out;

    const Image2D norm = normalize_image(raw);
    SegmenterRequest req;
    req.id = ++result.segmenter_calls;
    req.image = to_three_channel(place_on_canvas(norm, anchor_, canvas, 0.0f));
    req.points.push_back({kCanvasSize / 2, kCanvasSize / 2});
    if (cfg_.prompt == PromptType::CenterPointPlusDense && dense_) {
      req.dense = place_on_canvas(extract_plane(*dense_, p, axis_, sd, std::uint8_t{0}), anchor_, canvas,
                                  std::uint8_t{0});
    }
    std::optional<Mask2D> fg_canvas;
    if (cfg_.channel.kind == ChannelStrategyKind::MaxIoUWithForeground) {
      if (!fg_) throw InputError("max-iou-with-fg channel selection needs a foreground estimate");
      fg_canvas = place_on_canvas(out.fg, anchor_, canvas, std::uint8_t{0});
    }

    const SegmenterResponse resp = seg_.segment(req);
    const MaskChannel& ch = select_channel(resp, cfg_.channel, fg_canvas ? &*fg_canvas : nullptr);
    if (ch.mask.width() != kCanvasSize || ch.mask.height() != kCanvasSize) {
      throw BackendError("segmenter returned a mask of the wrong size");
    }
    Mask2D m = take_from_canvas(cfg_.mask_source.kind == MaskSourceKind::BinaryFullRes
                                    ? ch.mask
                                    : mask_from_logits(ch.logits, cfg_.mask_source.threshold,
                                                       cfg_.mask_source.upscaling),
                                anchor_, sd, std::uint8_t{0});
    if (cfg_.slice_median) m = median_filter(m, 1);
    if (cfg_.slice_cca) m = keep_component_at(m, anchor_, 8);
    out.mask = std::move(m);

    if (cfg_.diagnostics_dir) {
      const auto stem = *cfg_.diagnostics_dir /
                        (tag_ + "_" + axis_name(axis_) + "_" + std::to_string(k));
      write_pgm(stem.string() + "_input.pgm", norm);
      write_pgm(stem.string() + "_mask.pgm", out.mask);
    }
    return out;
  }

  bool accept(const SliceOutcome& s, const Mask2D* previous) const {
    const MergeRule& rule = cfg_.merge_rule;
    switch (rule.kind) {
      case MergeRuleKind::Always:
        return true;
      case MergeRuleKind::BreakOnEmptySlice:
        return s.state == SliceState::Normal && count_true(s.mask) > 0;
      case MergeRuleKind::MinIoUToLastSlice:
        if (!previous) return count_true(s.mask) > 0;
        return iou(s.mask, *previous) > rule.threshold;
      case MergeRuleKind::MinIoUToForeground:
        if (!fg_) throw InputError("min-iou-to-foreground needs a foreground estimate");
        return iou(s.mask, s.fg) > rule.threshold;
    }
    return false;
  }

  StackResult run() {
    StackResult result;
    result.mask = BinaryMask3D(tile_.dims(), 0);
    const std::int64_t c = component(center_, static_cast<int>(axis_));
    SliceOutcome centre = process(c, result);
    if (centre.state != SliceState::Normal || !accept(centre, nullptr)) {
      result.reason = centre.state != SliceState::Normal ? slice_state_name(centre.state) : "centre-rejected";
      return result;
    }
    write_plane(result.mask, centre.mask, axis_, c);
    ++result.slices_written;

    Mask2D prev_plus = centre.mask;
    Mask2D prev_minus = std::move(centre.mask);
    bool plus = true, minus = true;
    for (std::int64_t s = 1; plus || minus; ++s) {
      if (plus) {
        if (c + s >= side_) {
          plus = false;
        } else {
          SliceOutcome o = process(c + s, result);
          if (accept(o, &prev_plus)) {
            write_plane(result.mask, o.mask, axis_, c + s);
            ++result.slices_written;
            prev_plus = std::move(o.mask);
          } else {
            plus = false;
          }
        }
      }
      if (minus) {
        if (c - s < 0) {
          minus = false;
        } else {
          SliceOutcome o = process(c - s, result);
          if (accept(o, &prev_minus)) {
            write_plane(result.mask, o.mask, axis_, c - s);
            ++result.slices_written;
            prev_minus = std::move(o.mask);
          } else {
            minus = false;
          }
        }
      }
    }
    return result;
  }

 private:
  const VoxelVolume& tile_;
  Axis axis_;
  SliceSegmenter& seg_;
  const AdapterConfig& cfg_;
  const BinaryMask3D* fg_;
  const BinaryMask3D* dense_;
  std::string tag_;
  std::int64_t side_ = 0;
  Pixel anchor_;
  Index3 center_;
};

}  // namespace

int seed_fg_slice_votes(const BinaryMask3D& fg, Index3 at) {
  int votes = 0;
  for (Axis a : kAllAxes) {
    const Mask2D plane = extract_plane(fg, at, a, Dims2{3, 3}, std::uint8_t{0});
    if (count_true(plane) >= 5) ++votes;
  }
  return votes;
}

int seed_fg_slice_votes(const BinaryMask3D& fg_tile) { return seed_fg_slice_votes(fg_tile, tile_center(fg_tile.dims())); }

bool seed_filter(const BinaryMask3D& fg_tile, int seed_fg_slice_count) {
  if (seed_fg_slice_count <= 0) return true;
  return seed_fg_slice_votes(fg_tile) >= seed_fg_slice_count;
}

StackResult segment_stack(const VoxelVolume& tile, Axis axis, SliceSegmenter& segmenter,
                          const AdapterConfig& config, const BinaryMask3D* fg_tile,
                          const BinaryMask3D* dense_tile, const std::string& tag) {
  check_cubic(tile.dims());
  if (fg_tile && fg_tile->dims() != tile.dims()) throw InputError("foreground tile dims differ from tile");
  if (dense_tile && dense_tile->dims() != tile.dims()) throw InputError("dense tile dims differ from tile");
  StackRunner runner(tile, axis, segmenter, config, fg_tile, dense_tile, tag);
  try {
    return runner.run();
  } catch (const BackendError& e) {
    StackResult r;
    r.mask = BinaryMask3D(tile.dims(), 0);
    r.aborted = true;
    r.reason = std::string("backend: ") + e.what();
    return r;
  }
}

BinaryMask3D merge_stacks(const std::array<const BinaryMask3D*, 3>& stacks, int min_count) {
  if (min_count < 1 || min_count > 3) throw InputError("merge min_count must be 1, 2 or 3");
  const Dims3 d = stacks[0]->dims();
  if (stacks[1]->dims() != d || stacks[2]->dims() != d) throw InputError("stack dims differ");
  BinaryMask3D out(d, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int n = ((*stacks[0])[i] != 0) + ((*stacks[1])[i] != 0) + ((*stacks[2])[i] != 0);
    out[i] = n >= min_count ? 1 : 0;
  }
  return out;
}

BinaryMask3D merge_stacks(const std::array<BinaryMask3D, 3>& stacks, int min_count) {
  return merge_stacks({&stacks[0], &stacks[1], &stacks[2]}, min_count);
}

TileProposal segment_tile(const VoxelVolume& tile, SliceSegmenter& segmenter, const AdapterConfig& config,
                          const BinaryMask3D& fg_tile, const BinaryMask3D* dense_tile, const std::string& tag) {
  check_cubic(tile.dims());
  TileProposal proposal;
  proposal.mask = BinaryMask3D(tile.dims(), 0);
  if (!seed_filter(fg_tile, config.seed_fg_slice_count)) {
    proposal.aborted = true;
    proposal.reason = "seed-filter";
    for (auto& s : proposal.stacks) s = BinaryMask3D(tile.dims(), 0);
    return proposal;
  }

  std::array<StackResult, 3> results;
  auto run_axis = [&](std::size_t i) {
    results[i] = segment_stack(tile, kAllAxes[i], segmenter, config, &fg_tile, dense_tile, tag);
  };
  if (config.parallel_axes) {
    std::array<std::thread, 3> workers;
    for (std::size_t i = 0; i < 3; ++i) workers[i] = std::thread(run_axis, i);
    for (auto& w : workers) w.join();
  } else {
    for (std::size_t i = 0; i < 3; ++i) run_axis(i);
  }

  for (std::size_t i = 0; i < 3; ++i) {
    proposal.segmenter_calls += results[i].segmenter_calls;
    proposal.stacks[i] = std::move(results[i].mask);
    if (results[i].aborted && !proposal.aborted) {
      proposal.aborted = true;
      proposal.reason = results[i].reason;
    }
  }
  if (proposal.aborted) return proposal;
  proposal.mask = merge_stacks(proposal.stacks, config.stack_merge_min_count);
  if (config.volume_median) proposal.mask = median_filter(proposal.mask, 1);
  return proposal;
}

}  // namespace voxflood
