#include "voxflood/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <unordered_map>

#include "voxflood/finetune.hpp"
#include "voxflood/volume_io.hpp"

namespace voxflood {

std::size_t CorrelationMatrix::assigned_rows() const {
  return static_cast<std::size_t>(
      std::count_if(assigned_column.begin(), assigned_column.end(), [](const auto& c) { return c.has_value(); }));
}

CorrelationMatrix correlation_matrix(const LabelVolume& reference, const LabelVolume& predicted) {
  if (reference.dims() != predicted.dims()) {
    throw InputError("reference dims " + to_string(reference.dims()) + " differ from predicted " +
                     to_string(predicted.dims()));
  }
  std::map<std::uint32_t, std::size_t> ref_count, det_count;
  std::unordered_map<std::uint64_t, std::size_t> inter;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const std::uint32_t r = reference[i], d = predicted[i];
    if (r) ++ref_count[r];
    if (d) ++det_count[d];
    if (r && d) ++inter[(std::uint64_t(r) << 32) | d];
  }
  auto pair_iou = [&](std::uint32_t r, std::uint32_t d) {
    const auto it = inter.find((std::uint64_t(r) << 32) | d);
    if (it == inter.end()) return 0.0;
    const double n = double(it->second);
    return n / (double(ref_count[r]) + double(det_count[d]) - n);
  };

  CorrelationMatrix m;
  for (const auto& [id, n] : ref_count) m.ref_ids.push_back(id);
  std::stable_sort(m.ref_ids.begin(), m.ref_ids.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return ref_count[a] > ref_count[b]; });

  // Detected labels overlapping each reference label, ascending id.
  std::map<std::uint32_t, std::vector<std::uint32_t>> partners;
  for (const auto& [key, n] : inter) partners[std::uint32_t(key >> 32)].push_back(std::uint32_t(key & 0xFFFFFFFFu));
  for (auto& [r, v] : partners) std::sort(v.begin(), v.end());

  std::map<std::uint32_t, bool> taken;
  for (std::size_t row = 0; row < m.ref_ids.size(); ++row) {
    const std::uint32_t r = m.ref_ids[row];
    double best = 0.0;
    std::optional<std::uint32_t> pick;
    for (std::uint32_t d : partners[r]) {
      if (taken[d]) continue;
      const double v = pair_iou(r, d);
      if (v > best) {
        best = v;
        pick = d;
      }
    }
    if (pick) {
      taken[*pick] = true;
      m.assigned_column.push_back(m.det_ids.size());
      m.det_ids.push_back(*pick);
    } else {
      m.assigned_column.push_back(std::nullopt);
    }
  }
  for (const auto& [d, n] : det_count)
    if (!taken[d]) m.det_ids.push_back(d);

  for (std::uint32_t r : m.ref_ids) m.ref_voxels.push_back(ref_count[r]);
  for (std::uint32_t d : m.det_ids) m.det_voxels.push_back(det_count[d]);
  m.values.assign(m.ref_ids.size(), std::vector<double>(m.det_ids.size(), 0.0));
  for (std::size_t row = 0; row < m.ref_ids.size(); ++row)
    for (std::size_t col = 0; col < m.det_ids.size(); ++col) m.values[row][col] = pair_iou(m.ref_ids[row], m.det_ids[col]);
  return m;
}

double best_diagonal_mean_iou(const CorrelationMatrix& m) {
  if (m.ref_ids.empty()) return m.det_ids.empty() ? 1.0 : 0.0;
  double sum = 0.0;
  for (std::size_t row = 0; row < m.ref_ids.size(); ++row)
    if (m.assigned_column[row]) sum += m.values[row][*m.assigned_column[row]];
  return sum / double(m.ref_ids.size());
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  return os;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_matrix_csv(const std::filesystem::path& path, const CorrelationMatrix& m) {
  auto os = open_out(path);
  os << "ref";
  for (auto d : m.det_ids) os << ',' << d;
  os << '\n';
  for (std::size_t row = 0; row < m.ref_ids.size(); ++row) {
    os << m.ref_ids[row];
    for (double v : m.values[row]) os << ',' << fixed(v, 6);
    os << '\n';
  }
}

void write_assignment_csv(const std::filesystem::path& path, const CorrelationMatrix& m) {
  auto os = open_out(path);
  os << "ref,ref_voxels,det,det_voxels,iou\n";
  for (std::size_t row = 0; row < m.ref_ids.size(); ++row) {
    os << m.ref_ids[row] << ',' << m.ref_voxels[row] << ',';
    if (const auto col = m.assigned_column[row]) {
      os << m.det_ids[*col] << ',' << m.det_voxels[*col] << ',' << fixed(m.values[row][*col], 6);
    } else {
      os << ",,0.000000";
    }
    os << '\n';
  }
}

void write_heatmap_pgm(const std::filesystem::path& path, const CorrelationMatrix& m, int cell) {
  if (cell < 1) throw InputError("heatmap cell size must be >= 1");
  const std::int64_t rows = std::max<std::size_t>(1, m.ref_ids.size());
  const std::int64_t cols = std::max<std::size_t>(1, m.det_ids.size());
  Image2D img({cols * cell, rows * cell}, 0.0f);
  for (std::size_t r = 0; r < m.ref_ids.size(); ++r)
    for (std::size_t c = 0; c < m.det_ids.size(); ++c) {
      const float g = static_cast<float>(std::floor(m.values[r][c] * 255.0 + 0.5));
      for (int j = 0; j < cell; ++j)
        for (int i = 0; i < cell; ++i) img(std::int64_t(c) * cell + i, std::int64_t(r) * cell + j) = g;
    }
  write_pgm(path, img);
}

std::string summary_line(const CorrelationMatrix& m) {
  return "best_iou=" + fixed(best_diagonal_mean_iou(m), 3) + " refs=" + std::to_string(m.ref_ids.size()) +
         " dets=" + std::to_string(m.det_ids.size());
}

SliceEvalResult slice_eval(const VoxelVolume& volume, const LabelVolume& labels, SliceSegmenter& segmenter,
                           const SliceEvalOptions& opts) {
  if (volume.dims() != labels.dims()) throw InputError("volume and label dims differ");
  if (!(opts.sample_fraction > 0.0 && opts.sample_fraction <= 1.0)) {
    throw InputError("sample-fraction must be in (0, 1]");
  }
  std::vector<std::size_t> fg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) fg.push_back(i);
  if (fg.empty()) throw DataError("no foreground voxels to sample");

  auto k = static_cast<std::size_t>(std::llround(opts.sample_fraction * double(fg.size())));
  k = std::clamp<std::size_t>(k, 1, std::max<std::size_t>(1, opts.max_samples));
  k = std::min(k, fg.size());
  std::mt19937_64 rng(opts.seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * (fg.size() - i)) >> 64);
    std::swap(fg[i], fg[j]);
  }

  std::optional<BinaryMask3D> fg_est;
  if (opts.channel.kind == ChannelStrategyKind::MaxIoUWithForeground) fg_est = estimate_foreground(volume, opts.foreground);

  SliceEvalResult res;
  const Dims2 canvas{kCanvasSize, kCanvasSize};
  std::uint64_t id = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const Index3 pos = labels.index_of(fg[i]);
    for (Axis a : kAllAxes) {
      const TrainingExample ex = make_foreground_example(volume, labels, pos, a, canvas);
      SegmenterRequest req;
      req.id = ++id;
      req.image = to_three_channel(ex.input);
      req.points.push_back({kCanvasSize / 2, kCanvasSize / 2});
      const SegmenterResponse resp = segmenter.segment(req);
      std::optional<Mask2D> fg_slice;
      if (fg_est) fg_slice = extract_plane(*fg_est, pos, a, canvas, std::uint8_t{0});
      const MaskChannel& ch = select_channel(resp, opts.channel, fg_slice ? &*fg_slice : nullptr);
      res.losses.push_back(dice_loss(ch.mask, ex.target));
    }
  }
  std::sort(res.losses.begin(), res.losses.end());
  double sum = 0.0;
  for (double v : res.losses) sum += v;
  res.mean = sum / double(res.losses.size());
  double var = 0.0;
  for (double v : res.losses) var += (v - res.mean) * (v - res.mean);
  res.stddev = std::sqrt(var / double(res.losses.size()));
  return res;
}

}  // namespace voxflood
