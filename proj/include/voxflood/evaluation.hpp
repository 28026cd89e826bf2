#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voxflood/metrics.hpp"
#include "voxflood/segmenter.hpp"
#include "voxflood/voxel_ops.hpp"

namespace voxflood {

struct CorrelationMatrix {
  std::vector<std::uint32_t> ref_ids;  // descending voxel count, ties by id
  std::vector<std::size_t> ref_voxels;
  std::vector<std::uint32_t> det_ids;  // assigned in row order, then the rest by id
  std::vector<std::size_t> det_voxels;
  std::vector<std::vector<double>> values;                // [row][column]
  std::vector<std::optional<std::size_t>> assigned_column;  // per row

  double at(std::size_t row, std::size_t col) const { return values[row][col]; }
  std::size_t assigned_rows() const;
};

// Each row in turn claims the free detected label with the highest IoU
// (> 0, ties to the lower id).
CorrelationMatrix correlation_matrix(const LabelVolume& reference, const LabelVolume& predicted);

// Mean over rows of the assigned IoU; unassigned rows count as 0, and a
// matrix without rows scores 1 when nothing was detected either, else 0.
double best_diagonal_mean_iou(const CorrelationMatrix& m);

void write_matrix_csv(const std::filesystem::path& path, const CorrelationMatrix& m);
void write_assignment_csv(const std::filesystem::path& path, const CorrelationMatrix& m);
// One cell of `cell` x `cell` pixels per entry, grey = round(255 * IoU).
void write_heatmap_pgm(const std::filesystem::path& path, const CorrelationMatrix& m, int cell = 4);
std::string summary_line(const CorrelationMatrix& m);

struct SliceEvalOptions {
  double sample_fraction = 0.005;
  std::uint64_t seed = 7;
  std::size_t max_samples = 50;  // foreground voxels; three slices each
  ChannelStrategy channel;
  ForegroundOptions foreground;  // max-iou-with-fg channel selection only
};

struct SliceEvalResult {
  std::vector<double> losses;  // ascending
  double mean = 0.0;
  double stddev = 0.0;  // population
};

// Dice loss of single-slice predictions (centre point prompt on a
// kCanvasSize^2 slice) against the centre-connected reference target.
SliceEvalResult slice_eval(const VoxelVolume& volume, const LabelVolume& labels, SliceSegmenter& segmenter,
                           const SliceEvalOptions& opts);

}  // namespace voxflood
