#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "voxflood/grid.hpp"

namespace voxflood {

using Histogram256 = std::array<std::uint64_t, 256>;

// Intensities clamped to [0, 255] and rounded half-up into 256 bins.
Histogram256 histogram8(std::span<const float> values);

// Threshold t maximising the between-class variance of {v <= t} vs {v > t};
// ties go to the smaller t. With a single occupied bin that bin is returned.
// Comparisons are exact (integer arithmetic).
int otsu_threshold(const Histogram256& histogram);

BinaryMask3D binarize(const VoxelVolume& vol, double threshold);
Mask2D binarize(const Image2D& img, double threshold);

enum class MorphOp { Erode, Dilate, Open, Close };

// 3D connectivity is 6 or 26, 2D connectivity is 4 or 8. Radius r applies the
// unit element r times. Out-of-volume neighbours are ignored, so erosion does
// not eat in from the volume boundary (and dilate/erode stay dual).
struct StructuringElement {
  int connectivity = 6;
  int radius = 1;
};

BinaryMask3D morph(const BinaryMask3D& mask, MorphOp op, StructuringElement se);

// Labels 1..k in order of each component's first voxel in scan order.
LabelVolume connected_components(const BinaryMask3D& mask, int connectivity, std::uint32_t* count = nullptr);
LabelImage connected_components(const Mask2D& mask, int connectivity, std::uint32_t* count = nullptr);

// Component containing `point`, or an empty mask when `point` is unset.
BinaryMask3D keep_component_at(const BinaryMask3D& mask, Index3 point, int connectivity);
Mask2D keep_component_at(const Mask2D& mask, Pixel point, int connectivity);

// Median over the (2r+1)^d box with clamped coordinates.
Mask2D median_filter(const Mask2D& mask, int radius);
BinaryMask3D median_filter(const BinaryMask3D& mask, int radius);
Image2D median_filter(const Image2D& img, int radius);

// Exact Euclidean distance from every set voxel to the nearest unset voxel;
// voxels outside the volume count as unset. Unset voxels get 0.
VoxelVolume distance_transform(const BinaryMask3D& mask);

// Priority-flood watershed: voxels are claimed in order of ascending relief
// (the max along the flooding path), ties by smaller label then scan order.
// When `support` is given, only its set voxels are flooded. Markers keep
// their labels.
LabelVolume watershed(const VoxelVolume& relief, const LabelVolume& markers,
                      const BinaryMask3D* support = nullptr, int connectivity = 6);

// Positive 26-neighbourhood maxima (>= every neighbour, > at least one),
// accepted in order of decreasing value then scan order. A candidate is
// suppressed when it lies closer than `min_separation` to an accepted marker,
// or inside that marker's inscribed ball (radius = its distance value).
// Labels are 1..k in acceptance order.
LabelVolume local_maxima_markers(const VoxelVolume& dist, double min_separation);

enum class ForegroundStrategy { Otsu, Fixed };

struct ForegroundOptions {
  ForegroundStrategy strategy = ForegroundStrategy::Otsu;
  double threshold_fraction = 0.5;  // Fixed: threshold = floor(f * 255)
  int closing_radius = 1;
  int connectivity = 6;
};

double fixed_threshold(double fraction);
double foreground_threshold(const VoxelVolume& vol, const ForegroundOptions& opts);
BinaryMask3D estimate_foreground(const VoxelVolume& vol, const ForegroundOptions& opts);

}  // namespace voxflood
