#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "voxflood/grid.hpp"

namespace voxflood {

enum class PhantomKind { Marbles, Corn, Sheets };

const char* phantom_kind_name(PhantomKind k);
PhantomKind parse_phantom_kind(const std::string& name);

// Upright cylinder (axis along z) that entities must fit inside.
struct Cylinder {
  double cx = 0, cy = 0;
  double radius = 0;
  double z0 = 0, height = 0;
};

struct PhantomSpec {
  PhantomKind kind = PhantomKind::Marbles;
  std::optional<Cylinder> container;
  int count = 5;
  // Marbles: radius. Corn: major semi-axis (axes 3:2:1). Sheets: side length.
  double size_min = 8.0;
  double size_max = 12.0;
  double intensity_mean = 200.0;
  double intensity_jitter = 0.0;
  double background = 20.0;
  double noise_sigma = 0.0;
  double artefact_level = 0.0;  // [0, 1], amplitude of additive streaks
  std::uint64_t seed = 42;

  void validate() const;
};

class PhantomError : public Error {
 public:
  PhantomError(const std::string& what, int achieved) : Error(what), achieved_(achieved) {}
  int achieved() const { return achieved_; }

 private:
  int achieved_;
};

struct Phantom {
  VoxelVolume volume;  // 8-bit intensities in [0, 255]
  LabelVolume labels;  // 1..count, 0 background
};

// Rejection-sampled placement, at most 10 * count attempts. Marbles and corn
// keep a gap of at least two voxels between entities; sheets may touch.
Phantom generate(const PhantomSpec& spec, Dims3 dims);

struct ReferenceOptions {
  int closing_radius = 1;        // after Otsu binarisation
  double min_separation = 4.0;   // marker suppression distance
  int label_closing_radius = 1;  // per-label closing
};

// Otsu binarise, close, distance transform, maxima markers, watershed on the
// negated distance inside the support, then per-label closing restricted to
// still-unlabelled support voxels.
LabelVolume classical_reference(const VoxelVolume& vol, const ReferenceOptions& opts = {});

}  // namespace voxflood
