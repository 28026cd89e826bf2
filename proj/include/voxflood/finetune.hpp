#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxflood/volume.hpp"

namespace voxflood {

enum class BackgroundVariant { ForegroundOnly, ConstantValueBackground, ConnectedComponentBackground };
enum class ExampleClass { Foreground, Background };

const char* background_variant_name(BackgroundVariant v);
BackgroundVariant parse_background_variant(const std::string& name);
const char* example_class_name(ExampleClass c);

struct ExampleMeta {
  std::string volume_id;
  Index3 position;
  Axis axis = Axis::Z;
  ExampleClass cls = ExampleClass::Foreground;
  BackgroundVariant variant = BackgroundVariant::ForegroundOnly;
};

struct TrainingExample {
  Image2D input;  // normalised to [0, 255]
  Mask2D target;
  ExampleMeta meta;
};

// Optimiser settings the external fine-tuning run is expected to use. Nothing
// here trains; the values are carried for the dataset README and manifests.
struct TrainingRecipe {
  static constexpr int batch_size = 64;
  static constexpr int fg_per_group = 16;
  static constexpr int bg_per_group = 16;
  static constexpr double learning_rate = 8e-4;
  static constexpr int warmup_iterations = 250;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double weight_decay = 0.1;
  static constexpr const char* optimizer = "AdamW";
  static constexpr const char* loss = "Dice(sigmoid, squared_pred, mean) + BCE(mean)";
};

// Target: pixels carrying label(pos) in the slice, reduced to the
// 8-connected component at the slice centre.
TrainingExample make_foreground_example(const VoxelVolume& vol, const LabelVolume& labels, Index3 pos, Axis axis,
                                        Dims2 slice_dims, const std::string& volume_id = "volume");

// Zero, or three (one per axis) examples. For the connected-component variant
// the target is the background component at the slice centre, with everything
// outside the volume counted as background.
std::vector<TrainingExample> make_background_examples(const VoxelVolume& vol, const LabelVolume& labels, Index3 pos,
                                                       BackgroundVariant variant, Dims2 slice_dims,
                                                       const std::string& volume_id = "volume");

struct ManifestEntry {
  std::size_t example = 0;  // index into the example pool
  ExampleClass cls = ExampleClass::Foreground;
  std::size_t group = 0;
};

// Uses every foreground example and draws as many background examples without
// replacement; groups hold fg_per_group + bg_per_group shuffled entries. With
// bg_per_group == 0 no background is drawn. Throws DataError when there is no
// foreground or too little background.
std::vector<ManifestEntry> build_manifest(const std::vector<ExampleClass>& pool, std::size_t fg_per_group,
                                          std::size_t bg_per_group, std::uint64_t rng_seed);

// Stride lattice shifted by a seeded offset in [0, stride)^3, shuffled, first n.
std::vector<Index3> sample_positions(const Dims3& dims, std::size_t n, std::int64_t stride, std::uint64_t rng_seed);
Index3 lattice_offset(std::int64_t stride, std::uint64_t rng_seed);

struct DatasetOptions {
  BackgroundVariant variant = BackgroundVariant::ConstantValueBackground;
  std::int64_t stride = 8;
  std::size_t max_positions = 4096;
  std::uint64_t seed = 1;
  std::size_t fg_per_group = TrainingRecipe::fg_per_group;
  std::size_t bg_per_group = TrainingRecipe::bg_per_group;
  std::size_t batch_groups = 2;
  Dims2 slice_dims{256, 256};
  std::string volume_id = "volume";
};

struct DatasetSummary {
  std::size_t positions = 0;
  std::size_t fg_pool = 0;
  std::size_t bg_pool = 0;
  std::size_t fg_written = 0;
  std::size_t bg_written = 0;
  std::size_t groups = 0;
  std::size_t batches = 0;
};

// Writes <dir>/examples/<id>_input.pgm, <dir>/examples/<id>_target.pgm and
// <dir>/manifest.tsv.
DatasetSummary prepare_dataset(const VoxelVolume& vol, const LabelVolume& labels, const DatasetOptions& opts,
                               const std::filesystem::path& dir);

}  // namespace voxflood
