#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "voxflood/adapter.hpp"
#include "voxflood/evaluation.hpp"
#include "voxflood/finetune.hpp"
#include "voxflood/phantom.hpp"
#include "voxflood/scheduler.hpp"

namespace voxflood {

struct PathsConfig {
  std::filesystem::path input;
  std::filesystem::path labels;
  std::filesystem::path reference;
  std::filesystem::path predicted;
  std::filesystem::path journal;
  std::filesystem::path output_prefix;
  std::filesystem::path evaluation_dir;
  std::filesystem::path dataset_dir;
  std::filesystem::path export_dir;
};

struct PhantomConfig {
  PhantomSpec spec;
  Dims3 dims{128, 128, 128};
  bool write_reference = false;
  ReferenceOptions reference;
};

struct BackendConfig {
  std::string endpoint = "oracle";
  OracleOptions oracle;
};

struct EvaluationConfig {
  bool slice_eval = false;
  SliceEvalOptions slice;
  int heatmap_cell = 4;
};

struct ExportConfig {
  Axis axis = Axis::Z;
  std::vector<std::int64_t> indices;  // empty: the middle slice
};

struct RunConfig {
  std::string preset;
  PathsConfig paths;
  PhantomConfig phantom;
  AdapterConfig adapter;
  SchedulerConfig scheduler;
  BackendConfig backend;
  EvaluationConfig evaluation;
  DatasetOptions training;
  ExportConfig exports;
};

const std::vector<std::string>& preset_names();
// Overwrites the adapter and scheduler fields the preset pins.
void apply_preset(RunConfig& cfg, const std::string& name);

// TOML text with kebab-case keys. Unknown sections or keys, wrong types and
// out-of-range values throw InputError. `preset` is applied before the
// sections, so explicit keys win.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// Endpoint after the VOXFLOOD_BACKEND override.
std::string backend_endpoint(const RunConfig& cfg);

}  // namespace voxflood
