#include "voxflood/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace voxflood {

namespace {

struct Preset {
  AdapterConfig adapter;
  SchedulerConfig scheduler;
};

Preset make_preset(const std::string& name) {
  Preset p;
  AdapterConfig& a = p.adapter;
  SchedulerConfig& s = p.scheduler;
  a.foreground.strategy = ForegroundStrategy::Fixed;
  s.movement_step = 1;
  if (name == "vitb48") {
    a.tile_size = 48;
    a.seed_fg_slice_count = 2;
    a.stack_merge_min_count = 3;
    a.foreground.threshold_fraction = 0.3;
    a.prompt = PromptType::CenterPointPlusDense;
    a.channel = {ChannelStrategyKind::FixedIndex, 1};
    a.merge_rule = {MergeRuleKind::MinIoUToLastSlice, 0.5};
    a.slice_median = true;
    a.slice_cca = true;
    a.volume_median = false;
    s.check_step_width = 13;
    s.accumulator_update = AccumulatorUpdate::ForegroundOnly;
    s.restrict_movement = RestrictMovement::Foreground;
    s.max_steps = 128;
  } else if (name == "vitb1024") {
    a.tile_size = 1024;
    a.seed_fg_slice_count = 2;
    a.stack_merge_min_count = 1;
    a.foreground.threshold_fraction = 0.2;
    a.prompt = PromptType::CenterPoint;
    a.channel = {ChannelStrategyKind::MaxPredictedIoU, 0};
    a.merge_rule = {MergeRuleKind::MinIoUToLastSlice, 0.25};
    a.slice_median = false;
    a.slice_cca = true;
    a.volume_median = true;
    s.check_step_width = 13;
    s.accumulator_update = AccumulatorUpdate::ForegroundOnly;
    s.restrict_movement = RestrictMovement::ErodedForeground;
    s.max_steps.reset();
  } else if (name == "tuned48") {
    a.tile_size = 48;
    a.seed_fg_slice_count = 1;
    a.stack_merge_min_count = 1;
    a.foreground.threshold_fraction = 0.2;
    a.prompt = PromptType::CenterPointPlusDense;
    a.channel = {ChannelStrategyKind::MaxIoUWithForeground, 0};
    a.merge_rule = {MergeRuleKind::MinIoUToLastSlice, 0.5};
    a.slice_median = false;
    a.slice_cca = false;
    a.volume_median = false;
    s.check_step_width = 19;
    s.accumulator_update = AccumulatorUpdate::Always;
    s.restrict_movement = RestrictMovement::ErodedForeground;
    s.max_steps = 128;
  } else if (name == "tuned1024") {
    a.tile_size = 1024;
    a.seed_fg_slice_count = 1;
    a.stack_merge_min_count = 1;
    a.foreground.threshold_fraction = 0.5;
    a.prompt = PromptType::CenterPointPlusDense;
    a.channel = {ChannelStrategyKind::MaxIoUWithForeground, 0};
    a.merge_rule = {MergeRuleKind::Always, 0.0};
    a.slice_median = false;
    a.slice_cca = false;
    a.volume_median = true;
    s.check_step_width = 19;
    s.accumulator_update = AccumulatorUpdate::Always;
    s.restrict_movement = RestrictMovement::Foreground;
    s.max_steps.reset();
  } else {
    throw InputError("unknown preset '" + name + "'");
  }
  return p;
}

template <class E>
E parse_named(const std::string& value, const std::string& key, std::initializer_list<std::pair<const char*, E>> options) {
  std::string known;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    known += known.empty() ? name : std::string(", ") + name;
  }
  throw InputError("invalid value '" + value + "' for " + key + " (expected one of: " + known + ")");
}

// Reads keys from one table and rejects whatever was not consumed.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  const toml::node* node(const std::string& key) {
    if (!table_) return nullptr;
    used_.insert(key);
    return table_->get(key);
  }

  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  bool get(const std::string& key, std::int64_t& out) {
    const toml::node* n = node(key);
    if (!n) return false;
    const auto v = n->value_exact<std::int64_t>();
    if (!v) throw InputError(where(key) + " must be an integer");
    out = *v;
    return true;
  }

  bool get(const std::string& key, int& out) {
    std::int64_t v = 0;
    if (!get(key, v)) return false;
    out = static_cast<int>(v);
    return true;
  }

  bool get_count(const std::string& key, std::size_t& out) {
    std::int64_t v = 0;
    if (!get(key, v)) return false;
    if (v < 0) throw InputError(where(key) + " must be >= 0");
    out = static_cast<std::size_t>(v);
    return true;
  }

  bool get(const std::string& key, double& out) {
    const toml::node* n = node(key);
    if (!n) return false;
    if (const auto i = n->value_exact<std::int64_t>()) {
      out = double(*i);
    } else if (const auto d = n->value_exact<double>()) {
      out = *d;
    } else {
      throw InputError(where(key) + " must be a number");
    }
    return true;
  }

  bool get(const std::string& key, bool& out) {
    const toml::node* n = node(key);
    if (!n) return false;
    const auto v = n->value_exact<bool>();
    if (!v) throw InputError(where(key) + " must be true or false");
    out = *v;
    return true;
  }

  bool get(const std::string& key, std::string& out) {
    const toml::node* n = node(key);
    if (!n) return false;
    const auto v = n->value_exact<std::string>();
    if (!v) throw InputError(where(key) + " must be a string");
    out = *v;
    return true;
  }

  bool get(const std::string& key, std::filesystem::path& out) {
    std::string s;
    if (!get(key, s)) return false;
    out = s;
    return true;
  }

  std::vector<std::int64_t> int_list(const std::string& key, const toml::node* n) {
    const toml::array* arr = n->as_array();
    if (!arr) throw InputError(where(key) + " must be an array of integers");
    std::vector<std::int64_t> out;
    for (const auto& e : *arr) {
      const auto v = e.value_exact<std::int64_t>();
      if (!v) throw InputError(where(key) + " must be an array of integers");
      out.push_back(*v);
    }
    return out;
  }

  bool get(const std::string& key, std::vector<std::int64_t>& out) {
    const toml::node* n = node(key);
    if (!n) return false;
    out = int_list(key, n);
    return true;
  }

  bool get(const std::string& key, Dims3& out) {
    const toml::node* n = node(key);
    if (!n) return false;
    if (const auto v = n->value_exact<std::int64_t>()) {
      out = {*v, *v, *v};
    } else {
      const auto l = int_list(key, n);
      if (l.size() != 3) throw InputError(where(key) + " must be an integer or [nx, ny, nz]");
      out = {l[0], l[1], l[2]};
    }
    if (!out.valid()) throw InputError(where(key) + " must be positive");
    return true;
  }

  bool get(const std::string& key, std::vector<Index3>& out) {
    const toml::node* n = node(key);
    if (!n) return false;
    const toml::array* arr = n->as_array();
    if (!arr) throw InputError(where(key) + " must be an array of [x, y, z]");
    out.clear();
    for (const auto& e : *arr) {
      const auto l = int_list(key, &e);
      if (l.size() != 3) throw InputError(where(key) + " entries must be [x, y, z]");
      out.push_back({l[0], l[1], l[2]});
    }
    return true;
  }

  const toml::table* subtable(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (!n->as_table()) throw InputError(where(key) + " must be a table");
    return n->as_table();
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (!used_.count(key)) throw InputError("unknown key '" + where(key) + "'");
    }
  }

 private:
  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

void require_fraction(double v, const std::string& key) {
  if (!(v >= 0.0 && v <= 1.0)) throw InputError(key + " must be in [0, 1]");
}

void read_paths(Section s, PathsConfig& p) {
  s.get("input", p.input);
  s.get("labels", p.labels);
  s.get("reference", p.reference);
  s.get("predicted", p.predicted);
  s.get("journal", p.journal);
  s.get("output-prefix", p.output_prefix);
  s.get("evaluation-dir", p.evaluation_dir);
  s.get("dataset-dir", p.dataset_dir);
  s.get("export-dir", p.export_dir);
  s.finish();
}

void read_phantom(Section s, PhantomConfig& p) {
  std::string kind;
  if (s.get("kind", kind)) p.spec.kind = parse_phantom_kind(kind);
  s.get("dims", p.dims);
  s.get("count", p.spec.count);
  s.get("size-min", p.spec.size_min);
  s.get("size-max", p.spec.size_max);
  s.get("intensity-mean", p.spec.intensity_mean);
  s.get("intensity-jitter", p.spec.intensity_jitter);
  s.get("background", p.spec.background);
  s.get("noise-sigma", p.spec.noise_sigma);
  s.get("artefact-level", p.spec.artefact_level);
  std::int64_t seed = 0;
  if (s.get("seed", seed)) p.spec.seed = static_cast<std::uint64_t>(seed);
  s.get("write-reference", p.write_reference);
  s.get("reference-closing-radius", p.reference.closing_radius);
  s.get("reference-min-separation", p.reference.min_separation);
  if (const toml::table* t = s.subtable("container")) {
    Section c(t, "phantom.container");
    Cylinder cyl;
    if (!c.get("cx", cyl.cx) || !c.get("cy", cyl.cy) || !c.get("radius", cyl.radius) || !c.get("z0", cyl.z0) ||
        !c.get("height", cyl.height)) {
      throw InputError("phantom.container needs cx, cy, radius, z0 and height");
    }
    c.finish();
    p.spec.container = cyl;
  }
  s.finish();
  p.spec.validate();
}

void read_adapter(Section s, AdapterConfig& a) {
  s.get("tile-size", a.tile_size);
  std::string v;
  if (s.get("prompt-type", v)) {
    a.prompt = parse_named<PromptType>(v, s.where("prompt-type"),
                                       {{"center-point", PromptType::CenterPoint},
                                        {"center-point-plus-dense", PromptType::CenterPointPlusDense}});
  }
  if (s.get("sam-output-channel", v)) {
    a.channel.kind = parse_named<ChannelStrategyKind>(
        v, s.where("sam-output-channel"),
        {{"max-predicted-iou", ChannelStrategyKind::MaxPredictedIoU},
         {"fixed-index", ChannelStrategyKind::FixedIndex},
         {"max-iou-with-fg", ChannelStrategyKind::MaxIoUWithForeground},
         {"min-voxel-count", ChannelStrategyKind::MinVoxelCount}});
  }
  s.get_count("channel-index", a.channel.index);
  if (s.get("mask-source", v)) {
    a.mask_source.kind = parse_named<MaskSourceKind>(
        v, s.where("mask-source"), {{"binary", MaskSourceKind::BinaryFullRes}, {"logits", MaskSourceKind::Logits}});
  }
  s.get("logits-threshold", a.mask_source.threshold);
  if (s.get("logits-upscaling", v)) {
    a.mask_source.upscaling = parse_named<Upscaling>(v, s.where("logits-upscaling"),
                                                     {{"nearest", Upscaling::Nearest}, {"bilinear", Upscaling::Bilinear}});
  }
  if (s.get("slice-merge-rule", v)) {
    a.merge_rule.kind = parse_named<MergeRuleKind>(v, s.where("slice-merge-rule"),
                                                   {{"always", MergeRuleKind::Always},
                                                    {"break-on-empty-slice", MergeRuleKind::BreakOnEmptySlice},
                                                    {"min-iou-to-last-slice", MergeRuleKind::MinIoUToLastSlice},
                                                    {"min-iou-to-foreground", MergeRuleKind::MinIoUToForeground}});
  }
  if (s.get("slice-merge-threshold", a.merge_rule.threshold)) {
    require_fraction(a.merge_rule.threshold, s.where("slice-merge-threshold"));
  }
  s.get("slice-median", a.slice_median);
  s.get("cca", a.slice_cca);
  s.get("slice-fg-count", a.stack_merge_min_count);
  s.get("volume-median", a.volume_median);
  s.get("seed-fg-count", a.seed_fg_slice_count);
  if (s.get("fg-threshold", a.foreground.threshold_fraction)) {
    require_fraction(a.foreground.threshold_fraction, s.where("fg-threshold"));
  }
  if (s.get("fg-strategy", v)) {
    a.foreground.strategy = parse_named<ForegroundStrategy>(
        v, s.where("fg-strategy"), {{"otsu", ForegroundStrategy::Otsu}, {"fixed", ForegroundStrategy::Fixed}});
  }
  s.get("fg-closing-radius", a.foreground.closing_radius);
  s.get_count("outlier-min-nonzero", a.outlier_min_nonzero);
  s.get("parallel-axes", a.parallel_axes);
  std::filesystem::path diag;
  if (s.get("diagnostics-dir", diag)) a.diagnostics_dir = diag;
  s.finish();
  a.validate();
}

void read_scheduler(Section s, SchedulerConfig& c) {
  s.get("movement-step", c.movement_step);
  s.get("check-step-width", c.check_step_width);
  std::string v;
  if (s.get("accumulator-update", v)) {
    c.accumulator_update = parse_named<AccumulatorUpdate>(
        v, s.where("accumulator-update"), {{"fg-only", AccumulatorUpdate::ForegroundOnly}, {"always", AccumulatorUpdate::Always}});
  }
  if (s.get("restrict-movement", v)) {
    c.restrict_movement = parse_named<RestrictMovement>(
        v, s.where("restrict-movement"), {{"fg", RestrictMovement::Foreground}, {"eroded-fg", RestrictMovement::ErodedForeground}});
  }
  std::size_t n = 0;
  if (s.get_count("max-steps", n)) {
    if (n == 0) {
      c.max_steps.reset();
    } else {
      c.max_steps = n;
    }
  }
  s.get_count("max-tiles-per-segment", c.max_tiles_per_segment);
  if (s.get("seed-mode", v)) {
    c.seed_mode = parse_named<SeedMode>(v, s.where("seed-mode"), {{"auto", SeedMode::Automatic}, {"manual", SeedMode::Manual}});
  }
  s.get("seeds", c.seeds);
  s.get_count("max-segments", c.max_segments);
  s.get("min-seed-depth", c.min_seed_depth);
  s.get_count("min-segment-voxels", c.min_segment_voxels);
  s.finish();
  c.validate();
}

void read_backend(Section s, BackendConfig& b) {
  s.get("endpoint", b.endpoint);
  if (const toml::node* n = s.node("oracle-threshold")) {
    if (const auto str = n->value_exact<std::string>()) {
      if (*str != "otsu") throw InputError("backend.oracle-threshold must be \"otsu\" or a fraction");
      b.oracle.threshold = ThresholdKind::Otsu;
    } else if (const auto d = n->value<double>()) {
      require_fraction(*d, "backend.oracle-threshold");
      b.oracle.threshold = ThresholdKind::Fixed;
      b.oracle.threshold_fraction = *d;
    } else {
      throw InputError("backend.oracle-threshold must be \"otsu\" or a fraction");
    }
  }
  s.finish();
}

void read_evaluation(Section s, EvaluationConfig& e) {
  s.get("slice-eval", e.slice_eval);
  if (s.get("sample-fraction", e.slice.sample_fraction) &&
      !(e.slice.sample_fraction > 0.0 && e.slice.sample_fraction <= 1.0)) {
    throw InputError("evaluation.sample-fraction must be in (0, 1]");
  }
  std::int64_t seed = 0;
  if (s.get("seed", seed)) e.slice.seed = static_cast<std::uint64_t>(seed);
  s.get_count("max-samples", e.slice.max_samples);
  s.get("heatmap-cell", e.heatmap_cell);
  if (e.heatmap_cell < 1) throw InputError("evaluation.heatmap-cell must be >= 1");
  s.finish();
}

void read_training(Section s, DatasetOptions& t) {
  std::string v;
  if (s.get("variant", v)) t.variant = parse_background_variant(v);
  s.get("stride", t.stride);
  if (t.stride < 1) throw InputError("training.stride must be >= 1");
  s.get_count("max-positions", t.max_positions);
  std::int64_t seed = 0;
  if (s.get("seed", seed)) t.seed = static_cast<std::uint64_t>(seed);
  s.get_count("fg-per-group", t.fg_per_group);
  s.get_count("bg-per-group", t.bg_per_group);
  s.get_count("batch-groups", t.batch_groups);
  std::int64_t side = 0;
  if (s.get("slice-size", side)) {
    if (side < 1) throw InputError("training.slice-size must be >= 1");
    t.slice_dims = {side, side};
  }
  s.get("volume-id", t.volume_id);
  s.finish();
}

void read_export(Section s, ExportConfig& e) {
  std::string v;
  if (s.get("axis", v)) e.axis = parse_axis(v);
  s.get("indices", e.indices);
  s.finish();
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"vitb48", "vitb1024", "tuned48", "tuned1024"};
  return names;
}

void apply_preset(RunConfig& cfg, const std::string& name) {
  const Preset p = make_preset(name);
  AdapterConfig a = p.adapter;
  a.outlier_min_nonzero = cfg.adapter.outlier_min_nonzero;
  a.parallel_axes = cfg.adapter.parallel_axes;
  a.diagnostics_dir = cfg.adapter.diagnostics_dir;
  a.mask_source = cfg.adapter.mask_source;
  a.foreground.closing_radius = cfg.adapter.foreground.closing_radius;
  a.foreground.connectivity = cfg.adapter.foreground.connectivity;
  SchedulerConfig s = p.scheduler;
  s.max_tiles_per_segment = cfg.scheduler.max_tiles_per_segment;
  s.seed_mode = cfg.scheduler.seed_mode;
  s.seeds = cfg.scheduler.seeds;
  s.max_segments = cfg.scheduler.max_segments;
  s.min_seed_depth = cfg.scheduler.min_seed_depth;
  s.min_segment_voxels = cfg.scheduler.min_segment_voxels;
  cfg.adapter = std::move(a);
  cfg.scheduler = std::move(s);
  cfg.preset = name;
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw InputError(os.str());
  }
  RunConfig cfg;
  Section top(&root, "");
  std::string preset;
  if (top.get("preset", preset)) apply_preset(cfg, preset);
  read_paths(Section(top.subtable("paths"), "paths"), cfg.paths);
  read_phantom(Section(top.subtable("phantom"), "phantom"), cfg.phantom);
  read_adapter(Section(top.subtable("adapter"), "adapter"), cfg.adapter);
  read_scheduler(Section(top.subtable("scheduler"), "scheduler"), cfg.scheduler);
  read_backend(Section(top.subtable("backend"), "backend"), cfg.backend);
  read_evaluation(Section(top.subtable("evaluation"), "evaluation"), cfg.evaluation);
  read_training(Section(top.subtable("training"), "training"), cfg.training);
  read_export(Section(top.subtable("export"), "export"), cfg.exports);
  top.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string backend_endpoint(const RunConfig& cfg) {
  if (const char* env = std::getenv("VOXFLOOD_BACKEND"); env && *env) return env;
  return cfg.backend.endpoint;
}

}  // namespace voxflood
