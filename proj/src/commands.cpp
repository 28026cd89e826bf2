#include "voxflood/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "voxflood/protocol.hpp"
#include "voxflood/volume_io.hpp"

namespace voxflood {

namespace {

namespace fs = std::filesystem;

const fs::path& require(const fs::path& p, const char* key) {
  if (p.empty()) throw InputError(std::string("paths.") + key + " is required for this command");
  return p;
}

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
  return prefix.string() + suffix;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << text;
  if (!os) throw InputError("write to " + path.string() + " failed");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <class T>
Grid2<T> full_plane(const Grid3<T>& vol, Axis axis, std::int64_t index) {
  const PlaneAxes pa = plane_axes(axis);
  const Dims3 d = vol.dims();
  if (index < 0 || index >= extent(d, pa.normal)) {
    throw InputError("slice index " + std::to_string(index) + " outside axis " + axis_name(axis));
  }
  const Dims2 out{extent(d, pa.u), extent(d, pa.v)};
  Index3 c;
  component(c, pa.u) = out.w / 2;
  component(c, pa.v) = out.h / 2;
  component(c, pa.normal) = index;
  return extract_plane(vol, c, axis, out, T{});
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e)) return kExitInput;
  if (dynamic_cast<const BackendError*>(&e)) return kExitBackend;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const PhantomError*>(&e)) return kExitData;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitInput;
  return 1;
}

void cmd_generate(const RunConfig& cfg, std::ostream& out) {
  const fs::path& prefix = require(cfg.paths.output_prefix, "output-prefix");
  const Phantom ph = generate(cfg.phantom.spec, cfg.phantom.dims);
  const fs::path input = with_suffix(prefix, "_input.voxv");
  const fs::path labels = with_suffix(prefix, "_labels.voxv");
  write_voxv(input, ph.volume, ValueKind::U8);
  write_voxv(labels, ph.labels);
  out << "wrote " << input.string() << " and " << labels.string() << " (" << to_string(ph.volume.dims()) << ", "
      << cfg.phantom.spec.count << " " << phantom_kind_name(cfg.phantom.spec.kind) << ")\n";
  if (cfg.phantom.write_reference) {
    const fs::path ref = with_suffix(prefix, "_reference.voxv");
    write_voxv(ref, classical_reference(ph.volume, cfg.phantom.reference));
    out << "wrote " << ref.string() << '\n';
  }
}

void cmd_segment(const RunConfig& cfg, std::ostream& out) {
  const VoxelVolume vol = read_voxel_volume(require(cfg.paths.input, "input"));
  const fs::path& predicted = require(cfg.paths.predicted, "predicted");
  auto segmenter = make_segmenter(backend_endpoint(cfg), cfg.backend.oracle);
  Journal journal;
  const RunSummary summary = run_all(vol, *segmenter, cfg.adapter, cfg.scheduler, &journal);
  write_voxv(predicted, summary.labels);
  if (!cfg.paths.journal.empty()) write_text(cfg.paths.journal, journal.text());
  out << "segments=" << summary.segments << " seeds=" << summary.seeds_tried << " pops=" << summary.pops
      << " segmenter_calls=" << summary.segmenter_calls << '\n';
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const LabelVolume reference = read_label_volume(require(cfg.paths.reference, "reference"));
  const LabelVolume predicted = read_label_volume(require(cfg.paths.predicted, "predicted"));
  const CorrelationMatrix m = correlation_matrix(reference, predicted);
  const fs::path& dir = cfg.paths.evaluation_dir;
  if (!dir.empty()) {
    write_matrix_csv(dir / "correlation.csv", m);
    write_assignment_csv(dir / "assignment.csv", m);
    write_heatmap_pgm(dir / "heatmap.pgm", m, cfg.evaluation.heatmap_cell);
  }
  out << summary_line(m) << '\n';

  if (cfg.evaluation.slice_eval) {
    const VoxelVolume vol = read_voxel_volume(require(cfg.paths.input, "input"));
    auto segmenter = make_segmenter(backend_endpoint(cfg), cfg.backend.oracle);
    SliceEvalOptions opts = cfg.evaluation.slice;
    opts.channel = cfg.adapter.channel;
    opts.foreground = cfg.adapter.foreground;
    const SliceEvalResult r = slice_eval(vol, reference, *segmenter, opts);
    if (!dir.empty()) {
      std::string csv = "rank,loss\n";
      for (std::size_t i = 0; i < r.losses.size(); ++i) csv += std::to_string(i) + "," + fixed(r.losses[i], 6) + "\n";
      write_text(dir / "slice_losses.csv", csv);
    }
    out << "slice_loss_mean=" << fixed(r.mean, 4) << " slice_loss_std=" << fixed(r.stddev, 4)
        << " slices=" << r.losses.size() << '\n';
  }
}

void cmd_prepare_training(const RunConfig& cfg, std::ostream& out) {
  const VoxelVolume vol = read_voxel_volume(require(cfg.paths.input, "input"));
  const LabelVolume labels = read_label_volume(require(cfg.paths.labels, "labels"));
  const DatasetSummary s = prepare_dataset(vol, labels, cfg.training, require(cfg.paths.dataset_dir, "dataset-dir"));
  out << "positions=" << s.positions << " fg_pool=" << s.fg_pool << " bg_pool=" << s.bg_pool
      << " fg=" << s.fg_written << " bg=" << s.bg_written << " groups=" << s.groups << " batches=" << s.batches
      << '\n';
}

void cmd_export_slices(const RunConfig& cfg, std::ostream& out) {
  const VoxelVolume vol = read_voxel_volume(require(cfg.paths.input, "input"));
  const fs::path& dir = require(cfg.paths.export_dir, "export-dir");
  const Axis axis = cfg.exports.axis;
  std::vector<std::int64_t> indices = cfg.exports.indices;
  if (indices.empty()) indices.push_back(extent(vol.dims(), static_cast<int>(axis)) / 2);
  std::optional<LabelVolume> labels, predicted;
  if (!cfg.paths.labels.empty()) labels = read_label_volume(cfg.paths.labels);
  if (!cfg.paths.predicted.empty()) predicted = read_label_volume(cfg.paths.predicted);
  std::size_t files = 0;
  for (std::int64_t idx : indices) {
    const std::string tag = std::string(axis_name(axis)) + "_" + std::to_string(idx) + ".pgm";
    write_pgm(dir / ("input_" + tag), full_plane(vol, axis, idx));
    ++files;
    if (labels) {
      write_label_pgm(dir / ("labels_" + tag), full_plane(*labels, axis, idx));
      ++files;
    }
    if (predicted) {
      write_label_pgm(dir / ("predicted_" + tag), full_plane(*predicted, axis, idx));
      ++files;
    }
  }
  out << "exported " << files << " images to " << dir.string() << '\n';
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (name == "generate") {
      cmd_generate(cfg, out);
    } else if (name == "segment") {
      cmd_segment(cfg, out);
    } else if (name == "evaluate") {
      cmd_evaluate(cfg, out);
    } else if (name == "prepare-training") {
      cmd_prepare_training(cfg, out);
    } else if (name == "export-slices") {
      cmd_export_slices(cfg, out);
    } else {
      throw InputError("unknown command '" + name + "'");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace voxflood
