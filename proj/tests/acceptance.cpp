// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// fails. Tolerances and sizes are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "voxflood/adapter.hpp"
#include "voxflood/commands.hpp"
#include "voxflood/evaluation.hpp"
#include "voxflood/finetune.hpp"
#include "voxflood/metrics.hpp"
#include "voxflood/phantom.hpp"
#include "voxflood/scheduler.hpp"
#include "voxflood/volume_io.hpp"
#include "voxflood/voxel_ops.hpp"

using namespace voxflood;
namespace fs = std::filesystem;

namespace {

constexpr double kMinBestIoU = 0.90;
constexpr double kMaxMarbleSeconds = 60.0;
constexpr int kMergeTrials = 200;
constexpr int kVoxelOpTrials = 100;
constexpr int kIdentityPairs = 1000;
constexpr double kIdentityTolerance = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "voxflood_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunConfig marble_config(const fs::path& dir, const std::string& preset) {
  RunConfig cfg;
  apply_preset(cfg, preset);
  // The oracle answers with one channel; the fixed index 1 of the preset has
  // nothing to point at.
  cfg.adapter.channel = {ChannelStrategyKind::MaxPredictedIoU, 0};
  cfg.phantom.spec.kind = PhantomKind::Marbles;
  cfg.phantom.spec.count = 5;
  cfg.phantom.spec.noise_sigma = 5.0;
  cfg.phantom.spec.seed = 42;
  cfg.phantom.dims = {128, 128, 128};
  cfg.paths.output_prefix = dir / "marbles";
  cfg.paths.input = dir / "marbles_input.voxv";
  cfg.paths.labels = dir / "marbles_labels.voxv";
  cfg.paths.reference = dir / "marbles_labels.voxv";
  cfg.paths.predicted = dir / "marbles_predicted.voxv";
  cfg.paths.journal = dir / "journal.txt";
  cfg.paths.evaluation_dir = dir / "eval";
  return cfg;
}

struct Pipeline {
  int status = 0;
  double seconds = 0.0;
  std::string output;
  CorrelationMatrix matrix;
};

Pipeline run_pipeline(const RunConfig& cfg) {
  Pipeline p;
  std::ostringstream out, err;
  const auto t0 = std::chrono::steady_clock::now();
  for (const char* cmd : {"generate", "segment", "evaluate"}) {
    p.status = run_command(cmd, cfg, out, err);
    if (p.status != 0) break;
  }
  p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  p.output = out.str() + err.str();
  if (p.status == 0) {
    p.matrix = correlation_matrix(read_label_volume(cfg.paths.reference), read_label_volume(cfg.paths.predicted));
  }
  return p;
}

Outcome marbles_end_to_end() {
  const fs::path dir = scratch() / "marbles";
  const Pipeline p = run_pipeline(marble_config(dir, "vitb48"));
  if (p.status != 0) return {false, "pipeline exit " + std::to_string(p.status) + ": " + p.output};
  const double best = best_diagonal_mean_iou(p.matrix);
  const std::size_t rows = p.matrix.assigned_rows();
  const bool ok = rows == 5 && best >= kMinBestIoU && p.seconds < kMaxMarbleSeconds;
  return {ok, "assigned_rows=" + std::to_string(rows) + " best_iou=" + fmt("%.3f", best) +
                  " seconds=" + fmt("%.1f", p.seconds)};
}

Outcome single_tile_mode() {
  const fs::path dir = scratch() / "single";
  RunConfig cfg = marble_config(dir, "vitb1024");
  const Pipeline p = run_pipeline(cfg);
  if (p.status != 0) return {false, "pipeline exit " + std::to_string(p.status) + ": " + p.output};
  std::map<std::string, int> pops_per_segment;
  std::size_t segments = 0;
  std::istringstream journal(slurp(cfg.paths.journal));
  for (std::string line; std::getline(journal, line);) {
    if (line.rfind("pop seg=", 0) == 0) {
      ++pops_per_segment[line.substr(8, line.find(' ', 8) - 8)];
    } else if (line.rfind("segment ", 0) == 0) {
      ++segments;
    }
  }
  bool one_each = segments > 0 && pops_per_segment.size() == segments;
  for (const auto& [seg, n] : pops_per_segment) one_each = one_each && n == 1;
  const double best = best_diagonal_mean_iou(p.matrix);
  return {one_each && best >= kMinBestIoU,
          "seeds=" + std::to_string(segments) + " one_pop_per_seed=" + (one_each ? "yes" : "no") +
              " best_iou=" + fmt("%.3f", best)};
}

Outcome majority_vote() {
  std::mt19937_64 rng(2024);
  int bad = 0;
  for (int t = 0; t < kMergeTrials; ++t) {
    std::array<BinaryMask3D, 3> s;
    for (auto& m : s) m = oracle::random_mask(rng, {4, 4, 4}, 0.5);
    std::array<BinaryMask3D, 4> k;
    for (int c = 1; c <= 3; ++c) {
      k[c] = merge_stacks(s, c);
      for (std::size_t i = 0; i < 64; ++i)
        if ((k[c][i] != 0) != (s[0][i] + s[1][i] + s[2][i] >= c)) ++bad;
    }
    for (std::size_t i = 0; i < 64; ++i)
      if (k[2][i] > k[1][i] || k[3][i] > k[2][i]) ++bad;
  }
  return {bad == 0, std::to_string(kMergeTrials) + " triples, mismatches=" + std::to_string(bad)};
}

// 8-connected flood fill from `start` over set pixels, by plain BFS.
Mask2D flood_from(const Mask2D& m, Pixel start) {
  Mask2D out(m.dims(), 0);
  if (!m(start.x, start.y)) return out;
  std::vector<Pixel> stack{start};
  out(start.x, start.y) = 1;
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::int64_t x = p.x + dx, y = p.y + dy;
        if (x < 0 || y < 0 || x >= m.dims().w || y >= m.dims().h) continue;
        if (m(x, y) && !out(x, y)) {
          out(x, y) = 1;
          stack.push_back({x, y});
        }
      }
  }
  return out;
}

class AllTrueSegmenter final : public SliceSegmenter {
 public:
  SegmenterResponse segment(const SegmenterRequest& r) override {
    SegmenterResponse resp;
    resp.id = r.id;
    MaskChannel ch;
    ch.mask = Mask2D({kCanvasSize, kCanvasSize}, 1);
    ch.logits = pooled_logits(ch.mask);
    ch.predicted_iou = 1.0;
    resp.channels.push_back(std::move(ch));
    return resp;
  }
};

Outcome flood_termination() {
  const Dims3 d{64, 64, 64};
  VoxelVolume vol(d);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<float> u(0.0f, 255.0f);
  for (auto& v : vol.values()) v = u(rng);
  const BinaryMask3D fg(d, 1);
  AllTrueSegmenter seg;
  SchedulerConfig s;
  s.movement_step = 16;
  s.max_tiles_per_segment = std::numeric_limits<std::size_t>::max();
  const std::size_t bound = 4 * 4 * 4;
  std::string detail;
  bool ok = true;
  for (std::int64_t tile : {16, 20}) {
    AdapterConfig a;
    a.tile_size = tile;
    a.merge_rule.kind = MergeRuleKind::Always;
    const SegmentRun run = run_segment({31, 31, 31}, {vol, fg, fg, seg, a, s, nullptr, 1});
    ok = ok && run.pops <= bound;
    detail += "tile" + std::to_string(tile) + "_pops=" + std::to_string(run.pops) + " ";
  }
  return {ok, detail + "bound=" + std::to_string(bound)};
}

Outcome voxel_op_oracles() {
  std::mt19937_64 rng(31337);
  int cca_bad = 0, edt_bad = 0, otsu_bad = 0;
  for (int t = 0; t < kVoxelOpTrials; ++t) {
    const Dims3 d = oracle::random_dims(rng, 6, 8);
    const BinaryMask3D m = oracle::random_mask(rng, d, 0.45);
    for (int conn : {6, 18, 26})
      if (!(connected_components(m, conn) == oracle::components(m, conn))) ++cca_bad;
    const BinaryMask3D dm = oracle::random_mask(rng, d, 0.8);
    if (!(distance_transform(dm) == oracle::distance(dm))) ++edt_bad;
    VoxelVolume v(d);
    std::vector<int> ints;
    std::uniform_int_distribution<int> lo(0, 110), hi(120, 255), pick(0, 1);
    for (auto& f : v.values()) {
      const int g = pick(rng) ? lo(rng) : hi(rng);
      f = static_cast<float>(g);
      ints.push_back(g);
    }
    if (otsu_threshold(histogram8(v.values())) != oracle::otsu(ints)) ++otsu_bad;
  }
  return {cca_bad + edt_bad + otsu_bad == 0,
          std::to_string(kVoxelOpTrials) + " instances, mismatches cca=" + std::to_string(cca_bad) +
              " edt=" + std::to_string(edt_bad) + " otsu=" + std::to_string(otsu_bad)};
}

Outcome watershed_split() {
  const Dims3 d{48, 32, 32};
  const double r = 8.0;
  const Index3 a{18, 16, 16}, b{30, 16, 16};  // centre distance 2r - 4
  VoxelVolume vol(d, 20.0f);
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x)
        if (std::hypot(x - a.x, y - a.y, z - a.z) <= r || std::hypot(x - b.x, y - b.y, z - b.z) <= r)
          vol(x, y, z) = 200.0f;
  const LabelVolume ref = classical_reference(vol);
  std::set<std::uint32_t> labels;
  for (std::uint32_t l : ref.values())
    if (l) labels.insert(l);
  const std::uint32_t la = ref[a], lb = ref[b];
  const bool ok = labels.size() == 2 && la != 0 && lb != 0 && la != lb;
  return {ok, "labels=" + std::to_string(labels.size()) + " centre_labels=" + std::to_string(la) + "," +
                  std::to_string(lb)};
}

Outcome evaluation_identities() {
  std::mt19937_64 rng(77);
  int diag_bad = 0, inj_bad = 0;
  for (int t = 0; t < 50; ++t) {
    LabelVolume l(oracle::random_dims(rng, 4, 8), 0);
    std::uniform_int_distribution<std::uint32_t> pick(0, 1 + t % 12);
    for (auto& v : l.values()) v = pick(rng);
    const CorrelationMatrix self = correlation_matrix(l, l);
    for (std::size_t r = 0; r < self.ref_ids.size(); ++r)
      if (!self.assigned_column[r] || self.at(r, *self.assigned_column[r]) != 1.0) ++diag_bad;
    LabelVolume other(l.dims(), 0);
    for (auto& v : other.values()) v = pick(rng);
    const CorrelationMatrix m = correlation_matrix(l, other);
    std::set<std::size_t> cols;
    for (const auto& c : m.assigned_column)
      if (c && !cols.insert(*c).second) ++inj_bad;
  }
  double worst = 0.0;
  for (int t = 0; t < kIdentityPairs; ++t) {
    const Dims3 d = oracle::random_dims(rng, 2, 6);
    const BinaryMask3D x = oracle::random_mask(rng, d, 0.5), y = oracle::random_mask(rng, d, 0.5);
    const double i = iou(x, y);
    worst = std::max(worst, std::abs(dice_loss(x, y) - (1.0 - 2.0 * i / (1.0 + i))));
  }
  return {diag_bad == 0 && inj_bad == 0 && worst <= kIdentityTolerance,
          "diagonal_misses=" + std::to_string(diag_bad) + " injectivity_violations=" + std::to_string(inj_bad) +
              " max_identity_error=" + fmt("%.2e", worst)};
}

Outcome finetune_prep() {
  PhantomSpec spec;
  spec.noise_sigma = 5.0;
  const Phantom ph = generate(spec, {128, 128, 128});
  const Dims2 sd{128, 128};
  const Pixel centre{64, 64};
  std::size_t fg = 0, not_connected = 0, cv = 0, cv_nonempty = 0;
  for (const Index3& p : sample_positions(ph.labels.dims(), 4096, 8, 1)) {
    if (ph.labels[p]) {
      for (Axis a : kAllAxes) {
        const TrainingExample ex = make_foreground_example(ph.volume, ph.labels, p, a, sd);
        ++fg;
        if (!ex.target[ex.target.linear(centre.x, centre.y)] || !(flood_from(ex.target, centre) == ex.target))
          ++not_connected;
      }
    } else if (cv < 600) {
      for (const auto& ex :
           make_background_examples(ph.volume, ph.labels, p, BackgroundVariant::ConstantValueBackground, sd)) {
        ++cv;
        if (count_true(ex.target)) ++cv_nonempty;
      }
    }
  }

  DatasetOptions opts;
  opts.slice_dims = {64, 64};
  const fs::path dir = scratch() / "dataset";
  const DatasetSummary s = prepare_dataset(ph.volume, ph.labels, opts, dir);
  std::map<std::string, std::pair<int, int>> per_group;
  std::ifstream tsv(dir / "manifest.tsv");
  std::string line;
  std::getline(tsv, line);
  while (std::getline(tsv, line)) {
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, '\t');) cols.push_back(c);
    auto& g = per_group[cols.at(8)];
    (cols.at(1) == "foreground" ? g.first : g.second)++;
  }
  bool balanced = !per_group.empty() && s.fg_written == s.bg_written;
  for (const auto& [g, n] : per_group) balanced = balanced && n.first == n.second;
  const bool ok = fg > 0 && not_connected == 0 && cv > 0 && cv_nonempty == 0 && balanced;
  return {ok, "fg_targets=" + std::to_string(fg) + " not_centre_connected=" + std::to_string(not_connected) +
                  " constant_bg=" + std::to_string(cv) + " nonempty=" + std::to_string(cv_nonempty) +
                  " manifest fg=" + std::to_string(s.fg_written) + " bg=" + std::to_string(s.bg_written) +
                  " groups_balanced=" + (balanced ? "yes" : "no")};
}

Outcome enframing_geometry() {
  const Dims3 original{512, 512, 512};
  const std::int64_t border = 512;
  const Dims3 framed = enframed_dims(original, border);
  const Dims2 out{1024, 1024};
  std::size_t out_of_bounds = 0, checked = 0;
  for (std::int64_t z = 0; z < 512; ++z)
    for (std::int64_t y = 0; y < 512; ++y)
      for (std::int64_t x = 0; x < 512; ++x) {
        const Index3 c{x + border, y + border, z + border};
        for (Axis a : kAllAxes) {
          ++checked;
          if (!plane_in_bounds(framed, c, a, out)) ++out_of_bounds;
        }
      }

  // Same geometry at 1/32 scale, materialised: no slice may contain the fill.
  const Dims3 small{16, 16, 16};
  VoxelVolume vol(small, 1.0f);
  const VoxelVolume e = enframe(vol, 16, 0.0f);
  std::size_t fill_hits = 0;
  for (std::int64_t z = 16; z < 32; ++z)
    for (std::int64_t y = 16; y < 32; ++y)
      for (std::int64_t x = 16; x < 32; ++x)
        for (Axis a : kAllAxes) {
          const Image2D img = extract_plane(e, {x, y, z}, a, Dims2{32, 32}, -1.0f);
          for (float v : img.values()) fill_hits += v == -1.0f;
        }
  const bool ok = framed == Dims3{1536, 1536, 1536} && out_of_bounds == 0 && fill_hits == 0;
  return {ok, "framed=" + to_string(framed) + " slices_checked=" + std::to_string(checked) +
                  " out_of_bounds=" + std::to_string(out_of_bounds) + " small_fill_hits=" + std::to_string(fill_hits)};
}

Outcome determinism() {
  std::vector<std::string> files;
  std::array<fs::path, 2> dirs{scratch() / "det_a", scratch() / "det_b"};
  for (const fs::path& dir : dirs) {
    const Pipeline p = run_pipeline(marble_config(dir, "vitb48"));
    if (p.status != 0) return {false, "pipeline exit " + std::to_string(p.status)};
  }
  std::size_t compared = 0, differ = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dirs[0]);
    ++compared;
    if (slurp(entry.path()) != slurp(dirs[1] / rel)) ++differ;
  }
  return {compared > 0 && differ == 0, "files=" + std::to_string(compared) + " differing=" + std::to_string(differ)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> checks = {
      {"end-to-end marbles", marbles_end_to_end},
      {"single-tile mode", single_tile_mode},
      {"majority-vote merge", majority_vote},
      {"flood-fill termination", flood_termination},
      {"voxel-op oracles", voxel_op_oracles},
      {"watershed split", watershed_split},
      {"evaluation identities", evaluation_identities},
      {"fine-tune prep", finetune_prep},
      {"enframing geometry", enframing_geometry},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-24s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
