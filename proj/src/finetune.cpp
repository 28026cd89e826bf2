#include "voxflood/finetune.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "voxflood/volume_io.hpp"
#include "voxflood/voxel_ops.hpp"

namespace voxflood {

const char* background_variant_name(BackgroundVariant v) {
  switch (v) {
    case BackgroundVariant::ForegroundOnly: return "foreground-only";
    case BackgroundVariant::ConstantValueBackground: return "constant-value-background";
    case BackgroundVariant::ConnectedComponentBackground: return "connected-component-background";
  }
  return "?";
}

BackgroundVariant parse_background_variant(const std::string& name) {
  for (auto v : {BackgroundVariant::ForegroundOnly, BackgroundVariant::ConstantValueBackground,
                 BackgroundVariant::ConnectedComponentBackground})
    if (name == background_variant_name(v)) return v;
  throw InputError("unknown background variant '" + name + "'");
}

const char* example_class_name(ExampleClass c) { return c == ExampleClass::Foreground ? "foreground" : "background"; }

namespace {

// Portable Fisher-Yates; std::shuffle's draws are library-specific.
template <class T>
void shuffle_det(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * i) >> 64);
    std::swap(v[i - 1], v[j]);
  }
}

Image2D input_slice(const VoxelVolume& vol, Index3 pos, Axis axis, Dims2 dims) {
  return normalize_image(extract_plane(vol, pos, axis, dims, 0.0f));
}

Pixel centre_of(Dims2 d) { return {d.w / 2, d.h / 2}; }

}  // namespace

TrainingExample make_foreground_example(const VoxelVolume& vol, const LabelVolume& labels, Index3 pos, Axis axis,
                                        Dims2 slice_dims, const std::string& volume_id) {
  if (vol.dims() != labels.dims()) throw InputError("volume and label dims differ");
  if (!labels.dims().contains(pos)) throw InputError("position " + to_string(pos) + " outside volume");
  const std::uint32_t label = labels[pos];
  if (label == 0) throw InputError("foreground example requested on background voxel " + to_string(pos));
  TrainingExample ex;
  ex.input = input_slice(vol, pos, axis, slice_dims);
  const LabelImage lab = extract_plane(labels, pos, axis, slice_dims, std::uint32_t{0});
  Mask2D m(slice_dims, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = lab[i] == label ? 1 : 0;
  ex.target = keep_component_at(m, centre_of(slice_dims), 8);
  ex.meta = {volume_id, pos, axis, ExampleClass::Foreground, BackgroundVariant::ForegroundOnly};
  return ex;
}

std::vector<TrainingExample> make_background_examples(const VoxelVolume& vol, const LabelVolume& labels, Index3 pos,
                                                       BackgroundVariant variant, Dims2 slice_dims,
                                                       const std::string& volume_id) {
  if (vol.dims() != labels.dims()) throw InputError("volume and label dims differ");
  if (!labels.dims().contains(pos)) throw InputError("position " + to_string(pos) + " outside volume");
  if (labels[pos] != 0) throw InputError("background example requested on foreground voxel " + to_string(pos));
  std::vector<TrainingExample> out;
  if (variant == BackgroundVariant::ForegroundOnly) return out;
  for (Axis axis : kAllAxes) {
    TrainingExample ex;
    ex.input = input_slice(vol, pos, axis, slice_dims);
    if (variant == BackgroundVariant::ConstantValueBackground) {
      ex.target = Mask2D(slice_dims, 0);
    } else {
      const LabelImage lab = extract_plane(labels, pos, axis, slice_dims, std::uint32_t{0});
      Mask2D m(slice_dims, 0);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = lab[i] == 0 ? 1 : 0;
      ex.target = keep_component_at(m, centre_of(slice_dims), 8);
    }
    ex.meta = {volume_id, pos, axis, ExampleClass::Background, variant};
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<ManifestEntry> build_manifest(const std::vector<ExampleClass>& pool, std::size_t fg_per_group,
                                          std::size_t bg_per_group, std::uint64_t rng_seed) {
  if (fg_per_group == 0) throw InputError("fg-per-group must be >= 1");
  if (bg_per_group != 0 && bg_per_group != fg_per_group) {
    throw InputError("bg-per-group must equal fg-per-group (or be 0)");
  }
  std::vector<std::size_t> fg, bg;
  for (std::size_t i = 0; i < pool.size(); ++i) (pool[i] == ExampleClass::Foreground ? fg : bg).push_back(i);
  if (fg.empty()) throw DataError("no foreground examples to balance");
  if (bg_per_group > 0 && bg.size() < fg.size()) {
    throw DataError("background pool of " + std::to_string(bg.size()) + " cannot match " +
                    std::to_string(fg.size()) + " foreground examples");
  }
  std::mt19937_64 rng(rng_seed);
  shuffle_det(fg, rng);
  if (bg_per_group > 0) {
    shuffle_det(bg, rng);
    bg.resize(fg.size());
  } else {
    bg.clear();
  }

  std::vector<ManifestEntry> out;
  const std::size_t groups = (fg.size() + fg_per_group - 1) / fg_per_group;
  for (std::size_t g = 0; g < groups; ++g) {
    std::vector<ManifestEntry> group;
    const std::size_t lo = g * fg_per_group, hi = std::min(fg.size(), lo + fg_per_group);
    for (std::size_t i = lo; i < hi; ++i) {
      group.push_back({fg[i], ExampleClass::Foreground, g});
      if (!bg.empty()) group.push_back({bg[i], ExampleClass::Background, g});
    }
    shuffle_det(group, rng);
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

Index3 lattice_offset(std::int64_t stride, std::uint64_t rng_seed) {
  if (stride < 1) throw InputError("stride must be >= 1");
  std::mt19937_64 rng(rng_seed);
  const auto s = static_cast<std::uint64_t>(stride);
  return {static_cast<std::int64_t>(rng() % s), static_cast<std::int64_t>(rng() % s),
          static_cast<std::int64_t>(rng() % s)};
}

std::vector<Index3> sample_positions(const Dims3& dims, std::size_t n, std::int64_t stride, std::uint64_t rng_seed) {
  const Index3 off = lattice_offset(stride, rng_seed);
  std::vector<Index3> lattice;
  for (std::int64_t z = off.z; z < dims.nz; z += stride)
    for (std::int64_t y = off.y; y < dims.ny; y += stride)
      for (std::int64_t x = off.x; x < dims.nx; x += stride) lattice.push_back({x, y, z});
  std::mt19937_64 rng(rng_seed ^ 0x9e3779b97f4a7c15ULL);
  shuffle_det(lattice, rng);
  if (lattice.size() > n) lattice.resize(n);
  return lattice;
}

DatasetSummary prepare_dataset(const VoxelVolume& vol, const LabelVolume& labels, const DatasetOptions& opts,
                               const std::filesystem::path& dir) {
  if (vol.dims() != labels.dims()) throw InputError("volume and label dims differ");
  DatasetSummary summary;
  const auto positions = sample_positions(vol.dims(), opts.max_positions, opts.stride, opts.seed);
  summary.positions = positions.size();

  std::vector<ExampleMeta> metas;
  std::vector<ExampleClass> pool;
  for (const Index3& p : positions) {
    const bool fg = labels[p] != 0;
    if (!fg && opts.variant == BackgroundVariant::ForegroundOnly) continue;
    for (Axis a : kAllAxes) {
      metas.push_back({opts.volume_id, p, a, fg ? ExampleClass::Foreground : ExampleClass::Background,
                       fg ? BackgroundVariant::ForegroundOnly : opts.variant});
      pool.push_back(metas.back().cls);
      ++(fg ? summary.fg_pool : summary.bg_pool);
    }
  }
  const std::size_t bg_per_group = opts.variant == BackgroundVariant::ForegroundOnly ? 0 : opts.bg_per_group;
  const auto manifest = build_manifest(pool, opts.fg_per_group, bg_per_group, opts.seed);

  std::filesystem::create_directories(dir / "examples");
  std::ofstream tsv(dir / "manifest.tsv", std::ios::binary);
  if (!tsv) throw InputError("cannot write " + (dir / "manifest.tsv").string());
  tsv << "id\tclass\tvariant\tvolume\tx\ty\tz\taxis\tgroup\n";
  for (std::size_t k = 0; k < manifest.size(); ++k) {
    const ManifestEntry& e = manifest[k];
    const ExampleMeta& m = metas[e.example];
    char id[16];
    std::snprintf(id, sizeof id, "%06zu", k);
    TrainingExample ex;
    if (m.cls == ExampleClass::Foreground) {
      ex = make_foreground_example(vol, labels, m.position, m.axis, opts.slice_dims, m.volume_id);
      ++summary.fg_written;
    } else {
      auto three = make_background_examples(vol, labels, m.position, m.variant, opts.slice_dims, m.volume_id);
      ex = std::move(three.at(static_cast<std::size_t>(m.axis)));
      ++summary.bg_written;
    }
    write_pgm(dir / "examples" / (std::string(id) + "_input.pgm"), ex.input);
    write_pgm(dir / "examples" / (std::string(id) + "_target.pgm"), ex.target);
    tsv << id << '\t' << example_class_name(m.cls) << '\t' << background_variant_name(m.variant) << '\t'
        << m.volume_id << '\t' << m.position.x << '\t' << m.position.y << '\t' << m.position.z << '\t'
        << axis_name(m.axis) << '\t' << e.group << '\n';
  }
  if (!manifest.empty()) summary.groups = manifest.back().group + 1;
  summary.batches = (summary.groups + opts.batch_groups - 1) / std::max<std::size_t>(1, opts.batch_groups);
  if (!tsv) throw InputError("failed writing " + (dir / "manifest.tsv").string());
  return summary;
}

}  // namespace voxflood
