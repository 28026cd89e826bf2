#include "voxflood/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "voxflood/volume.hpp"
#include "voxflood/voxel_ops.hpp"

namespace voxflood {
namespace {

constexpr double kGap = 2.0;
constexpr int kStreaks = 3;

struct Blob {
  std::array<double, 3> c;
  double bound;  // bounding radius
};

struct Rotation {
  std::array<std::array<double, 3>, 3> m;
};

// Uniform random rotation from a uniformly drawn unit quaternion.
Rotation random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  const double qw = a * std::sin(2 * std::numbers::pi * u2);
  const double qx = a * std::cos(2 * std::numbers::pi * u2);
  const double qy = b * std::sin(2 * std::numbers::pi * u3);
  const double qz = b * std::cos(2 * std::numbers::pi * u3);
  Rotation r;
  r.m = {{{1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)},
          {2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)},
          {2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)}}};
  return r;
}

bool inside_container(const PhantomSpec& spec, const std::array<double, 3>& c, double bound) {
  if (!spec.container) return true;
  const Cylinder& cyl = *spec.container;
  return std::hypot(c[0] - cyl.cx, c[1] - cyl.cy) + bound <= cyl.radius &&
         c[2] - bound >= cyl.z0 && c[2] + bound <= cyl.z0 + cyl.height;
}

bool clear_of(const std::vector<Blob>& placed, const std::array<double, 3>& c, double bound) {
  for (const auto& b : placed) {
    const double d = std::hypot(c[0] - b.c[0], c[1] - b.c[1], c[2] - b.c[2]);
    if (d < bound + b.bound + kGap) return false;
  }
  return true;
}

// Centre drawn so a ball of radius `bound` stays one voxel inside the volume.
bool draw_centre(std::mt19937_64& rng, Dims3 dims, double bound, std::array<double, 3>& c) {
  const std::array<double, 3> n = {double(dims.nx), double(dims.ny), double(dims.nz)};
  for (int a = 0; a < 3; ++a) {
    const double lo = bound + 1.0, hi = n[a] - 2.0 - bound;
    if (hi < lo) return false;
    c[a] = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return true;
}

template <class Inside>
void paint(LabelVolume& labels, VoxelVolume& vol, const std::array<double, 3>& c, double bound,
           std::uint32_t label, float value, Inside inside) {
  const Dims3 d = labels.dims();
  const auto lo = [&](int a) { return std::max<std::int64_t>(0, std::int64_t(std::floor(c[a] - bound))); };
  const auto hi = [&](int a, std::int64_t n) {
    return std::min<std::int64_t>(n - 1, std::int64_t(std::ceil(c[a] + bound)));
  };
  for (std::int64_t z = lo(2); z <= hi(2, d.nz); ++z)
    for (std::int64_t y = lo(1); y <= hi(1, d.ny); ++y)
      for (std::int64_t x = lo(0); x <= hi(0, d.nx); ++x)
        if (inside(x - c[0], y - c[1], z - c[2])) {
          labels(x, y, z) = label;
          vol(x, y, z) = value;
        }
}

struct SheetVoxels {
  std::vector<Index3> voxels;
};

bool draw_sheet(std::mt19937_64& rng, Dims3 dims, const PhantomSpec& spec, SheetVoxels& out) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double side = std::uniform_real_distribution<double>(spec.size_min, spec.size_max)(rng);
  const int thickness = std::uniform_int_distribution<int>(1, 3)(rng);
  const int normal = std::uniform_int_distribution<int>(0, 2)(rng);
  const int ua = (normal + 1) % 3, va = (normal + 2) % 3;
  const double amp = u01(rng) * side / 6.0;
  const double period = side * (0.5 + 1.5 * u01(rng));
  const double phase = 2 * std::numbers::pi * u01(rng);
  const auto len = static_cast<std::int64_t>(std::round(side));
  const std::int64_t nu = extent(dims, ua), nv = extent(dims, va), nw = extent(dims, normal);
  if (len > nu || len > nv) return false;
  const double wlo = amp + 2.0, whi = double(nw) - amp - 3.0;
  if (whi < wlo) return false;
  const auto u0 = std::uniform_int_distribution<std::int64_t>(0, nu - len)(rng);
  const auto v0 = std::uniform_int_distribution<std::int64_t>(0, nv - len)(rng);
  const double w0 = std::uniform_real_distribution<double>(wlo, whi)(rng);
  out.voxels.clear();
  for (std::int64_t v = v0; v < v0 + len; ++v)
    for (std::int64_t u = u0; u < u0 + len; ++u) {
      const double s = w0 + amp * std::sin(2 * std::numbers::pi * double(u - u0) / period + phase);
      const auto first = static_cast<std::int64_t>(std::floor(s + 0.5)) - (thickness - 1) / 2;
      for (int t = 0; t < thickness; ++t) {
        Index3 p;
        component(p, ua) = u;
        component(p, va) = v;
        component(p, normal) = first + t;
        if (!dims.contains(p)) return false;
        out.voxels.push_back(p);
      }
    }
  return true;
}

}  // namespace

const char* phantom_kind_name(PhantomKind k) {
  switch (k) {
    case PhantomKind::Marbles: return "marbles";
    case PhantomKind::Corn: return "corn";
    case PhantomKind::Sheets: return "sheets";
  }
  return "?";
}

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "marbles") return PhantomKind::Marbles;
  if (name == "corn") return PhantomKind::Corn;
  if (name == "sheets") return PhantomKind::Sheets;
  throw InputError("unknown phantom kind '" + name + "' (expected marbles, corn or sheets)");
}

void PhantomSpec::validate() const {
  if (count < 1) throw InputError("phantom count must be >= 1");
  if (!(size_min > 0.0) || size_max < size_min) throw InputError("phantom size range must be positive and ordered");
  if (noise_sigma < 0.0) throw InputError("phantom noise sigma must be >= 0");
  if (artefact_level < 0.0 || artefact_level > 1.0) throw InputError("artefact level must be in [0, 1]");
  if (intensity_jitter < 0.0) throw InputError("intensity jitter must be >= 0");
}

Phantom generate(const PhantomSpec& spec, Dims3 dims) {
  spec.validate();
  if (!dims.valid()) throw InputError("phantom dims must be >= 1");
  if (spec.kind != PhantomKind::Sheets && (dims.nx < 32 || dims.ny < 32 || dims.nz < 32)) {
    throw InputError("marbles/corn phantoms need dims >= 32^3");
  }

  std::mt19937_64 rng(spec.seed);
  Phantom ph{VoxelVolume(dims, static_cast<float>(spec.background)), LabelVolume(dims, 0)};
  std::uniform_real_distribution<double> jitter(-spec.intensity_jitter, spec.intensity_jitter);

  std::vector<Blob> placed;
  int achieved = 0;
  const int budget = 10 * spec.count;
  SheetVoxels sheet;
  for (int attempt = 0; attempt < budget && achieved < spec.count; ++attempt) {
    const auto label = static_cast<std::uint32_t>(achieved + 1);
    if (spec.kind == PhantomKind::Sheets) {
      if (!draw_sheet(rng, dims, spec, sheet)) continue;
      const bool overlaps = std::any_of(sheet.voxels.begin(), sheet.voxels.end(),
                                        [&](Index3 p) { return ph.labels[p] != 0; });
      const float value = static_cast<float>(spec.intensity_mean + jitter(rng));
      if (overlaps) continue;
      for (Index3 p : sheet.voxels) {
        ph.labels[p] = label;
        ph.volume[p] = value;
      }
      ++achieved;
      continue;
    }

    const double size = std::uniform_real_distribution<double>(spec.size_min, spec.size_max)(rng);
    std::array<double, 3> c{};
    const bool corn = spec.kind == PhantomKind::Corn;
    const Rotation rot = corn ? random_rotation(rng) : Rotation{};
    const float value = static_cast<float>(spec.intensity_mean + jitter(rng));
    if (!draw_centre(rng, dims, size, c)) continue;
    if (!inside_container(spec, c, size) || !clear_of(placed, c, size)) continue;
    placed.push_back({c, size});
    if (corn) {
      const std::array<double, 3> axes = {size, size * 2.0 / 3.0, size / 3.0};
      paint(ph.labels, ph.volume, c, size, label, value, [&](double dx, double dy, double dz) {
        double q = 0.0;
        for (int k = 0; k < 3; ++k) {
          // Body-frame coordinate = R^T * offset.
          const double b = rot.m[0][k] * dx + rot.m[1][k] * dy + rot.m[2][k] * dz;
          q += (b * b) / (axes[k] * axes[k]);
        }
        return q <= 1.0;
      });
    } else {
      const double r2 = size * size;
      paint(ph.labels, ph.volume, c, size, label, value,
            [&](double dx, double dy, double dz) { return dx * dx + dy * dy + dz * dz <= r2; });
    }
    ++achieved;
  }
  if (achieved < spec.count) {
    throw PhantomError("placed only " + std::to_string(achieved) + " of " + std::to_string(spec.count) +
                           " entities after " + std::to_string(budget) + " attempts",
                       achieved);
  }

  if (spec.artefact_level > 0.0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int s = 0; s < kStreaks; ++s) {
      const double theta = std::numbers::pi * u01(rng);
      const double px = u01(rng) * double(dims.nx), py = u01(rng) * double(dims.ny);
      const double amp = 80.0 * spec.artefact_level;
      const double nx = -std::sin(theta), ny = std::cos(theta);
      for (std::int64_t y = 0; y < dims.ny; ++y)
        for (std::int64_t x = 0; x < dims.nx; ++x) {
          const double dist = (double(x) - px) * nx + (double(y) - py) * ny;
          const auto add = static_cast<float>(amp * std::exp(-dist * dist / (2.0 * 1.5 * 1.5)));
          if (add < 1e-3f) continue;
          for (std::int64_t z = 0; z < dims.nz; ++z) ph.volume(x, y, z) += add;
        }
    }
  }
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : ph.volume.values()) v = static_cast<float>(v + noise(rng));
  }
  for (auto& v : ph.volume.values()) v = std::clamp(std::floor(v + 0.5f), 0.0f, 255.0f);
  return ph;
}

LabelVolume classical_reference(const VoxelVolume& vol, const ReferenceOptions& opts) {
  const int threshold = otsu_threshold(histogram8(vol.values()));
  BinaryMask3D fg = binarize(vol, threshold);
  if (count_true(fg) == 0) throw InputError("classical_reference: no foreground after Otsu binarisation");
  if (opts.closing_radius > 0) fg = morph(fg, MorphOp::Close, {6, opts.closing_radius});

  const VoxelVolume dist = distance_transform(fg);
  LabelVolume markers = local_maxima_markers(dist, opts.min_separation);
  if (count_true(markers) == 0) markers = connected_components(fg, 6);

  VoxelVolume relief = dist;
  for (auto& v : relief.values()) v = -v;
  LabelVolume labels = watershed(relief, markers, &fg, 6);

  if (opts.label_closing_radius <= 0) return labels;
  const Dims3 d = labels.dims();
  std::uint32_t max_label = 0;
  for (auto v : labels.values()) max_label = std::max(max_label, v);
  std::vector<Index3> lo(max_label + 1, Index3{d.nx, d.ny, d.nz}), hi(max_label + 1, Index3{-1, -1, -1});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t l = labels[i];
    if (!l) continue;
    const Index3 p = labels.index_of(i);
    lo[l] = {std::min(lo[l].x, p.x), std::min(lo[l].y, p.y), std::min(lo[l].z, p.z)};
    hi[l] = {std::max(hi[l].x, p.x), std::max(hi[l].y, p.y), std::max(hi[l].z, p.z)};
  }
  const std::int64_t m = opts.label_closing_radius + 1;
  for (std::uint32_t l = 1; l <= max_label; ++l) {
    if (hi[l].x < 0) continue;
    const Region3D box{{lo[l].x - m, lo[l].y - m, lo[l].z - m},
                       {hi[l].x - lo[l].x + 1 + 2 * m, hi[l].y - lo[l].y + 1 + 2 * m, hi[l].z - lo[l].z + 1 + 2 * m}};
    BinaryMask3D local(box.size, 0);
    for (std::int64_t z = 0; z < box.size.nz; ++z)
      for (std::int64_t y = 0; y < box.size.ny; ++y)
        for (std::int64_t x = 0; x < box.size.nx; ++x)
          local(x, y, z) = labels.value_or(box.origin.x + x, box.origin.y + y, box.origin.z + z, 0) == l;
    const BinaryMask3D closed = morph(local, MorphOp::Close, {6, opts.label_closing_radius});
    for (std::int64_t z = 0; z < box.size.nz; ++z)
      for (std::int64_t y = 0; y < box.size.ny; ++y)
        for (std::int64_t x = 0; x < box.size.nx; ++x) {
          const Index3 p{box.origin.x + x, box.origin.y + y, box.origin.z + z};
          if (closed(x, y, z) && d.contains(p) && labels[p] == 0 && fg[p]) labels[p] = l;
        }
  }
  return labels;
}

}  // namespace voxflood
