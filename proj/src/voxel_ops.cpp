#include "voxflood/voxel_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace voxflood {
namespace {

using boost::multiprecision::int256_t;

struct Offset3 {
  int dx, dy, dz;
};

std::vector<Offset3> neighbourhood3(int connectivity) {
  if (connectivity != 6 && connectivity != 18 && connectivity != 26) {
    throw InputError("3D connectivity must be 6, 18 or 26, got " + std::to_string(connectivity));
  }
  std::vector<Offset3> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int n = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (n == 0) continue;
        if (connectivity == 6 && n != 1) continue;
        if (connectivity == 18 && n == 3) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

std::vector<Pixel> neighbourhood2(int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw InputError("2D connectivity must be 4 or 8, got " + std::to_string(connectivity));
  }
  std::vector<Pixel> out;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      if (connectivity == 4 && dx != 0 && dy != 0) continue;
      out.push_back({dx, dy});
    }
  return out;
}

BinaryMask3D unit_step(const BinaryMask3D& in, const std::vector<Offset3>& nb, bool dilate) {
  const Dims3 d = in.dims();
  BinaryMask3D out(d);
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x) {
        std::uint8_t v = in(x, y, z);
        if (dilate ? v == 0 : v != 0) {
          for (const auto& o : nb) {
            const std::int64_t ax = x + o.dx, ay = y + o.dy, az = z + o.dz;
            if (!d.contains(ax, ay, az)) continue;
            if (dilate ? in(ax, ay, az) != 0 : in(ax, ay, az) == 0) {
              v = dilate ? 1 : 0;
              break;
            }
          }
        }
        out(x, y, z) = v ? 1 : 0;
      }
  return out;
}

BinaryMask3D repeat(const BinaryMask3D& m, const std::vector<Offset3>& nb, int radius, bool dilate) {
  BinaryMask3D out = m;
  for (int i = 0; i < radius; ++i) out = unit_step(out, nb, dilate);
  return out;
}

// 1D squared distance transform (lower envelope of parabolas) with an
// unset site just outside each end of the line.
void edt_line(std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
              std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {  // k == 0: new parabola dominates everywhere
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    out[q] = dq * dq + f[v[k]];
  }
}

// Runs edt_line over every line of `g` along `axis`, padding each line with
// a zero site at both ends.
void edt_pass(std::vector<double>& g, Dims3 d, int axis) {
  const std::int64_t n = axis == 0 ? d.nx : axis == 1 ? d.ny : d.nz;
  const std::int64_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
  std::vector<double> f(n + 2), out(n + 2), zz(n + 3);
  std::vector<int> vv(n + 2);
  const std::int64_t total = static_cast<std::int64_t>(d.count());
  for (std::int64_t base = 0; base < total; ++base) {
    // `base` must be the first element of a line along `axis`.
    const std::int64_t coord = (base / stride) % n;
    if (coord != 0) continue;
    f[0] = 0.0;
    f[n + 1] = 0.0;
    for (std::int64_t i = 0; i < n; ++i) f[i + 1] = g[base + i * stride];
    edt_line(f, out, vv, zz);
    for (std::int64_t i = 0; i < n; ++i) g[base + i * stride] = out[i + 1];
  }
}

}  // namespace

Histogram256 histogram8(std::span<const float> values) {
  Histogram256 h{};
  for (float v : values) {
    const float c = std::clamp(std::floor(v + 0.5f), 0.0f, 255.0f);
    ++h[static_cast<std::size_t>(c)];
  }
  return h;
}

int otsu_threshold(const Histogram256& histogram) {
  int256_t total = 0, weighted = 0;
  int first = -1;
  for (int i = 0; i < 256; ++i) {
    total += histogram[i];
    weighted += int256_t(histogram[i]) * i;
    if (histogram[i] && first < 0) first = i;
  }
  if (total == 0) throw InputError("otsu_threshold on an empty histogram");

  // Between-class variance is proportional to (N*S0 - n0*S)^2 / (n0*n1).
  int best = -1;
  int256_t best_num = 0, best_den = 1;
  int256_t n0 = 0, s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += histogram[t];
    s0 += int256_t(histogram[t]) * t;
    const int256_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const int256_t diff = total * s0 - n0 * weighted;
    const int256_t num = diff * diff;
    const int256_t den = n0 * n1;
    if (best < 0 || num * best_den > best_num * den) {
      best = t;
      best_num = num;
      best_den = den;
    }
  }
  return best < 0 ? first : best;
}

BinaryMask3D binarize(const VoxelVolume& vol, double threshold) {
  BinaryMask3D out(vol.dims());
  for (std::size_t i = 0; i < vol.size(); ++i) out[i] = vol[i] > threshold ? 1 : 0;
  return out;
}

Mask2D binarize(const Image2D& img, double threshold) {
  Mask2D out(img.dims());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] > threshold ? 1 : 0;
  return out;
}

BinaryMask3D morph(const BinaryMask3D& mask, MorphOp op, StructuringElement se) {
  if (se.radius < 0) throw InputError("structuring element radius must be >= 0");
  const auto nb = neighbourhood3(se.connectivity);
  switch (op) {
    case MorphOp::Erode: return repeat(mask, nb, se.radius, false);
    case MorphOp::Dilate: return repeat(mask, nb, se.radius, true);
    case MorphOp::Open: return repeat(repeat(mask, nb, se.radius, false), nb, se.radius, true);
    case MorphOp::Close: return repeat(repeat(mask, nb, se.radius, true), nb, se.radius, false);
  }
  return mask;
}

LabelVolume connected_components(const BinaryMask3D& mask, int connectivity, std::uint32_t* count) {
  const auto nb = neighbourhood3(connectivity);
  const Dims3 d = mask.dims();
  LabelVolume labels(d, 0);
  std::uint32_t next = 0;
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || labels[i]) continue;
    ++next;
    labels[i] = next;
    queue.assign(1, i);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const Index3 p = mask.index_of(queue[head]);
      for (const auto& o : nb) {
        const std::int64_t x = p.x + o.dx, y = p.y + o.dy, z = p.z + o.dz;
        if (!d.contains(x, y, z)) continue;
        const std::size_t j = mask.linear(x, y, z);
        if (mask[j] && !labels[j]) {
          labels[j] = next;
          queue.push_back(j);
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

LabelImage connected_components(const Mask2D& mask, int connectivity, std::uint32_t* count) {
  const auto nb = neighbourhood2(connectivity);
  const Dims2 d = mask.dims();
  LabelImage labels(d, 0);
  std::uint32_t next = 0;
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || labels[i]) continue;
    ++next;
    labels[i] = next;
    queue.assign(1, i);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto li = static_cast<std::int64_t>(queue[head]);
      const std::int64_t px = li % d.w, py = li / d.w;
      for (const auto& o : nb) {
        const std::int64_t x = px + o.x, y = py + o.y;
        if (!d.contains(x, y)) continue;
        const std::size_t j = mask.linear(x, y);
        if (mask[j] && !labels[j]) {
          labels[j] = next;
          queue.push_back(j);
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

BinaryMask3D keep_component_at(const BinaryMask3D& mask, Index3 point, int connectivity) {
  const Dims3 d = mask.dims();
  if (!d.contains(point)) throw InputError("keep_component_at: point " + to_string(point) + " out of bounds");
  const auto nb = neighbourhood3(connectivity);
  BinaryMask3D out(d, 0);
  if (!mask[point]) return out;
  std::vector<Index3> queue{point};
  out[point] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Index3 p = queue[head];
    for (const auto& o : nb) {
      const Index3 q{p.x + o.dx, p.y + o.dy, p.z + o.dz};
      if (d.contains(q) && mask[q] && !out[q]) {
        out[q] = 1;
        queue.push_back(q);
      }
    }
  }
  return out;
}

Mask2D keep_component_at(const Mask2D& mask, Pixel point, int connectivity) {
  const Dims2 d = mask.dims();
  if (!d.contains(point)) throw InputError("keep_component_at: pixel out of bounds");
  const auto nb = neighbourhood2(connectivity);
  Mask2D out(d, 0);
  if (!mask(point.x, point.y)) return out;
  std::vector<Pixel> queue{point};
  out(point.x, point.y) = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Pixel p = queue[head];
    for (const auto& o : nb) {
      const std::int64_t x = p.x + o.x, y = p.y + o.y;
      if (d.contains(x, y) && mask(x, y) && !out(x, y)) {
        out(x, y) = 1;
        queue.push_back({x, y});
      }
    }
  }
  return out;
}

Mask2D median_filter(const Mask2D& mask, int radius) {
  if (radius < 0) throw InputError("median radius must be >= 0");
  if (radius == 0) return mask;
  const Dims2 d = mask.dims();
  const int side = 2 * radius + 1;
  const int majority = side * side / 2 + 1;
  Mask2D out(d);
  for (std::int64_t y = 0; y < d.h; ++y)
    for (std::int64_t x = 0; x < d.w; ++x) {
      int on = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const std::int64_t yy = std::clamp<std::int64_t>(y + dy, 0, d.h - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
          on += mask(std::clamp<std::int64_t>(x + dx, 0, d.w - 1), yy) != 0;
        }
      }
      out(x, y) = on >= majority ? 1 : 0;
    }
  return out;
}

BinaryMask3D median_filter(const BinaryMask3D& mask, int radius) {
  if (radius < 0) throw InputError("median radius must be >= 0");
  if (radius == 0) return mask;
  const Dims3 d = mask.dims();
  const int side = 2 * radius + 1;
  const int majority = side * side * side / 2 + 1;
  BinaryMask3D out(d);
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x) {
        int on = 0;
        for (int dz = -radius; dz <= radius; ++dz) {
          const std::int64_t zz = std::clamp<std::int64_t>(z + dz, 0, d.nz - 1);
          for (int dy = -radius; dy <= radius; ++dy) {
            const std::int64_t yy = std::clamp<std::int64_t>(y + dy, 0, d.ny - 1);
            for (int dx = -radius; dx <= radius; ++dx) {
              on += mask(std::clamp<std::int64_t>(x + dx, 0, d.nx - 1), yy, zz) != 0;
            }
          }
        }
        out(x, y, z) = on >= majority ? 1 : 0;
      }
  return out;
}

Image2D median_filter(const Image2D& img, int radius) {
  if (radius < 0) throw InputError("median radius must be >= 0");
  if (radius == 0) return img;
  const Dims2 d = img.dims();
  Image2D out(d);
  std::vector<float> window;
  for (std::int64_t y = 0; y < d.h; ++y)
    for (std::int64_t x = 0; x < d.w; ++x) {
      window.clear();
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          window.push_back(img(std::clamp<std::int64_t>(x + dx, 0, d.w - 1),
                               std::clamp<std::int64_t>(y + dy, 0, d.h - 1)));
      auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      out(x, y) = *mid;
    }
  return out;
}

VoxelVolume distance_transform(const BinaryMask3D& mask) {
  const Dims3 d = mask.dims();
  // Larger than any squared distance inside a volume, small enough to keep
  // the envelope arithmetic finite.
  const double unreached = 1e30;
  std::vector<double> g(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) g[i] = mask[i] ? unreached : 0.0;
  edt_pass(g, d, 0);
  edt_pass(g, d, 1);
  edt_pass(g, d, 2);
  VoxelVolume out(d, 0.0f);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<float>(std::sqrt(g[i]));
  return out;
}

LabelVolume watershed(const VoxelVolume& relief, const LabelVolume& markers,
                      const BinaryMask3D* support, int connectivity) {
  const Dims3 d = relief.dims();
  if (markers.dims() != d) throw InputError("watershed: markers and relief dims differ");
  if (support && support->dims() != d) throw InputError("watershed: support dims differ");
  const auto nb = neighbourhood3(connectivity);

  using Entry = std::tuple<float, std::uint32_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  LabelVolume out(d, 0);
  bool any = false;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (markers[i] == 0) continue;
    any = true;
    out[i] = markers[i];
    heap.emplace(relief[i], markers[i], i);
  }
  if (!any) throw InputError("watershed needs at least one marker");

  while (!heap.empty()) {
    const auto [level, label, i] = heap.top();
    heap.pop();
    const Index3 p = out.index_of(i);
    for (const auto& o : nb) {
      const std::int64_t x = p.x + o.dx, y = p.y + o.dy, z = p.z + o.dz;
      if (!d.contains(x, y, z)) continue;
      const std::size_t j = out.linear(x, y, z);
      if (out[j] != 0) continue;
      if (support && !(*support)[j]) continue;
      out[j] = label;
      heap.emplace(std::max(level, relief[j]), label, j);
    }
  }
  return out;
}

LabelVolume local_maxima_markers(const VoxelVolume& dist, double min_separation) {
  if (min_separation < 1.0) throw InputError("min_separation must be >= 1");
  const Dims3 d = dist.dims();
  const auto nb = neighbourhood3(26);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const float v = dist[i];
    if (!(v > 0.0f)) continue;
    const Index3 p = dist.index_of(i);
    bool is_max = true, strictly_above_one = false;
    for (const auto& o : nb) {
      const std::int64_t x = p.x + o.dx, y = p.y + o.dy, z = p.z + o.dz;
      if (!d.contains(x, y, z)) continue;
      const float w = dist(x, y, z);
      if (w > v) {
        is_max = false;
        break;
      }
      if (w < v) strictly_above_one = true;
    }
    if (is_max && strictly_above_one) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });

  struct Accepted {
    Index3 p;
    double radius;
  };
  std::vector<Accepted> accepted;
  LabelVolume markers(d, 0);
  const double sep2 = min_separation * min_separation;
  for (std::size_t i : candidates) {
    const Index3 p = dist.index_of(i);
    bool keep = true;
    for (const auto& a : accepted) {
      const double dx = double(p.x - a.p.x), dy = double(p.y - a.p.y), dz = double(p.z - a.p.z);
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (r2 < sep2 || r2 < a.radius * a.radius) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    accepted.push_back({p, dist[i]});
    markers[i] = static_cast<std::uint32_t>(accepted.size());
  }
  return markers;
}

double fixed_threshold(double fraction) {
  if (fraction < 0.0 || fraction > 1.0) throw InputError("foreground threshold fraction must be in [0, 1]");
  return std::floor(fraction * 255.0 + 1e-9);
}

double foreground_threshold(const VoxelVolume& vol, const ForegroundOptions& opts) {
  if (opts.strategy == ForegroundStrategy::Fixed) return fixed_threshold(opts.threshold_fraction);
  return otsu_threshold(histogram8(vol.values()));
}

BinaryMask3D estimate_foreground(const VoxelVolume& vol, const ForegroundOptions& opts) {
  BinaryMask3D fg = binarize(vol, foreground_threshold(vol, opts));
  if (opts.closing_radius > 0) {
    fg = morph(fg, MorphOp::Close, {opts.connectivity, opts.closing_radius});
  }
  return fg;
}

}  // namespace voxflood
