#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "voxflood/grid.hpp"

namespace voxflood {

enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

inline constexpr std::array<Axis, 3> kAllAxes = {Axis::X, Axis::Y, Axis::Z};

const char* axis_name(Axis a);
Axis parse_axis(const std::string& name);

// In-plane axes of a slice orthogonal to `a`: Z -> (x, y), Y -> (x, z), X -> (y, z).
struct PlaneAxes {
  int u;
  int v;
  int normal;
};
PlaneAxes plane_axes(Axis a);

inline std::int64_t component(const Index3& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }
inline std::int64_t& component(Index3& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }
inline std::int64_t extent(Dims3 d, int axis) { return axis == 0 ? d.nx : axis == 1 ? d.ny : d.nz; }

struct Slice2D {
  Image2D image;
  Axis axis = Axis::Z;
  std::int64_t index = 0;  // position along `axis` in the source volume
  Pixel center;            // pixel the originating seed maps to
};

struct Region3D {
  Index3 origin;
  Dims3 size;

  bool contains(Index3 p) const {
    return size.contains(p.x - origin.x, p.y - origin.y, p.z - origin.z);
  }
};

// Cube of side `side` centred on `center`: origin = center - side/2.
Region3D centered_region(Index3 center, std::int64_t side);

template <class T>
Grid3<T> enframe(const Grid3<T>& vol, std::int64_t border, T fill) {
  if (border < 0) throw InputError("enframe border must be >= 0");
  if (border == 0) return vol;
  const Dims3 d = vol.dims();
  Grid3<T> out({d.nx + 2 * border, d.ny + 2 * border, d.nz + 2 * border}, fill);
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x)
        out(x + border, y + border, z + border) = vol(x, y, z);
  return out;
}

// Copy of `region`; voxels outside `vol` take `fill`.
template <class T>
Grid3<T> crop(const Grid3<T>& vol, const Region3D& region, T fill) {
  Grid3<T> out(region.size, fill);
  const Dims3 d = vol.dims();
  const Dims3 s = region.size;
  for (std::int64_t z = 0; z < s.nz; ++z) {
    const std::int64_t vz = region.origin.z + z;
    if (vz < 0 || vz >= d.nz) continue;
    for (std::int64_t y = 0; y < s.ny; ++y) {
      const std::int64_t vy = region.origin.y + y;
      if (vy < 0 || vy >= d.ny) continue;
      for (std::int64_t x = 0; x < s.nx; ++x) {
        const std::int64_t vx = region.origin.x + x;
        if (vx < 0 || vx >= d.nx) continue;
        out(x, y, z) = vol(vx, vy, vz);
      }
    }
  }
  return out;
}

template <class T>
Grid3<T> extract_tile(const Grid3<T>& vol, Index3 center, std::int64_t side, T fill) {
  if (side < 1) throw InputError("tile side must be >= 1");
  return crop(vol, centered_region(center, side), fill);
}

// Axis-orthogonal plane through `center`, cropped/padded to `out` so that the
// centre voxel lands on pixel (w/2, h/2).
template <class T>
Grid2<T> extract_plane(const Grid3<T>& vol, Index3 center, Axis axis, Dims2 out, T fill) {
  const PlaneAxes pa = plane_axes(axis);
  Grid2<T> img(out, fill);
  const Dims3 d = vol.dims();
  Index3 p = center;
  const std::int64_t u0 = component(center, pa.u) - out.w / 2;
  const std::int64_t v0 = component(center, pa.v) - out.h / 2;
  for (std::int64_t j = 0; j < out.h; ++j) {
    component(p, pa.v) = v0 + j;
    for (std::int64_t i = 0; i < out.w; ++i) {
      component(p, pa.u) = u0 + i;
      if (d.contains(p)) img(i, j) = vol[p];
    }
  }
  return img;
}

// True when extract_plane(center, axis, out) reads no voxel outside `vol`.
bool plane_in_bounds(Dims3 vol, Index3 center, Axis axis, Dims2 out);

Dims3 enframed_dims(Dims3 vol, std::int64_t border);

Slice2D extract_centered_slice(const VoxelVolume& vol, Index3 center, Axis axis, Dims2 out,
                               float fill = 0.0f);

// Pads/crops `img` onto a canvas of `canvas` dims so that pixel `anchor` of
// the input lands on the canvas centre (w/2, h/2).
template <class T>
Grid2<T> place_on_canvas(const Grid2<T>& img, Pixel anchor, Dims2 canvas, T fill) {
  Grid2<T> out(canvas, fill);
  const std::int64_t ox = canvas.w / 2 - anchor.x;
  const std::int64_t oy = canvas.h / 2 - anchor.y;
  for (std::int64_t y = 0; y < img.height(); ++y) {
    const std::int64_t cy = y + oy;
    if (cy < 0 || cy >= canvas.h) continue;
    for (std::int64_t x = 0; x < img.width(); ++x) {
      const std::int64_t cx = x + ox;
      if (cx < 0 || cx >= canvas.w) continue;
      out(cx, cy) = img(x, y);
    }
  }
  return out;
}

// Inverse of place_on_canvas: recovers the `dims`-sized window.
template <class T>
Grid2<T> take_from_canvas(const Grid2<T>& canvas, Pixel anchor, Dims2 dims, T fill) {
  Grid2<T> out(dims, fill);
  const std::int64_t ox = canvas.width() / 2 - anchor.x;
  const std::int64_t oy = canvas.height() / 2 - anchor.y;
  for (std::int64_t y = 0; y < dims.h; ++y)
    for (std::int64_t x = 0; x < dims.w; ++x)
      if (canvas.dims().contains(x + ox, y + oy)) out(x, y) = canvas(x + ox, y + oy);
  return out;
}

// Linear map of [min, max] onto [0, 255], rounded half-up to integers.
// Constant slices map to all zeros.
Slice2D normalize_slice(const Slice2D& s);
Image2D normalize_image(const Image2D& img);

// Interleaved 8-bit RGB, row-major, x fastest.
struct RgbImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> rgb;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

RgbImage to_three_channel(const Image2D& img);
inline RgbImage to_three_channel(const Slice2D& s) { return to_three_channel(s.image); }

enum class SliceState { Normal, Empty, Outlier };
const char* slice_state_name(SliceState s);

// Empty iff every value is equal; outlier iff fewer than `min_nonzero` pixels
// differ from the slice minimum. The outlier rule is a configurable stand-in.
SliceState detect_empty_or_outlier(const Image2D& img, std::size_t min_nonzero);
inline SliceState detect_empty_or_outlier(const Slice2D& s, std::size_t min_nonzero) {
  return detect_empty_or_outlier(s.image, min_nonzero);
}

}  // namespace voxflood
