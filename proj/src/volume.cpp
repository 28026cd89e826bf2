#include "voxflood/volume.hpp"

#include <algorithm>
#include <cmath>

namespace voxflood {

std::string to_string(Index3 p) {
  return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + "," + std::to_string(p.z) + ")";
}

std::string to_string(Dims3 d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "?";
}

Axis parse_axis(const std::string& name) {
  if (name == "x" || name == "X") return Axis::X;
  if (name == "y" || name == "Y") return Axis::Y;
  if (name == "z" || name == "Z") return Axis::Z;
  throw InputError("invalid axis '" + name + "'");
}

PlaneAxes plane_axes(Axis a) {
  switch (a) {
    case Axis::X: return {1, 2, 0};
    case Axis::Y: return {0, 2, 1};
    case Axis::Z: return {0, 1, 2};
  }
  throw InputError("invalid axis");
}

bool plane_in_bounds(Dims3 vol, Index3 center, Axis axis, Dims2 out) {
  const PlaneAxes pa = plane_axes(axis);
  const std::int64_t n = component(center, pa.normal);
  if (n < 0 || n >= extent(vol, pa.normal)) return false;
  const std::int64_t u0 = component(center, pa.u) - out.w / 2;
  const std::int64_t v0 = component(center, pa.v) - out.h / 2;
  return u0 >= 0 && v0 >= 0 && u0 + out.w <= extent(vol, pa.u) && v0 + out.h <= extent(vol, pa.v);
}

Dims3 enframed_dims(Dims3 vol, std::int64_t border) {
  if (border < 0) throw InputError("enframe border must be >= 0");
  return {vol.nx + 2 * border, vol.ny + 2 * border, vol.nz + 2 * border};
}

Region3D centered_region(Index3 center, std::int64_t side) {
  const std::int64_t h = side / 2;
  return {{center.x - h, center.y - h, center.z - h}, {side, side, side}};
}

Slice2D extract_centered_slice(const VoxelVolume& vol, Index3 center, Axis axis, Dims2 out,
                               float fill) {
  if (static_cast<unsigned>(axis) > 2) throw InputError("invalid slice axis");
  if (!vol.dims().contains(center)) {
    throw InputError("slice centre " + to_string(center) + " outside volume " +
                     to_string(vol.dims()));
  }
  Slice2D s;
  s.image = extract_plane(vol, center, axis, out, fill);
  s.axis = axis;
  s.index = component(center, plane_axes(axis).normal);
  s.center = {out.w / 2, out.h / 2};
  return s;
}

Image2D normalize_image(const Image2D& img) {
  const auto [lo_it, hi_it] = std::minmax_element(img.values().begin(), img.values().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Image2D out(img.dims(), 0.0f);
  if (!(hi > lo)) return out;
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<float>(std::floor((img[i] - lo) * scale + 0.5));
  }
  return out;
}

Slice2D normalize_slice(const Slice2D& s) {
  Slice2D out = s;
  out.image = normalize_image(s.image);
  return out;
}

RgbImage to_three_channel(const Image2D& img) {
  RgbImage out;
  out.width = img.width();
  out.height = img.height();
  out.rgb.resize(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = img[i];
    if (!(v >= 0.0f && v <= 255.0f)) {
      throw InputError("grey value " + std::to_string(v) + " outside [0, 255]");
    }
    const auto b = static_cast<std::uint8_t>(std::floor(v + 0.5f));
    out.rgb[3 * i] = b;
    out.rgb[3 * i + 1] = b;
    out.rgb[3 * i + 2] = b;
  }
  return out;
}

const char* slice_state_name(SliceState s) {
  switch (s) {
    case SliceState::Normal: return "normal";
    case SliceState::Empty: return "empty";
    case SliceState::Outlier: return "outlier";
  }
  return "?";
}

SliceState detect_empty_or_outlier(const Image2D& img, std::size_t min_nonzero) {
  const float lo = *std::min_element(img.values().begin(), img.values().end());
  std::size_t above = 0;
  for (float v : img.values()) above += (v != lo);
  if (above == 0) return SliceState::Empty;
  if (above < min_nonzero) return SliceState::Outlier;
  return SliceState::Normal;
}

}  // namespace voxflood
