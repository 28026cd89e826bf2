#pragma once

#include <cstddef>

#include "voxflood/grid.hpp"

namespace voxflood {

struct Overlap {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t intersection = 0;
};

template <class G>
Overlap overlap(const G& a, const G& b) {
  if (a.dims() != b.dims()) throw InputError("mask dims differ");
  Overlap o;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const bool x = av[i] != 0, y = bv[i] != 0;
    o.a += x;
    o.b += y;
    o.intersection += x && y;
  }
  return o;
}

// |a n b| / |a u b|; two empty masks give 1.
template <class G>
double iou(const G& a, const G& b) {
  const Overlap o = overlap(a, b);
  const std::size_t uni = o.a + o.b - o.intersection;
  return uni == 0 ? 1.0 : double(o.intersection) / double(uni);
}

// 1 - 2|p n t| / (|p| + |t|); two empty masks give 0.
template <class G>
double dice_loss(const G& pred, const G& target) {
  const Overlap o = overlap(pred, target);
  const std::size_t sum = o.a + o.b;
  return sum == 0 ? 0.0 : 1.0 - 2.0 * double(o.intersection) / double(sum);
}

}  // namespace voxflood
