#include "doctest.h"
#include "oracles.hpp"
#include "voxflood/voxel_ops.hpp"

using namespace voxflood;

namespace {

std::vector<int> rounded(const VoxelVolume& v) {
  std::vector<int> out;
  for (float f : v.values()) out.push_back(static_cast<int>(std::clamp(std::floor(f + 0.5f), 0.0f, 255.0f)));
  return out;
}

}  // namespace

TEST_CASE("otsu on two adjacent grey levels picks the lower one") {
  VoxelVolume v({4, 1, 1}, 100.0f);
  v[2] = v[3] = 101.0f;
  CHECK(otsu_threshold(histogram8(v.values())) == 100);
}

TEST_CASE("otsu on a bimodal histogram separates the modes") {
  VoxelVolume v({8, 8, 1}, 50.0f);
  for (std::size_t i = 0; i < 32; ++i) v[i] = 200.0f;
  const int t = otsu_threshold(histogram8(v.values()));
  CHECK(t >= 50);
  CHECK(t < 200);
  CHECK(count_true(binarize(v, t)) == 32);
}

TEST_CASE("otsu on a constant volume returns that value and binarises to nothing") {
  VoxelVolume v({3, 3, 3}, 77.0f);
  CHECK(otsu_threshold(histogram8(v.values())) == 77);
  CHECK(count_true(binarize(v, 77)) == 0);
  CHECK_THROWS_AS(otsu_threshold(Histogram256{}), InputError);
}

TEST_CASE("otsu matches the exhaustive scan on random volumes") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims3 d = oracle::random_dims(rng, 3, 8);
    VoxelVolume v(d);
    std::uniform_int_distribution<int> lo(0, 120), hi(130, 255), pick(0, 1);
    std::normal_distribution<double> noise(0.0, 10.0);
    for (auto& f : v.values()) f = static_cast<float>(std::clamp((pick(rng) ? lo(rng) : hi(rng)) + noise(rng), 0.0, 255.0));
    CHECK(otsu_threshold(histogram8(v.values())) == oracle::otsu(rounded(v)));
  }
}

TEST_CASE("connected components match label propagation") {
  std::mt19937_64 rng(5);
  for (int conn : {6, 18, 26}) {
    for (int trial = 0; trial < 25; ++trial) {
      const BinaryMask3D m = oracle::random_mask(rng, oracle::random_dims(rng, 4, 8), 0.4);
      std::uint32_t n = 0;
      const LabelVolume got = connected_components(m, conn, &n);
      const LabelVolume want = oracle::components(m, conn);
      CHECK(got == want);
      CHECK(n == *std::max_element(want.values().begin(), want.values().end()));
    }
  }
}

TEST_CASE("2D components agree with single-slice 3D components") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask3D m = oracle::random_mask(rng, {9, 7, 1}, 0.5);
    Mask2D m2({9, 7});
    for (std::size_t i = 0; i < m.size(); ++i) m2[i] = m[i];
    const LabelImage l4 = connected_components(m2, 4);
    const LabelImage l8 = connected_components(m2, 8);
    const LabelVolume l6 = connected_components(m, 6);
    const LabelVolume l26 = connected_components(m, 26);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(l4[i] == l6[i]);
      CHECK(l8[i] == l26[i]);
    }
  }
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const BinaryMask3D m = oracle::random_mask(rng, oracle::random_dims(rng, 3, 8), 0.8);
    CHECK(distance_transform(m) == oracle::distance(m));
  }
}

TEST_CASE("distance transform counts the volume border as background") {
  const BinaryMask3D full({5, 5, 5}, 1);
  const VoxelVolume d = distance_transform(full);
  CHECK(d(0, 0, 0) == 1.0f);
  CHECK(d(2, 2, 2) == 3.0f);
}

TEST_CASE("erosion and dilation are dual and closing is extensive") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryMask3D m = oracle::random_mask(rng, {7, 6, 5}, 0.5);
    BinaryMask3D inv = m;
    for (auto& v : inv.values()) v = !v;
    const BinaryMask3D er = morph(m, MorphOp::Erode, {6, 1});
    BinaryMask3D dil = morph(inv, MorphOp::Dilate, {6, 1});
    for (auto& v : dil.values()) v = !v;
    CHECK(er == dil);
    const BinaryMask3D cl = morph(m, MorphOp::Close, {26, 1});
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) CHECK(cl[i]);
  }
}

TEST_CASE("keep_component_at isolates the touched component") {
  Mask2D m({7, 3}, 0);
  m(0, 1) = m(1, 1) = 1;
  m(4, 1) = m(5, 1) = m(6, 2) = 1;
  const Mask2D k = keep_component_at(m, Pixel{5, 1}, 8);
  CHECK(count_true(k) == 3);
  CHECK(k(6, 2) == 1);
  CHECK(count_true(keep_component_at(m, Pixel{5, 1}, 4)) == 2);
  CHECK(count_true(keep_component_at(m, Pixel{3, 1}, 8)) == 0);
}

TEST_CASE("median removes an isolated voxel and keeps a block") {
  BinaryMask3D m({9, 9, 9}, 0);
  m(1, 1, 1) = 1;
  for (int z = 4; z < 8; ++z)
    for (int y = 4; y < 8; ++y)
      for (int x = 4; x < 8; ++x) m(x, y, z) = 1;
  const BinaryMask3D f = median_filter(m, 1);
  CHECK(f(1, 1, 1) == 0);
  CHECK(f(5, 5, 5) == 1);
  Mask2D s({5, 5}, 0);
  s(2, 2) = 1;
  CHECK(count_true(median_filter(s, 1)) == 0);
}

TEST_CASE("watershed splits a dumbbell at the neck") {
  BinaryMask3D m({21, 7, 7}, 0);
  for (int z = 0; z < 7; ++z)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 21; ++x) {
        const bool bulb = x < 7 || x >= 14;
        const bool neck = y == 3 && z == 3;
        if (bulb || neck) m(x, y, z) = 1;
      }
  VoxelVolume relief = distance_transform(m);
  for (auto& v : relief.values()) v = -v;
  LabelVolume markers(m.dims(), 0);
  markers(3, 3, 3) = 1;
  markers(17, 3, 3) = 2;
  const LabelVolume ws = watershed(relief, markers, &m, 6);
  CHECK(ws(0, 0, 0) == 1);
  CHECK(ws(20, 6, 6) == 2);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK((ws[i] != 0) == (m[i] != 0));
  CHECK_THROWS_AS(watershed(relief, LabelVolume(m.dims(), 0), &m), InputError);
}

TEST_CASE("local maxima markers") {
  CHECK(count_true(local_maxima_markers(VoxelVolume({6, 6, 6}, 3.0f), 2.0)) == 0);
  BinaryMask3D two({24, 9, 9}, 0);
  for (int z = 0; z < 9; ++z)
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 24; ++x) {
        const double a = std::hypot(x - 5, y - 4, z - 4), b = std::hypot(x - 18, y - 4, z - 4);
        if (a <= 4 || b <= 4) two(x, y, z) = 1;
      }
  const LabelVolume mk = local_maxima_markers(distance_transform(two), 3.0);
  CHECK(*std::max_element(mk.values().begin(), mk.values().end()) == 2);
}

TEST_CASE("fixed foreground threshold") {
  CHECK(fixed_threshold(0.2) == 51.0);
  CHECK(fixed_threshold(0.5) == 127.0);
  VoxelVolume v({4, 4, 4}, 10.0f);
  v(1, 1, 1) = 200.0f;
  ForegroundOptions o;
  o.strategy = ForegroundStrategy::Fixed;
  o.threshold_fraction = 0.2;
  o.closing_radius = 0;
  CHECK(count_true(estimate_foreground(v, o)) == 1);
}
