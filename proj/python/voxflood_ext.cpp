#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstring>

#include "voxflood/adapter.hpp"
#include "voxflood/config.hpp"
#include "voxflood/evaluation.hpp"
#include "voxflood/phantom.hpp"
#include "voxflood/protocol.hpp"
#include "voxflood/scheduler.hpp"
#include "voxflood/voxel_ops.hpp"

namespace py = pybind11;
using namespace voxflood;

namespace {

// Arrays are (nz, ny, nx) C-order, which is the x-fastest grid layout.
template <class T>
Grid3<T> to_grid(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw InputError("expected a 3D array");
  const Dims3 d{a.shape(2), a.shape(1), a.shape(0)};
  std::vector<T> data(a.data(), a.data() + a.size());
  return Grid3<T>(d, std::move(data));
}

template <class T>
py::array_t<T> to_array(const Grid3<T>& g) {
  const Dims3& d = g.dims();
  py::array_t<T> out({d.nz, d.ny, d.nx});
  std::memcpy(out.mutable_data(), g.storage().data(), g.size() * sizeof(T));
  return out;
}

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

py::tuple generate_phantom(const std::string& kind, std::array<std::int64_t, 3> shape, int count, double size_min,
                           double size_max, double noise_sigma, std::uint64_t seed) {
  PhantomSpec spec;
  spec.kind = parse_phantom_kind(kind);
  spec.count = count;
  spec.size_min = size_min;
  spec.size_max = size_max;
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;
  Phantom p;
  {
    py::gil_scoped_release release;
    p = generate(spec, {shape[2], shape[1], shape[0]});
  }
  return py::make_tuple(to_array(p.volume), to_array(p.labels));
}

py::tuple segment(const FloatArray& volume, const std::string& config) {
  const RunConfig cfg = parse_config(config, "<python>");
  const VoxelVolume vol = to_grid<float>(volume);
  const auto segmenter = make_segmenter(backend_endpoint(cfg), cfg.backend.oracle);
  Journal journal;
  RunSummary summary;
  {
    py::gil_scoped_release release;
    summary = run_all(vol, *segmenter, cfg.adapter, cfg.scheduler, &journal);
  }
  return py::make_tuple(to_array(summary.labels), journal.text());
}

py::dict evaluate(const LabelArray& reference, const LabelArray& predicted) {
  const CorrelationMatrix m = correlation_matrix(to_grid<std::uint32_t>(reference), to_grid<std::uint32_t>(predicted));
  py::list assigned;
  for (const auto& c : m.assigned_column) assigned.append(c ? py::cast(*c) : py::none());
  py::dict d;
  d["ref_ids"] = m.ref_ids;
  d["det_ids"] = m.det_ids;
  d["matrix"] = m.values;
  d["assigned_column"] = assigned;
  d["assigned_rows"] = m.assigned_rows();
  d["best_iou"] = best_diagonal_mean_iou(m);
  d["summary"] = summary_line(m);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Volumetric instance segmentation by tile-wise flood filling over a 2D slice segmenter.";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  m.def("generate_phantom", &generate_phantom, "Synthetic phantom as (volume float32, labels uint32).",
        py::arg("kind") = "marbles", py::arg("shape") = std::array<std::int64_t, 3>{128, 128, 128},
        py::arg("count") = 5, py::arg("size_min") = 8.0, py::arg("size_max") = 12.0, py::arg("noise_sigma") = 0.0,
        py::arg("seed") = 42);

  m.def(
      "otsu_threshold", [](const FloatArray& v) { return otsu_threshold(histogram8(to_grid<float>(v).values())); },
      py::arg("volume"));
  m.def(
      "connected_components",
      [](const MaskArray& mask, int connectivity) {
        return to_array(connected_components(to_grid<std::uint8_t>(mask), connectivity));
      },
      py::arg("mask"), py::arg("connectivity") = 26);
  m.def(
      "distance_transform", [](const MaskArray& mask) { return to_array(distance_transform(to_grid<std::uint8_t>(mask))); },
      py::arg("mask"));
  m.def(
      "classical_reference", [](const FloatArray& v) { return to_array(classical_reference(to_grid<float>(v))); },
      py::arg("volume"));
  m.def(
      "merge_stacks",
      [](const MaskArray& x, const MaskArray& y, const MaskArray& z, int min_count) {
        const std::array<BinaryMask3D, 3> s{to_grid<std::uint8_t>(x), to_grid<std::uint8_t>(y),
                                            to_grid<std::uint8_t>(z)};
        return to_array(merge_stacks(s, min_count));
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("min_count"));

  m.def("segment", &segment, "Segment a volume; `config` is TOML text. Returns (labels, journal).",
        py::arg("volume"), py::arg("config") = "preset = \"vitb48\"\n");
  m.def("evaluate", &evaluate, py::arg("reference"), py::arg("predicted"));
  m.def("presets", &preset_names);

  m.def(
      "base64_encode",
      [](const py::bytes& b) {
        const std::string s = b;
        return protocol::base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      },
      py::arg("data"));
  m.def(
      "base64_decode",
      [](const std::string& text) {
        const auto v = protocol::base64_decode(text);
        return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
      },
      py::arg("text"));
}
