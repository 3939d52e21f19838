// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "lodrank/config.hpp"
#include "lodrank/dataset.hpp"
#include "lodrank/experiment.hpp"
#include "lodrank/io.hpp"
#include "lodrank/model.hpp"
#include "lodrank/pruner.hpp"
#include "lodrank/rng.hpp"
#include "lodrank/trainer.hpp"

namespace py = pybind11;
using namespace lodrank;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.raw(), t.raw() + t.size(), out.mutable_data());
  return out;
}

Dataset to_dataset(const Array& images, const std::vector<std::int32_t>& labels) {
  Dataset d;
  d.inputs = to_tensor(images);
  d.labels = labels;
  if (d.size() != d.labels.size()) throw ContractError("images and labels differ in length");
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of lodrank";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<Model>(m, "Model")
      .def_property_readonly("profile", &Model::profile)
      .def_property_readonly("total_rank", &Model::total_rank)
      .def_property_readonly("num_layers", [](const Model& self) { return self.layers.size(); })
      .def_property_readonly("max_ranks",
                             [](const Model& self) {
                               std::vector<std::size_t> out;
                               for (const auto& l : self.layers) out.push_back(l.r_max);
                               return out;
                             })
      .def("param_count", [](const Model& self) { return param_count(self); })
      .def("mac_count", [](const Model& self) { return mac_count(self); })
      .def(
          "forward", [](const Model& self, const Array& x) { return to_array(model_forward(self, to_tensor(x))); },
          py::arg("inputs"), "Logits for inputs shaped (N, 28, 28, 1).")
      .def(
          "evaluate",
          [](const Model& self, const Array& images, const std::vector<std::int32_t>& labels) {
            const EvalResult r = evaluate(self, to_dataset(images, labels));
            return py::dict(py::arg("accuracy") = r.accuracy, py::arg("loss") = r.loss);
          },
          py::arg("images"), py::arg("labels"))
      .def(
          "with_ranks", [](const Model& self, const RankProfile& p) { return apply_rank_profile(self, p); },
          py::arg("profile"), "Copy truncated to the given per-layer ranks.")
      .def(
          "save", [](const Model& self, const std::string& path) { save_checkpoint(self, path); },
          py::arg("path"));

  m.def(
      "make_lenet", [](std::uint64_t seed, bool factorized) {
        Rng init = Rng(seed).derive("init");
        return make_lenet(init, factorized);
      },
      py::arg("seed") = 1, py::arg("factorized") = true);
  m.def(
      "load_checkpoint", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"));

  m.def(
      "greedy_prune",
      [](const Model& model, const Array& images, const std::vector<std::int32_t>& labels,
         std::optional<std::size_t> max_macs, std::optional<std::size_t> max_params,
         std::optional<double> min_acc, double step_frac) {
        const Dataset eval = to_dataset(images, labels);
        PruneTarget target{max_macs, max_params, min_acc};
        PruneTrace trace = greedy_prune(model, eval, target, step_frac);
        py::list points;
        for (const auto& p : trace.points) {
          points.append(py::dict(py::arg("iter") = p.iter, py::arg("layer_changed") = p.layer_changed,
                                 py::arg("ranks") = p.ranks, py::arg("est_loss") = p.est_loss,
                                 py::arg("macs") = p.macs, py::arg("params") = p.params));
        }
        return py::dict(py::arg("points") = points, py::arg("target_met") = trace.target_met,
                        py::arg("exhausted") = trace.exhausted,
                        py::arg("model") = std::move(trace.final_model));
      },
      py::arg("model"), py::arg("images"), py::arg("labels"), py::kw_only(),
      py::arg("max_macs") = py::none(), py::arg("max_params") = py::none(),
      py::arg("min_acc") = py::none(), py::arg("step_frac") = 0.1);

  m.def(
      "format_config_text", [](const std::string& text) { return format_config(parse_config(text)); },
      py::arg("text"), "Validates an INI config and returns its canonical form.");
  m.def("config_reference", &config_reference);
  m.def(
      "_run_config_text",
      [](const std::string& text) {
        ExperimentConfig config = parse_config(text);
        py::gil_scoped_release release;
        return run_experiment(std::move(config)).dump();
      },
      py::arg("text"));
}
