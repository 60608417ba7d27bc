#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "dghl/error.hpp"
#include "dghl/metrics.hpp"
#include "dghl/pipeline.hpp"
#include "dghl/robustness.hpp"
#include "dghl/synth.hpp"

namespace py = pybind11;
using namespace dghl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (T, m) array with NaN for missing entries -> m x T frame plus mask.
SeriesFrame to_frame(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array of shape (T, m)");
  const std::size_t T = a.shape(0), m = a.shape(1);
  auto r = a.unchecked<2>();
  SeriesFrame f;
  f.values = Tensor({m, T});
  f.mask = Mask(m, T, true);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < m; ++i) {
      const double v = r(t, i);
      if (std::isnan(v)) {
        f.mask.set(i, t, false);
      } else {
        f.values.at(i, t) = v;
      }
    }
  f.validate();
  return f;
}

Array from_frame(const SeriesFrame& f) {
  const std::size_t m = f.n_features(), T = f.length();
  Array out({T, m});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < m; ++i)
      w(t, i) = f.mask(i, t) ? f.values.at(i, t) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Array from_tensor_transposed(const Tensor& x) {
  const std::size_t m = x.dim(0), T = x.dim(1);
  Array out({T, m});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < m; ++i) w(t, i) = x.at(i, t);
  return out;
}

Array vec(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  d["threshold"] = r.threshold;
  d["true_positives"] = r.true_positives;
  d["false_positives"] = r.false_positives;
  d["false_negatives"] = r.false_negatives;
  return d;
}

RunConfig config_from(const py::kwargs& kw) {
  RunConfig cfg;
  for (const auto& [k, v] : kw) cfg.set(py::str(k), py::str(v));
  cfg.validate();
  return cfg;
}

struct PyModel {
  RunConfig cfg;
  EntityModel model;
  std::vector<double> loss;
};

}  // namespace

PYBIND11_MODULE(_dghl, mod) {
  mod.doc() = "Hierarchical-latent generative anomaly detector";

  py::register_exception<ValidationError>(mod, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(mod, "ShapeError", PyExc_ValueError);
  py::register_exception<ParseError>(mod, "ParseError", PyExc_ValueError);
  py::register_exception<NumericError>(mod, "NumericError", PyExc_ArithmeticError);

  py::class_<RunConfig>(mod, "Config")
      .def(py::init([](const py::kwargs& kw) { return config_from(kw); }))
      .def("__getitem__", &RunConfig::get)
      .def("__setitem__", &RunConfig::set)
      .def_static("keys", &RunConfig::keys)
      .def("validate", &RunConfig::validate)
      .def("to_text", &RunConfig::to_text)
      .def_static("from_text", [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
      })
      .def("__eq__", [](const RunConfig& a, const RunConfig& b) { return a == b; });

  py::class_<PyModel>(mod, "Model")
      .def_static(
          "fit",
          [](const Array& train, const RunConfig& cfg) {
            const SeriesFrame frame = to_frame(train);
            PyModel m{cfg, {}, {}};
            {
              py::gil_scoped_release release;
              TrainOutcome t = train_entity(frame, cfg);
              m.model = std::move(t.model);
              for (const LossRecord& r : t.run.history) m.loss.push_back(r.loss);
            }
            return m;
          },
          py::arg("train"), py::arg("config") = RunConfig{},
          "Train on a (T, m) array; NaN entries are treated as unobserved.")
      .def_static("load", [](const std::string& dir) {
        PyModel m;
        m.model = load_model(dir);
        m.cfg = load_config_file(dir + "/config.txt");
        return m;
      })
      .def("save", [](const PyModel& m, const std::string& dir) { save_model(dir, m.model, m.cfg); })
      .def_property_readonly("config", [](const PyModel& m) { return m.cfg; })
      .def_property_readonly("loss_history", [](const PyModel& m) { return vec(m.loss); })
      .def(
          "score",
          [](const PyModel& m, const Array& test, std::size_t workers) {
            const SeriesFrame frame = to_frame(test);
            SeriesFrame prepared;
            DetectOutcome d;
            {
              py::gil_scoped_release release;
              prepared = prepare_test(frame, m.model.stats, m.cfg);
              d = detect_prepared(prepared, m.model, m.cfg, workers);
            }
            StandardizeStats stats = m.model.stats;
            SeriesFrame recon = SeriesFrame::from_values(d.stream.reconstruction);
            py::dict out;
            out["raw"] = vec(d.raw.scores);
            out["normalized"] = vec(d.normalized.scores);
            out["reconstruction"] = from_tensor_transposed(destandardize(recon, stats).values);
            return out;
          },
          py::arg("test"), py::arg("workers") = 1,
          "Anomaly scores and the reconstruction (original units) for a (T, m) array.");

  mod.def(
      "best_f1",
      [](const Array& scores, const std::vector<bool>& labels, bool adjusted) {
        if (scores.ndim() != 1) throw ShapeError("scores must be 1-D");
        return report_dict(best_f1(std::span<const double>(scores.data(), scores.size()), labels, adjusted));
      },
      py::arg("scores"), py::arg("labels"), py::arg("adjusted") = true);
  mod.def("point_adjust", &point_adjust, py::arg("pred"), py::arg("labels"));

  mod.def(
      "occlusion_mask",
      [](std::size_t T, std::size_t m, std::size_t segments, double p, std::uint64_t seed) {
        const Mask mask = make_occlusion_mask(m, T, {segments, p, seed});
        py::array_t<bool> out({T, m});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t i = 0; i < m; ++i) w(t, i) = mask(i, t);
        return out;
      },
      py::arg("length"), py::arg("features"), py::arg("segments") = 5, py::arg("probability") = 0.0,
      py::arg("seed") = 1, "Boolean (T, m) mask, True where observed.");

  mod.def(
      "synth",
      [](std::size_t features, std::size_t train_len, std::size_t test_len, std::size_t spikes,
         std::size_t level_shifts, std::uint64_t seed) {
        SynthSpec spec;
        spec.n_features = features;
        spec.train_len = train_len;
        spec.test_len = test_len;
        spec.n_spikes = spikes;
        spec.n_level_shifts = level_shifts;
        spec.seed = seed;
        const SynthData d = synth_generate(spec);
        py::dict out;
        out["train"] = from_frame(d.train);
        out["test"] = from_frame(d.test);
        out["labels"] = *d.test.labels;
        return out;
      },
      py::arg("features") = 5, py::arg("train_len") = 10000, py::arg("test_len") = 5000,
      py::arg("spikes") = 10, py::arg("level_shifts") = 10, py::arg("seed") = 1,
      "Multi-sine benchmark with injected spikes and level shifts.");
}
