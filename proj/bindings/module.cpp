#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mgpo/config.hpp"
#include "mgpo/lora.hpp"
#include "mgpo/metrics.hpp"
#include "mgpo/optim.hpp"
#include "mgpo/runner.hpp"
#include "mgpo/tasks.hpp"

namespace py = pybind11;
using namespace mgpo;

namespace {

Matrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + m.size(), m.data.begin());
  return m;
}

py::array_t<double> matrix_to_array(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_mgpo, mod) {
  mod.doc() = "LoRA adapters with momentum-guided perturbation training";

  py::class_<Matrix>(mod, "Matrix")
      .def(py::init(&matrix_from_array), py::arg("array"))
      .def_readonly("rows", &Matrix::rows)
      .def_readonly("cols", &Matrix::cols)
      .def("numpy", &matrix_to_array)
      .def("__eq__", [](const Matrix& a, const Matrix& b) { return a == b; });

  py::class_<Rng>(mod, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal)
      .def("split", &Rng::split, py::arg("stream_id"));

  py::enum_<LossKind>(mod, "LossKind")
      .value("MSE", LossKind::kMse)
      .value("SOFTMAX_CROSS_ENTROPY", LossKind::kSoftmaxCrossEntropy);

  py::class_<LoraLinear>(mod, "LoraLinear")
      .def_readonly("rank", &LoraLinear::rank)
      .def_readonly("alpha", &LoraLinear::alpha)
      .def_property_readonly("w0", [](const LoraLinear& l) { return matrix_to_array(l.w0); })
      .def_property_readonly("a", [](const LoraLinear& l) { return matrix_to_array(l.a); })
      .def_property_readonly("b", [](const LoraLinear& l) { return matrix_to_array(l.b); })
      .def("merged", [](const LoraLinear& l) { return matrix_to_array(merge_weights(l)); });

  py::class_<MlpModel>(mod, "MlpModel")
      .def_readonly("layers", &MlpModel::layers)
      .def("forward", [](const MlpModel& m, const Matrix& x) {
        return matrix_to_array(model_forward(m, x));
      });

  mod.def(
      "make_model",
      [](std::vector<LoraLinear> layers) {
        MlpModel m;
        m.layers = std::move(layers);
        return m;
      },
      py::arg("layers"));

  mod.def(
      "lora_init",
      [](Rng& rng, std::size_t m, std::size_t n, std::size_t rank, double alpha) {
        return lora_init(rng, m, n, rank, alpha);
      },
      py::arg("rng"), py::arg("out_dim"), py::arg("in_dim"), py::arg("rank"), py::arg("alpha"));

  mod.def(
      "forward_loss",
      [](const MlpModel& model, const Matrix& x, const Matrix& y, LossKind kind) {
        Batch batch{x, y};
        return forward_loss(model, batch, kind).loss;
      },
      py::arg("model"), py::arg("inputs"), py::arg("targets"), py::arg("loss") = LossKind::kMse);

  mod.def(
      "gradients",
      [](MlpModel& model, const Matrix& x, const Matrix& y, LossKind kind) {
        Batch batch{x, y};
        ForwardCache cache = forward_loss(model, batch, kind);
        ParamBuffer grads = backward(model, cache);
        std::vector<py::array_t<double>> out;
        for (const Matrix& g : grads) out.push_back(matrix_to_array(g));
        return out;
      },
      py::arg("model"), py::arg("inputs"), py::arg("targets"), py::arg("loss") = LossKind::kMse);

  mod.def("preset_names", &preset_names);
  mod.def("preset_text", &preset_text, py::arg("name"));
  mod.def("config_hash_text",
          [](const std::string& text) { return config_hash(parse_config_text(text)); },
          py::arg("config_text"));

  mod.def(
      "smooth",
      [](const std::vector<double>& losses, int window) {
        return smooth(LossCurve{losses, 1}, window).losses;
      },
      py::arg("losses"), py::arg("window"));
  mod.def(
      "rebound_metric",
      [](const std::vector<double>& losses, int window) {
        return rebound_metric(smooth(LossCurve{losses, 1}, window));
      },
      py::arg("losses"), py::arg("window") = 25);

  mod.def(
      "train",
      [](const std::string& config_text, std::uint64_t seed, const std::string& run_dir) {
        ExperimentConfig cfg = parse_config_text(config_text);
        RunResult r = train_one(cfg, seed, run_dir);
        py::dict out;
        out["seed"] = r.seed;
        out["diverged"] = r.diverged;
        out["rebound"] = r.summary.rebound;
        out["final_loss"] = r.summary.final_loss;
        out["best_loss"] = r.summary.best_loss;
        std::vector<double> losses;
        for (const StepRow& row : r.rows) losses.push_back(row.loss);
        out["losses"] = losses;
        return out;
      },
      py::arg("config_text"), py::arg("seed"), py::arg("run_dir") = std::string());
}
