#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ocacnn/checkpoint.hpp"
#include "ocacnn/commands.hpp"
#include "ocacnn/eval.hpp"
#include "ocacnn/train.hpp"

namespace py = pybind11;
using namespace ocacnn;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
  FloatArray out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

RunConfig make_config(const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

// Runs one command, returning (exit code, stdout text, stderr text).
py::tuple run(const std::function<int(std::ostream&)>& body) {
  std::ostringstream log, err;
  int code = 0;
  {
    code = cli::guarded(err, [&] { return body(log); });
  }
  return py::make_tuple(code, log.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "One-class CNN with pseudo-negatives and a reconstruction regularizer";

  // Later registrations are tried first, so the base class goes first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<NumericalError>(m, "NumericalError", base);

  m.def("resolved_config", [](const std::map<std::string, std::string>& overrides) {
    return make_config(overrides).resolved();
  }, py::arg("overrides") = std::map<std::string, std::string>{},
     "Every config key with its effective value after applying overrides.");

  m.def("gen_data", [](const std::map<std::string, std::string>& cfg, const std::filesystem::path& out) {
    return run([&](std::ostream& log) { return cli::cmd_gen_data(make_config(cfg), out, log); });
  }, py::arg("config"), py::arg("out_dir"));

  m.def("train", [](const std::map<std::string, std::string>& cfg, const std::filesystem::path& out) {
    return run([&](std::ostream& log) { return cli::cmd_train(make_config(cfg), out, log); });
  }, py::arg("config"), py::arg("out_dir"));

  m.def("evaluate", [](const std::map<std::string, std::string>& cfg, const std::filesystem::path& checkpoint,
                       const std::filesystem::path& out) {
    return run([&](std::ostream& log) { return cli::cmd_eval(make_config(cfg), checkpoint, out, log); });
  }, py::arg("config"), py::arg("checkpoint"), py::arg("out_dir"));

  m.def("protocol", [](const std::map<std::string, std::string>& cfg, const std::filesystem::path& out) {
    return run([&](std::ostream& log) { return cli::cmd_protocol(make_config(cfg), out, log); });
  }, py::arg("config"), py::arg("out_dir"));

  m.def("gradcheck", [](std::uint64_t seed) {
    const ModelGradCheck c = model_gradient_check(ArchConfig::tiny(), seed, 2);
    py::dict d;
    d["max_rel_error"] = c.report.max_rel_error;
    d["coords_checked"] = c.report.coords_checked;
    d["coords_nonsmooth"] = c.report.coords_nonsmooth;
    d["worst_param"] = c.names.at(c.report.worst_param);
    return d;
  }, py::arg("seed") = 1, "Finite-difference check of the total loss on the tiny architecture (64-bit).");

  m.def("auroc", [](const std::vector<double>& target, const std::vector<double>& unknown) {
    return auroc(target, unknown).auroc;
  }, py::arg("target_scores"), py::arg("unknown_scores"));

  m.def("extract_features", [](const std::filesystem::path& checkpoint, const FloatArray& images) {
    const Checkpoint ck = load_params(checkpoint);
    return to_array(extract_features(ck.params, to_tensor(images)));
  }, py::arg("checkpoint"), py::arg("images"), "Features [N,D] of images [N,C,H,W] in [-1,1].");

  m.def("score", [](const std::filesystem::path& checkpoint, const FloatArray& images, const std::string& mode) {
    const Checkpoint ck = load_params(checkpoint);
    const ScoreMode sm = score_mode_for(parse_train_mode(mode));
    return score_images(ck.params, to_tensor(images), sm);
  }, py::arg("checkpoint"), py::arg("images"), py::arg("mode") = "full",
     "Per-image scores; higher means more target-like.");

  m.def("reconstruct", [](const std::filesystem::path& checkpoint, const FloatArray& images) {
    const Checkpoint ck = load_params(checkpoint);
    return to_array(decode(ck.params, extract_features(ck.params, to_tensor(images))));
  }, py::arg("checkpoint"), py::arg("images"));
}
