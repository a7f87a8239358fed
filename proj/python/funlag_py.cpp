// Python bindings: a thin layer over the C++ library.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "funlag/dual_optimizer.hpp"
#include "funlag/errors.hpp"
#include "funlag/inner_solvers.hpp"
#include "funlag/runner.hpp"

namespace py = pybind11;
using namespace funlag;

namespace {

Box make_box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size()) throw ShapeError("lo and hi differ in size");
  return Box(lo, hi);
}

}  // namespace

PYBIND11_MODULE(_funlag, m) {
  m.doc() = "Functional-Lagrangian verification of small stochastic networks";

  auto base = py::register_exception<Error>(m, "FunlagError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<UnsupportedCombination>(m, "UnsupportedCombination", base.ptr());
  py::register_exception<EmptyInput>(m, "EmptyInput", base.ptr());

  py::class_<CanonicalNetwork>(m, "Network")
      .def_property_readonly("input_dim", &CanonicalNetwork::input_dim)
      .def_property_readonly("output_dim", &CanonicalNetwork::output_dim)
      .def_property_readonly("num_layers", &CanonicalNetwork::num_layers)
      .def_property_readonly("is_deterministic", &CanonicalNetwork::is_deterministic)
      .def("to_json", [](const CanonicalNetwork& n) { return model_to_json(n).dump(); })
      .def("forward_mean", [](const CanonicalNetwork& n, const Vec& x) { return forward_mean(n, x); })
      .def("forward_sample",
           [](const CanonicalNetwork& n, const Vec& x, std::uint64_t seed) { return forward_sample(n, x, seed); },
           py::arg("x"), py::arg("seed") = 0)
      .def(
          "mean_softmax",
          [](const CanonicalNetwork& n, const Vec& x, int samples, std::uint64_t seed) {
            const auto e = mean_softmax_estimate(n, x, samples, seed);
            return py::make_tuple(e.probabilities, e.standard_error);
          },
          py::arg("x"), py::arg("samples") = 1000, py::arg("seed") = 0);

  m.def("load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));
  m.def("parse_model", [](const std::string& text) { return parse_model(nlohmann::json::parse(text)); },
        py::arg("text"));

  m.def(
      "propagate_bounds",
      [](const CanonicalNetwork& net, const Vec& lo, const Vec& hi) {
        const auto b = propagate_intervals(net, make_box(lo, hi));
        std::vector<std::pair<Vec, Vec>> out;
        for (const auto& box : b.boxes) out.emplace_back(box.lo, box.hi);
        return out;
      },
      py::arg("net"), py::arg("lo"), py::arg("hi"));

  m.def(
      "verify",
      [](const std::string& model, const std::string& spec, const std::string& family, int steps, double lr,
         int decay_every, int certify_every, std::uint64_t seed, int threads, int attack_samples) {
        RunConfig rc;
        rc.model = model;
        rc.spec = spec;
        rc.family = family_from_string(family);
        rc.steps = steps;
        rc.lr = lr;
        rc.decay_every = decay_every;
        rc.certify_every = certify_every;
        rc.seed = seed;
        rc.threads = threads;
        rc.attack_samples = attack_samples;
        RunResult r;
        {
          py::gil_scoped_release nogil;
          r = run_verification(load_model(rc.model), load_spec_config(rc.spec), rc);
        }
        return r.certificate.dump();
      },
      py::arg("model"), py::arg("spec"), py::arg("family") = "linear", py::arg("steps") = 1000,
      py::arg("lr") = 1e-3, py::arg("decay_every") = 250, py::arg("certify_every") = 50, py::arg("seed") = 0,
      py::arg("threads") = 1, py::arg("attack_samples") = 0);

  m.def("guaranteed_auc", &guaranteed_auc, py::arg("ood_upper_bounds"), py::arg("id_scores"));
  m.def("adversarial_auc", &adversarial_auc, py::arg("ood_attack_scores"), py::arg("id_scores"));

  m.def(
      "final_softmax_exact",
      [](Eigen::Index label, const Vec& coef, const Vec& lo, const Vec& hi) {
        const auto r = final_softmax_exact(label, coef, make_box(lo, hi));
        return py::make_tuple(r.value, *r.witness);
      },
      py::arg("label"), py::arg("coef"), py::arg("lo"), py::arg("hi"));
  m.def(
      "softmax_range",
      [](Eigen::Index label, const Vec& lo, const Vec& hi) {
        const Interval r = softmax_range(label, make_box(lo, hi));
        return py::make_tuple(r.lo, r.hi);
      },
      py::arg("label"), py::arg("lo"), py::arg("hi"));
}
