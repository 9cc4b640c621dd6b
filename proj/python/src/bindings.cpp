#include "vibias/bias.hpp"
#include "vibias/error.hpp"
#include "vibias/expectation.hpp"
#include "vibias/functionals.hpp"
#include "vibias/lan.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/serialize.hpp"
#include "vibias/suite.hpp"
#include "vibias/tangent.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace vibias;

namespace pybind11::detail {

// The stock variant caster needs default-constructible alternatives.
template <>
struct type_caster<Measure> {
  std::optional<Measure> value;
  static constexpr auto name = const_name("GridMeasure | GaussianMeasure");

  bool load(handle src, bool) {
    if (isinstance<GridMeasure>(src)) {
      value.emplace(src.cast<GridMeasure>());
    } else if (isinstance<GaussianMeasure>(src)) {
      value.emplace(src.cast<GaussianMeasure>());
    } else {
      return false;
    }
    return true;
  }

  static handle cast(const Measure& m, return_value_policy, handle) {
    return std::visit([](const auto& x) { return pybind11::cast(x).release(); }, m);
  }

  operator Measure&() { return *value; }
  template <typename>
  using cast_op_type = Measure&;
};

}  // namespace pybind11::detail

namespace {

// Results cross the boundary as JSON text; the Python side parses it.
template <class T>
std::string dump(const T& x) {
  return to_json(x).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-field variational bias diagnostics";

  // The error code travels as an attribute so callers can branch on it.
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "VibiasError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object inst = type(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  py::class_<BlockStructure>(m, "BlockStructure")
      .def(py::init<std::vector<std::vector<std::size_t>>, std::size_t>(), py::arg("blocks"), py::arg("dim"))
      .def_static("fully_factorized", &BlockStructure::fully_factorized)
      .def_static("single_block", &BlockStructure::single_block)
      .def_property_readonly("dim", &BlockStructure::dim)
      .def_property_readonly("blocks", &BlockStructure::blocks)
      .def("__len__", &BlockStructure::size);

  py::class_<GaussianMeasure>(m, "GaussianMeasure")
      .def(py::init<Eigen::VectorXd, Eigen::MatrixXd>(), py::arg("mean"), py::arg("cov"))
      .def_property_readonly("dim", &GaussianMeasure::dim)
      .def_property_readonly("mean", &GaussianMeasure::mean)
      .def_property_readonly("cov", &GaussianMeasure::covariance)
      .def_property_readonly("precision", &GaussianMeasure::precision);

  py::class_<GridMeasure>(m, "GridMeasure")
      .def(py::init<Axes, std::vector<double>, bool>(), py::arg("axes"), py::arg("log_weights"),
           py::arg("normalized") = false)
      .def_property_readonly("dim", &GridMeasure::dim)
      .def_property_readonly("axes", &GridMeasure::axes)
      .def_property_readonly("shape", &GridMeasure::shape)
      .def_property_readonly("masses", &GridMeasure::masses)
      .def("__len__", &GridMeasure::size);

  m.def("normalize", &normalize);
  m.def("discretize", py::overload_cast<const GaussianMeasure&, Axes>(&discretize), py::arg("g"), py::arg("axes"));
  m.def("discretize_sd",
        [](const GaussianMeasure& g, std::size_t points, double span_sd) {
          return discretize(g, GridConfig{points, span_sd});
        },
        py::arg("g"), py::arg("points") = 121, py::arg("span_sd") = 6.0);
  m.def("correlated_pair", &correlated_pair, py::arg("rho"), py::arg("variance") = 1.0);

  py::class_<Polynomial>(m, "Polynomial")
      .def(py::init([](std::size_t dim, const std::vector<std::pair<double, Exponents>>& terms) {
             std::vector<Monomial> t;
             for (const auto& [c, e] : terms) t.push_back({c, e});
             return Polynomial(dim, t);
           }),
           py::arg("dim"), py::arg("terms") = std::vector<std::pair<double, Exponents>>{})
      .def_property_readonly("dim", &Polynomial::dim)
      .def_property_readonly("terms",
                             [](const Polynomial& p) {
                               std::vector<std::pair<double, Exponents>> out;
                               for (const auto& t : p.terms()) out.emplace_back(t.coef, t.exponents);
                               return out;
                             })
      .def("__call__", [](const Polynomial& p, const std::vector<double>& x) { return p.evaluate(x); })
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def(py::self * py::self)
      .def(double() * py::self)
      .def(py::self == py::self);

  py::class_<BoxTail>(m, "BoxTail")
      .def(py::init<std::vector<std::optional<double>>>(), py::arg("lower"))
      .def_readonly("lower", &BoxTail::lower);

  py::class_<FunctionalSpec>(m, "FunctionalSpec")
      .def(py::init<Polynomial>())
      .def(py::init<BoxTail>())
      .def_static("from_json", [](const std::string& text, std::size_t dim) {
        return functional_from_json(Json::parse(text), dim);
      })
      .def_property_readonly("kind", [](const FunctionalSpec& f) { return std::string(to_string(f.kind())); })
      .def("to_json", [](const FunctionalSpec& f) { return dump(f); });
  py::implicitly_convertible<Polynomial, FunctionalSpec>();
  py::implicitly_convertible<BoxTail, FunctionalSpec>();

  m.def("expect", [](const Measure& q, const FunctionalSpec& h) { return expect(q, h); });
  m.def("kl_divergence", &kl_divergence);

  py::class_<CaviConfig>(m, "CaviConfig")
      .def(py::init([](std::size_t max_sweeps, double tol) { return CaviConfig{max_sweeps, tol}; }),
           py::arg("max_sweeps") = 500, py::arg("tol") = 1e-10);

  py::class_<MeanFieldFit>(m, "MeanFieldFit")
      .def_readonly("qstar", &MeanFieldFit::qstar)
      .def_readonly("blocks", &MeanFieldFit::blocks)
      .def_readonly("kl_trace", &MeanFieldFit::kl_trace)
      .def_readonly("converged", &MeanFieldFit::converged)
      .def_readonly("stationarity_residual", &MeanFieldFit::stationarity_residual)
      .def_readonly("sweeps", &MeanFieldFit::sweeps)
      .def("to_json", [](const MeanFieldFit& f) { return dump(f); });

  m.def("fit_meanfield", &fit_meanfield, py::arg("posterior"), py::arg("blocks"), py::arg("cfg") = CaviConfig{});

  py::class_<BiasReport>(m, "BiasReport")
      .def_readonly("functional_id", &BiasReport::functional_id)
      .def_readonly("exact", &BiasReport::exact)
      .def_readonly("linear", &BiasReport::linear)
      .def_readonly("interaction", &BiasReport::interaction)
      .def_readonly("remainder", &BiasReport::remainder)
      .def_readonly("delta_l2", &BiasReport::delta_l2)
      .def_readonly("delta_l2_centered", &BiasReport::delta_l2_centered)
      .def_readonly("bound_ratio", &BiasReport::bound_ratio)
      .def_readonly("identity_residual", &BiasReport::identity_residual)
      .def_readonly("transfer_residual", &BiasReport::transfer_residual)
      .def_readonly("identity_ok", &BiasReport::identity_ok)
      .def_readonly("transfer_ok", &BiasReport::transfer_ok)
      .def_property_readonly("mode", [](const BiasReport& r) { return std::string(to_string(r.mode)); })
      .def("to_json", [](const BiasReport& r) { return dump(r); });

  m.def("bias_report",
        [](const FunctionalSpec& h, const Measure& post, const MeanFieldFit& fit, std::string id) {
          return bias_report(h, post, fit, std::move(id));
        },
        py::arg("h"), py::arg("posterior"), py::arg("fit"), py::arg("functional_id") = "");
  m.def("rho_rem", &rho_rem);

  py::class_<ScalingResult>(m, "ScalingResult")
      .def_readonly("slope", &ScalingResult::slope)
      .def_readonly("degenerate", &ScalingResult::degenerate)
      .def_property_readonly("points", [](const ScalingResult& r) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& p : r.points) out.emplace_back(p.eps, p.exact, p.delta_l2);
        return out;
      });
  m.def("scaling_study",
        [](const FunctionalSpec& h, const std::vector<double>& eps) { return scaling_study(h, eps); },
        py::arg("h"), py::arg("eps_grid"));

  m.def("anova_decompose_json",
        [](const FunctionalSpec& h, const Measure& q, const BlockStructure& b) { return dump(anova_decompose(h, q, b)); });
  m.def("orthogonality_json", [](const MeanFieldFit& fit, const Measure& post, std::size_t probes, std::uint64_t seed) {
    return dump(orthogonality_report(residual(fit, post), score_basis(fit), fit.qstar, probes, seed));
  }, py::arg("fit"), py::arg("posterior"), py::arg("probes") = 10, py::arg("seed") = kDefaultProbeSeed);

  py::class_<LanExperiment>(m, "LanExperiment")
      .def(py::init(&LanExperiment::make), py::arg("mu"), py::arg("sigma"), py::arg("n_grid"), py::arg("blocks"))
      .def_readonly("v", &LanExperiment::v)
      .def_readonly("n_grid", &LanExperiment::n_grid);

  py::class_<LanSweepResult>(m, "LanSweepResult")
      .def_readonly("slope", &LanSweepResult::slope)
      .def_readonly("degenerate", &LanSweepResult::degenerate)
      .def_readonly("limit_n_bias", &LanSweepResult::limit_n_bias)
      .def_readonly("trace_coeff", &LanSweepResult::trace_coeff)
      .def_readonly("hessian", &LanSweepResult::hessian)
      .def_property_readonly("points", [](const LanSweepResult& r) {
        std::vector<std::tuple<long, double, double>> out;
        for (const auto& p : r.points) out.emplace_back(p.n, p.measured, p.predicted);
        return out;
      });
  m.def("run_sweep", &run_sweep);

  py::class_<TangentAudit>(m, "TangentAudit")
      .def_readonly("trace_coeff", &TangentAudit::trace_coeff)
      .def_readonly("measured_n_bias", &TangentAudit::measured_n_bias)
      .def_readonly("first_order_bias_vanishes", &TangentAudit::first_order_bias_vanishes)
      .def_readonly("note", &TangentAudit::note);
  m.def("tangent_functional_audit", &tangent_functional_audit);

  m.def("run_suite",
        [](const std::filesystem::path& dir, std::uint64_t seed) {
          SuiteOptions opts;
          opts.seed = seed;
          std::vector<std::tuple<int, std::string, bool, std::string>> out;
          for (const auto& c : run_suite(dir, opts).criteria) out.emplace_back(c.id, c.name, c.pass, c.measured);
          return out;
        },
        py::arg("out_dir"), py::arg("seed") = SuiteOptions{}.seed);
}
