#include "vibias/serialize.hpp"

#include "vibias/error.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace vibias {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json mat(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw Error(ErrorCode::ParseError, std::string("expected a number for ") + what);
  return j.get<double>();
}

Axes axes_from(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "axes must be an array of arrays");
  Axes axes;
  for (const auto& ax : j) {
    if (!ax.is_array()) throw Error(ErrorCode::ParseError, "axes must be an array of arrays");
    std::vector<double> a;
    for (const auto& x : ax) a.push_back(number(x, "axis node"));
    axes.push_back(std::move(a));
  }
  return axes;
}

std::vector<double> numbers(const Json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, std::string(what) + " must be an array");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x, what));
  return out;
}

std::vector<std::size_t> indices(const Json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, std::string(what) + " must be an array");
  std::vector<std::size_t> out;
  for (const auto& x : j) {
    if (!x.is_number_unsigned() && !(x.is_number_integer() && x.get<long long>() >= 0)) {
      throw Error(ErrorCode::ParseError, std::string(what) + " must hold nonnegative integers");
    }
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

Json table_json(const GridTable& t) {
  return Json{{"coords", t.coords}, {"axes", t.axes}, {"values", t.values}};
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  out += '\n';
  return out;
}

Json to_json(const GridMeasure& m) {
  Json lw = Json::array();
  for (double w : m.log_weights()) {
    if (w == kNegInf) {
      lw.push_back(nullptr);
    } else {
      lw.push_back(w);
    }
  }
  return Json{{"axes", m.axes()}, {"log_weights", std::move(lw)}, {"shape", m.shape()}};
}

Json to_json(const GaussianMeasure& m) { return Json{{"mean", vec(m.mean())}, {"cov", mat(m.covariance())}}; }

Json to_json(const Measure& m) {
  return std::visit([](const auto& x) { return to_json(x); }, m);
}

Measure measure_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "measure must be a JSON object");
  if (j.contains("axes")) {
    Axes axes = axes_from(j.at("axes"));
    if (!j.contains("log_weights")) throw Error(ErrorCode::ParseError, "grid measure needs log_weights");
    std::vector<double> lw;
    for (const auto& w : j.at("log_weights")) lw.push_back(w.is_null() ? kNegInf : number(w, "log weight"));
    if (j.contains("shape")) {
      const auto shape = indices(j.at("shape"), "shape");
      if (shape.size() != axes.size()) throw Error(ErrorCode::ShapeMismatch, "shape does not match axes");
      for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] != axes[i].size()) throw Error(ErrorCode::ShapeMismatch, "shape does not match axes");
      }
    }
    return normalize(GridMeasure(std::move(axes), std::move(lw)));
  }
  if (j.contains("mean") && j.contains("cov")) {
    const auto mean = numbers(j.at("mean"), "mean");
    const auto& cj = j.at("cov");
    if (!cj.is_array() || cj.size() != mean.size()) throw Error(ErrorCode::ShapeMismatch, "cov must be d x d");
    const auto d = static_cast<Eigen::Index>(mean.size());
    Eigen::VectorXd mu(d);
    Eigen::MatrixXd cov(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      mu(i) = mean[static_cast<std::size_t>(i)];
      const auto row = numbers(cj[static_cast<std::size_t>(i)], "cov row");
      if (row.size() != mean.size()) throw Error(ErrorCode::ShapeMismatch, "cov must be d x d");
      for (Eigen::Index k = 0; k < d; ++k) cov(i, k) = row[static_cast<std::size_t>(k)];
    }
    return GaussianMeasure(std::move(mu), std::move(cov));
  }
  throw Error(ErrorCode::ParseError, "measure needs either axes/log_weights or mean/cov");
}

Json to_json(const BlockStructure& b) { return Json(b.blocks()); }

BlockStructure blocks_from_json(const Json& j, std::size_t dim) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "blocks must be an array of arrays");
  std::vector<std::vector<std::size_t>> blocks;
  for (const auto& b : j) blocks.push_back(indices(b, "block"));
  return BlockStructure(std::move(blocks), dim);
}

FunctionalSpec functional_from_json(const Json& j, std::size_t dim) {
  if (!j.is_object() || j.size() != 1) {
    throw Error(ErrorCode::ParseError, "functional must be an object with one of poly, boxtail, grid");
  }
  if (j.contains("poly")) {
    const auto& terms = j.at("poly");
    if (!terms.is_array()) throw Error(ErrorCode::ParseError, "poly must be an array of [coef, exponents]");
    std::vector<Monomial> out;
    for (const auto& t : terms) {
      if (!t.is_array() || t.size() != 2) throw Error(ErrorCode::ParseError, "poly term must be [coef, exponents]");
      Exponents e;
      for (std::size_t x : indices(t[1], "exponents")) e.push_back(static_cast<unsigned>(x));
      out.push_back({number(t[0], "coefficient"), std::move(e)});
    }
    return Polynomial(dim, std::move(out));
  }
  if (j.contains("boxtail")) {
    const auto& b = j.at("boxtail");
    if (!b.is_object() || !b.contains("lower") || !b.at("lower").is_array()) {
      throw Error(ErrorCode::ParseError, "boxtail needs a lower array");
    }
    std::vector<std::optional<double>> lower;
    for (const auto& t : b.at("lower")) {
      if (t.is_null()) {
        lower.emplace_back();
      } else {
        lower.emplace_back(number(t, "threshold"));
      }
    }
    if (lower.size() != dim) throw Error(ErrorCode::DimensionMismatch, "boxtail length does not match dimension");
    return BoxTail(std::move(lower));
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (!g.is_object() || !g.contains("coords") || !g.contains("axes") || !g.contains("values")) {
      throw Error(ErrorCode::ParseError, "grid functional needs coords, axes and values");
    }
    auto coords = indices(g.at("coords"), "coords");
    for (std::size_t c : coords) {
      if (c >= dim) throw Error(ErrorCode::DimensionMismatch, "grid functional coordinate out of range");
    }
    return GridTable(std::move(coords), axes_from(g.at("axes")), numbers(g.at("values"), "values"));
  }
  throw Error(ErrorCode::ParseError, "functional must be an object with one of poly, boxtail, grid");
}

Json to_json(const FunctionalSpec& f) {
  switch (f.kind()) {
    case FunctionalKind::Polynomial: {
      Json terms = Json::array();
      for (const auto& t : f.polynomial().terms()) terms.push_back(Json::array({t.coef, t.exponents}));
      return Json{{"poly", std::move(terms)}};
    }
    case FunctionalKind::BoxTail: {
      Json lower = Json::array();
      for (const auto& t : f.box_tail().lower) {
        if (t) {
          lower.push_back(*t);
        } else {
          lower.push_back(nullptr);
        }
      }
      return Json{{"boxtail", {{"lower", std::move(lower)}}}};
    }
    case FunctionalKind::GridTable:
      return Json{{"grid", table_json(f.grid_table())}};
  }
  return Json();
}

Json to_json(const MeanFieldFit& fit) {
  return Json{{"qstar", to_json(fit.qstar)},
              {"blocks", to_json(fit.blocks)},
              {"kl_trace", fit.kl_trace},
              {"converged", fit.converged},
              {"stationarity_residual", fit.stationarity_residual},
              {"sweeps", fit.sweeps},
              {"tol", fit.tol}};
}

Json to_json(const BiasReport& r) {
  Json j{{"functional_id", r.functional_id},
         {"mode", std::string(to_string(r.mode))},
         {"exact", r.exact},
         {"linear", r.linear},
         {"interaction", r.interaction},
         {"remainder", r.remainder},
         {"delta_l2", r.delta_l2},
         {"delta_l2_centered", r.delta_l2_centered},
         {"bound_ratio", r.bound_ratio},
         {"identity_residual", r.identity_residual},
         {"transfer_residual", r.transfer_residual},
         {"identity_tol", r.identity_tol},
         {"transfer_tol", r.transfer_tol},
         {"identity_ok", r.identity_ok},
         {"transfer_ok", r.transfer_ok},
         {"linear_raw", r.linear_raw},
         {"remainder_raw", r.remainder_raw},
         {"h_centered_l2", r.h_centered_l2},
         {"stationarity_residual", r.stationarity_residual}};
  if (r.quadrature) {
    j["quadrature"] = {{"points_per_axis", r.quadrature->points_per_axis}, {"step", r.quadrature->step}};
  } else {
    j["quadrature"] = nullptr;
  }
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

Json to_json(const AnovaDecomposition& a) {
  Json comps = Json::array();
  for (const auto& c : a.block_components) comps.push_back(to_json(c));
  return Json{{"mean", a.mean},
              {"blocks", to_json(a.block_structure)},
              {"block_components", std::move(comps)},
              {"interaction", to_json(a.interaction)}};
}

Json to_json(const OrthogonalityReport& r) {
  return Json{{"value", r.value()},
              {"max_score_inner", r.max_score_inner},
              {"max_probe_inner", r.max_probe_inner},
              {"probes", r.probes},
              {"seed", r.seed}};
}

Json to_json(const LanSweepResult& r) {
  Json pts = Json::array();
  for (const auto& p : r.points) {
    pts.push_back(Json{{"n", p.n},
                       {"measured_bias", p.measured},
                       {"predicted_bias", p.predicted},
                       {"ratio", p.ratio ? Json(*p.ratio) : Json(nullptr)}});
  }
  return Json{{"points", std::move(pts)},
              {"slope", r.degenerate ? Json(nullptr) : Json(r.slope)},
              {"degenerate", r.degenerate},
              {"limit_n_bias", r.limit_n_bias},
              {"trace_coeff", r.trace_coeff},
              {"hessian", mat(r.hessian)}};
}

Json to_json(const TangentAudit& a) {
  Json j{{"trace_coeff", a.trace_coeff},
         {"measured_n_bias", a.measured_n_bias},
         {"n", a.n},
         {"first_order_bias_vanishes", a.first_order_bias_vanishes}};
  if (!a.note.empty()) j["note"] = a.note;
  return j;
}

Json to_json(const ScalingResult& r) {
  Json pts = Json::array();
  for (const auto& p : r.points) pts.push_back(Json{{"eps", p.eps}, {"exact", p.exact}, {"delta_l2", p.delta_l2}});
  return Json{{"slope", r.degenerate ? Json(nullptr) : Json(r.slope)},
              {"degenerate", r.degenerate},
              {"points", std::move(pts)}};
}

const std::vector<std::string>& bias_csv_header() {
  static const std::vector<std::string> h{"functional_id", "exact",      "linear",     "interaction",
                                          "remainder",     "delta_l2",   "delta_l2_centered",
                                          "bound_ratio",   "identity_residual", "transfer_residual"};
  return h;
}

std::vector<std::string> bias_csv_row(const BiasReport& r) {
  return {r.functional_id,
          format_double(r.exact),
          format_double(r.linear),
          format_double(r.interaction),
          format_double(r.remainder),
          format_double(r.delta_l2),
          format_double(r.delta_l2_centered),
          format_double(r.bound_ratio),
          format_double(r.identity_residual),
          format_double(r.transfer_residual)};
}

const std::vector<std::string>& lan_csv_header() {
  static const std::vector<std::string> h{"n", "measured_bias", "predicted_bias", "ratio"};
  return h;
}

std::vector<std::vector<std::string>> lan_csv_rows(const LanSweepResult& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : r.points) {
    rows.push_back({std::to_string(p.n), format_double(p.measured), format_double(p.predicted),
                    p.ratio ? format_double(*p.ratio) : std::string()});
  }
  return rows;
}

}  // namespace vibias
