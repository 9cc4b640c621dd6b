#include "vibias/bias.hpp"

#include "vibias/error.hpp"
#include "vibias/expectation.hpp"
#include "vibias/moments.hpp"
#include "vibias/tangent.hpp"

#include <cmath>
#include <limits>

namespace vibias {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ratio_of(double remainder, double h_norm, double delta_l2) {
  const double denom = h_norm * delta_l2 * delta_l2;
  if (denom == 0.0) return remainder == 0.0 ? 0.0 : kInf;
  return std::abs(remainder) / denom;
}

// Every expansion term from tabulated values under q* masses.
void fill_from_tables(BiasReport& r, std::span<const double> masses, std::span<const double> h,
                      std::span<const double> delta, std::span<const double> perp) {
  const std::size_t n = masses.size();
  const double eh = weighted_sum(masses, h);
  std::vector<double> buf(n);
  auto sum_of = [&](auto&& f) {
    for (std::size_t k = 0; k < n; ++k) buf[k] = f(k);
    return weighted_sum(masses, buf);
  };
  r.linear = -sum_of([&](std::size_t k) { return (h[k] - eh) * delta[k]; });
  r.linear_raw = -sum_of([&](std::size_t k) { return h[k] * delta[k]; });
  r.remainder = sum_of([&](std::size_t k) { return (h[k] - eh) * rho_rem(delta[k]); });
  r.remainder_raw = sum_of([&](std::size_t k) { return h[k] * rho_rem(delta[k]); });
  r.interaction = -sum_of([&](std::size_t k) { return perp[k] * delta[k]; });
  const double kl = weighted_sum(masses, delta);
  r.delta_l2 = std::sqrt(sum_of([&](std::size_t k) { return delta[k] * delta[k]; }));
  r.delta_l2_centered = std::sqrt(sum_of([&](std::size_t k) { return (delta[k] - kl) * (delta[k] - kl); }));
  r.h_centered_l2 = std::sqrt(sum_of([&](std::size_t k) { return (h[k] - eh) * (h[k] - eh); }));
}

void finish(BiasReport& r, double stationarity) {
  r.stationarity_residual = stationarity;
  r.bound_ratio = ratio_of(r.remainder, r.h_centered_l2, r.delta_l2);
  r.identity_residual = std::abs(r.exact - (r.linear + r.remainder));
  r.transfer_residual = std::abs(r.linear - r.interaction);
  r.transfer_tol = std::max(1e-8, 10.0 * stationarity);
  r.identity_ok = r.identity_residual <= r.identity_tol;
  r.transfer_ok = r.transfer_residual <= r.transfer_tol;
}

BiasReport grid_report(const FunctionalSpec& h, const GridMeasure& post, const MeanFieldFit& fit) {
  const auto& q = std::get<GridMeasure>(fit.qstar);
  BiasReport r;
  r.mode = BiasMode::Grid;
  r.identity_tol = 1e-8;
  const Measure pm{post};
  const ResidualFunctional delta = residual(fit, pm);
  r.exact = expect(pm, h) - expect(fit.qstar, h);
  const auto masses = q.masses();
  const auto hv = tabulate(h, q);
  const auto dv = tabulate(delta.functional(), q);
  const auto pv = tabulate(anova_decompose(h, fit.qstar, fit.blocks).interaction, q);
  fill_from_tables(r, masses, hv, dv, pv);
  return r;
}

BiasReport gaussian_polynomial_report(const Polynomial& h, const GaussianMeasure& post,
                                      const MeanFieldFit& fit, const QuadratureConfig& cfg) {
  const auto& q = std::get<GaussianMeasure>(fit.qstar);
  BiasReport r;
  const ResidualFunctional delta = residual(fit, Measure{post});
  const Polynomial& dp = delta.functional().polynomial();
  GaussianMoments mq(q);
  const double eh = mq.expect(h);
  r.exact = expect(post, h) - eh;
  const Polynomial hc = h - eh;
  r.linear = -mq.expect(hc * dp);
  r.linear_raw = -mq.expect(h * dp);
  const Polynomial perp = anova_decompose(h, fit.qstar, fit.blocks).interaction.polynomial();
  r.interaction = -mq.expect(perp * dp);
  const double kl = mq.expect(dp);
  r.delta_l2 = std::sqrt(std::max(0.0, mq.expect(dp * dp)));
  const Polynomial dc = dp - kl;
  r.delta_l2_centered = std::sqrt(std::max(0.0, mq.expect(dc * dc)));
  r.h_centered_l2 = std::sqrt(std::max(0.0, mq.expect(hc * hc)));

  if (dp.is_zero()) {
    r.mode = BiasMode::GaussianExact;
    r.identity_tol = 1e-8;
    return r;
  }
  r.mode = BiasMode::GaussianQuadrature;
  r.identity_tol = 1e-6;
  const GaussianMeasure* cover[] = {&post, &q};
  const QuadratureGrid grid = make_quadrature_grid(cover, {}, cfg);
  r.quadrature = grid.info;
  const GridMeasure gq = weighted_grid(q, grid);
  const auto masses = gq.masses();
  const auto hv = tabulate(h, gq);
  const auto dv = tabulate(dp, gq);
  std::vector<double> buf(masses.size());
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = (hv[k] - eh) * rho_rem(dv[k]);
  r.remainder = weighted_sum(masses, buf);
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = hv[k] * rho_rem(dv[k]);
  r.remainder_raw = weighted_sum(masses, buf);
  return r;
}

BiasReport gaussian_box_report(const BoxTail& h, const GaussianMeasure& post, const MeanFieldFit& fit,
                               const QuadratureConfig& cfg) {
  const auto& q = std::get<GaussianMeasure>(fit.qstar);
  if (h.dim() != q.dim()) throw Error(ErrorCode::DimensionMismatch, "functional dimension mismatch");
  BiasReport r;
  r.mode = BiasMode::GaussianQuadrature;
  r.identity_tol = 1e-6;
  r.exact = box_tail_probability(post, h, cfg).value - box_tail_probability(q, h, cfg).value;
  const ResidualFunctional delta = residual(fit, Measure{post});

  std::vector<std::vector<double>> breaks(h.dim());
  for (std::size_t i : h.active_coords()) breaks[i] = {*h.lower[i]};
  const GaussianMeasure* cover[] = {&post, &q};
  const QuadratureGrid grid = make_quadrature_grid(cover, breaks, cfg);
  r.quadrature = grid.info;
  const GridMeasure gq = weighted_grid(q, grid);
  const FunctionalSpec hs{h};
  const auto masses = gq.masses();
  const auto hv = tabulate(hs, gq);
  const auto dv = tabulate(delta.functional(), gq);
  const auto pv = tabulate(anova_decompose(hs, Measure{gq}, fit.blocks).interaction, gq);
  fill_from_tables(r, masses, hv, dv, pv);
  return r;
}

}  // namespace

double rho_rem(double x) {
  if (std::abs(x) < 1e-4) {
    return x * x * (0.5 + x * (-1.0 / 6.0 + x * (1.0 / 24.0 - x / 120.0)));
  }
  return std::expm1(-x) + x;
}

bool remainder_pointwise_bound(double x) {
  const double bound = 0.5 * x * x * std::exp(std::abs(x));
  return std::abs(rho_rem(x)) <= bound * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
}

std::string_view to_string(BiasMode mode) noexcept {
  switch (mode) {
    case BiasMode::Grid:
      return "grid";
    case BiasMode::GaussianExact:
      return "gaussian_exact";
    case BiasMode::GaussianQuadrature:
      return "gaussian_quadrature";
  }
  return "unknown";
}

BiasReport bias_report(const FunctionalSpec& h, const Measure& posterior, const MeanFieldFit& fit,
                       std::string functional_id, const QuadratureConfig& cfg) {
  if (!fit.converged) throw Error(ErrorCode::NotConverged, "bias report needs a converged fit");
  if (fit.qstar.index() != posterior.index()) {
    throw Error(ErrorCode::RepresentationMismatch, "fit and posterior use different representations");
  }
  BiasReport r;
  if (const auto* grid = std::get_if<GridMeasure>(&posterior)) {
    r = grid_report(h, *grid, fit);
  } else {
    const auto& g = std::get<GaussianMeasure>(posterior);
    if (h.kind() == FunctionalKind::Polynomial) {
      r = gaussian_polynomial_report(h.polynomial(), g, fit, cfg);
    } else if (h.kind() == FunctionalKind::BoxTail) {
      r = gaussian_box_report(h.box_tail(), g, fit, cfg);
    } else {
      throw Error(ErrorCode::UnsupportedPair, "tabulated functionals need a grid posterior");
    }
  }
  r.functional_id = std::move(functional_id);
  finish(r, fit.stationarity_residual);
  return r;
}

BoundCheck remainder_bound_check(const BiasReport& report, const FunctionalSpec& /*h*/,
                                 const MeanFieldFit& fit, const Measure& posterior) {
  if (report.h_centered_l2 == 0.0) {
    throw Error(ErrorCode::ZeroVariance, "functional is constant under q*");
  }
  BoundCheck out;
  out.ratio = ratio_of(report.remainder, report.h_centered_l2, report.delta_l2);
  if (const auto* q = std::get_if<GridMeasure>(&fit.qstar)) {
    const auto dv = tabulate(residual(fit, posterior).functional(), *q);
    for (double d : dv) out.pointwise_holds = out.pointwise_holds && remainder_pointwise_bound(d);
    out.nodes_checked = dv.size();
  }
  return out;
}

GaussianMeasure correlated_pair(double rho, double variance) {
  Eigen::MatrixXd s(2, 2);
  s << variance, rho * variance, rho * variance, variance;
  return GaussianMeasure(Eigen::VectorXd::Zero(2), s);
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "slope needs paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error(ErrorCode::InvalidArgument, "slope needs distinct abscissae");
  return sxy / sxx;
}

ScalingResult scaling_study(const FunctionalSpec& h, const std::vector<double>& eps_grid,
                            const PosteriorFamily& family, const std::optional<BlockStructure>& blocks) {
  if (eps_grid.size() < 4) throw Error(ErrorCode::InvalidArgument, "scaling study needs at least 4 points");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0) || (i > 0 && !(eps_grid[i] < eps_grid[i - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "eps grid must be positive and strictly decreasing");
    }
  }
  const PosteriorFamily fam = family ? family : [](double e) { return Measure{correlated_pair(e)}; };
  ScalingResult out;
  std::vector<double> lx, ly;
  for (double eps : eps_grid) {
    const Measure post = fam(eps);
    const BlockStructure bs = blocks ? *blocks : BlockStructure::fully_factorized(dim_of(post));
    const MeanFieldFit fit = fit_meanfield(post, bs);
    const double exact = expect(post, h) - expect(fit.qstar, h);
    const double dl2 = std::sqrt(std::max(0.0, [&] {
      const ResidualFunctional d = residual(fit, post);
      if (d.is_quadratic()) {
        const Polynomial& p = d.functional().polynomial();
        return expect(std::get<GaussianMeasure>(fit.qstar), p * p);
      }
      const auto& q = std::get<GridMeasure>(fit.qstar);
      auto v = tabulate(d.functional(), q);
      for (auto& x : v) x *= x;
      return expect(q, v);
    }()));
    out.points.push_back({eps, exact, dl2});
    if (exact == 0.0) out.degenerate = true;
    lx.push_back(std::log(eps));
    ly.push_back(std::log(std::abs(exact)));
  }
  out.slope = out.degenerate ? kInf : ols_slope(lx, ly);
  return out;
}

BiasReport convex_functional_bias(const FunctionalSpec& psi, const Measure& posterior,
                                  const MeanFieldFit& fit, std::string functional_id,
                                  const QuadratureConfig& cfg) {
  BiasReport r = bias_report(psi, posterior, fit, std::move(functional_id), cfg);
  r.note = "linear pathway <psi, q* - pi> only; expansion remainder of the convex functional not computed";
  return r;
}

}  // namespace vibias
