#include "vibias/lan.hpp"

#include "vibias/bias.hpp"
#include "vibias/error.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/moments.hpp"
#include "vibias/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vibias {

namespace {

GaussianMeasure scaled_member(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov, long n) {
  return GaussianMeasure(mu, cov / static_cast<double>(n));
}

const Polynomial& require_polynomial(const FunctionalSpec& g) {
  if (!g.is_polynomial()) throw Error(ErrorCode::NotPolynomial, "functional must be a polynomial");
  return g.polynomial();
}

// p(mu + z) as a polynomial in z, constant term dropped. Both members of the
// pair share the mean, so the constant cancels exactly in the bias.
Polynomial shifted_without_constant(const Polynomial& p, const Eigen::VectorXd& mu) {
  const std::size_t d = p.dim();
  Polynomial out(d);
  for (const auto& t : p.terms()) {
    Polynomial term = Polynomial::constant(d, t.coef);
    for (std::size_t i = 0; i < d; ++i) {
      const Polynomial factor = Polynomial::coordinate(d, i) + mu(static_cast<Eigen::Index>(i));
      for (unsigned k = 0; k < t.exponents[i]; ++k) term = term * factor;
    }
    out = out + term;
  }
  return out - out.constant_term();
}

double pair_bias(const Polynomial& p, const LanExperiment& exp, long n) {
  const Polynomial z = shifted_without_constant(p, exp.mu);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(exp.mu.size());
  return expect(scaled_member(zero, exp.sigma, n), z) - expect(scaled_member(zero, exp.v, n), z);
}

}  // namespace

LanExperiment LanExperiment::make(Eigen::VectorXd mu, Eigen::MatrixXd sigma, std::vector<long> n_grid,
                                  BlockStructure blocks) {
  if (n_grid.empty()) throw Error(ErrorCode::InvalidArgument, "n grid is empty");
  for (long n : n_grid) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be a positive integer");
  }
  const GaussianMeasure post(mu, sigma);
  const MeanFieldFit fit = fit_meanfield_gaussian(post, blocks);
  Eigen::MatrixXd v = std::get<GaussianMeasure>(fit.qstar).covariance();
  double worst = 0.0;
  for (long n : n_grid) {
    const MeanFieldFit fn = fit_meanfield_gaussian(scaled_member(mu, sigma, n), blocks);
    const Eigen::MatrixXd vn = std::get<GaussianMeasure>(fn.qstar).covariance() * static_cast<double>(n);
    worst = std::max(worst, (vn - v).cwiseAbs().maxCoeff());
  }
  return {std::move(mu), std::move(sigma), std::move(v), std::move(n_grid), std::move(blocks), worst};
}

Eigen::MatrixXd hessian_at(const FunctionalSpec& g, const Eigen::VectorXd& point) {
  const Polynomial& p = require_polynomial(g);
  const auto d = static_cast<Eigen::Index>(p.dim());
  if (point.size() != d) throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (const auto& t : p.terms()) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = i; j < d; ++j) {
        Exponents e = t.exponents;
        double c = t.coef;
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        if (e[ui] == 0) continue;
        c *= e[ui];
        e[ui] -= 1;
        if (e[uj] == 0) continue;
        c *= e[uj];
        e[uj] -= 1;
        double val = c;
        for (std::size_t k = 0; k < e.size(); ++k) val *= std::pow(point(static_cast<Eigen::Index>(k)), e[k]);
        h(i, j) += val;
      }
    }
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) h(i, j) = h(j, i);
  }
  return h;
}

double predict_bias(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& v,
                    long n) {
  if (hessian.rows() != hessian.cols() || sigma.rows() != hessian.rows() || sigma.cols() != hessian.cols() ||
      v.rows() != hessian.rows() || v.cols() != hessian.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "hessian, sigma and v must be square of one size");
  }
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be a positive integer");
  return (hessian * (sigma - v)).trace() / (2.0 * static_cast<double>(n));
}

LanSweepResult run_sweep(const LanExperiment& exp, const FunctionalSpec& g) {
  const Polynomial& p = require_polynomial(g);
  if (p.dim() != static_cast<std::size_t>(exp.mu.size())) {
    throw Error(ErrorCode::DimensionMismatch, "functional dimension mismatch");
  }
  LanSweepResult out;
  out.hessian = hessian_at(g, exp.mu);
  out.trace_coeff = (out.hessian * (exp.sigma - exp.v)).trace() / 2.0;
  out.points.resize(exp.n_grid.size());
  parallel_for(exp.n_grid.size(), [&](std::size_t i) {
    const long n = exp.n_grid[i];
    LanPoint& pt = out.points[i];
    pt.n = n;
    pt.measured = pair_bias(p, exp, n);
    pt.predicted = predict_bias(out.hessian, exp.sigma, exp.v, n);
    if (pt.predicted != 0.0) pt.ratio = pt.measured / pt.predicted;
  });
  std::vector<double> lx, ly;
  for (const auto& pt : out.points) {
    if (std::abs(pt.measured) <= kZeroBias) out.degenerate = true;
    lx.push_back(std::log(static_cast<double>(pt.n)));
    ly.push_back(std::log(std::abs(pt.measured)));
  }
  if (out.points.size() < 2) out.degenerate = true;
  out.slope = out.degenerate ? std::numeric_limits<double>::infinity() : ols_slope(lx, ly);
  std::size_t last = 0;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    if (out.points[i].n > out.points[last].n) last = i;
  }
  out.limit_n_bias = static_cast<double>(out.points[last].n) * out.points[last].measured;
  return out;
}

TangentAudit tangent_functional_audit(const LanExperiment& exp, const FunctionalSpec& g) {
  const Polynomial& p = require_polynomial(g);
  if (p.dim() != static_cast<std::size_t>(exp.mu.size())) {
    throw Error(ErrorCode::DimensionMismatch, "functional dimension mismatch");
  }
  for (const auto& t : p.terms()) {
    std::optional<std::size_t> owner;
    for (std::size_t i = 0; i < t.exponents.size(); ++i) {
      if (t.exponents[i] == 0) continue;
      const std::size_t b = exp.block_structure.block_of(i);
      if (owner && *owner != b) throw Error(ErrorCode::NotBlockAdditive, "monomial couples different blocks");
      owner = b;
    }
  }
  TangentAudit a;
  a.trace_coeff = (hessian_at(g, exp.mu) * (exp.sigma - exp.v)).trace() / 2.0;
  a.n = *std::max_element(exp.n_grid.begin(), exp.n_grid.end());
  const double bias = pair_bias(p, exp, a.n);
  a.measured_n_bias = static_cast<double>(a.n) * bias;
  a.first_order_bias_vanishes = std::abs(a.measured_n_bias) <= 1e-10;
  if (!a.first_order_bias_vanishes) {
    a.note =
        "block-additive functional keeps a first-order bias: mean-field marginal variances "
        "V_ii = 1/(Sigma^-1)_ii differ from Sigma_ii";
  }
  return a;
}

}  // namespace vibias
