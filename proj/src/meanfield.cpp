#include "vibias/meanfield.hpp"

#include "vibias/error.hpp"
#include "vibias/expectation.hpp"
#include "vibias/tangent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vibias {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_dims(std::size_t measure_dim, const BlockStructure& blocks) {
  if (measure_dim != blocks.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "block structure does not match posterior dimension");
  }
}

Polynomial quadratic_polynomial(const ResidualFunctional::Quadratic& q) {
  const auto d = static_cast<std::size_t>(q.center.size());
  std::vector<Polynomial> z;
  for (std::size_t i = 0; i < d; ++i) {
    z.push_back(Polynomial::coordinate(d, i) - q.center(static_cast<Eigen::Index>(i)));
  }
  Polynomial out = Polynomial::constant(d, q.c);
  for (std::size_t i = 0; i < d; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (q.b(ii) != 0.0) out = out + q.b(ii) * z[i];
    for (std::size_t j = 0; j < d; ++j) {
      const double a = q.a(ii, static_cast<Eigen::Index>(j));
      if (a != 0.0) out = out + a * (z[i] * z[j]);
    }
  }
  return out;
}

// Stationarity of one sweep state, via E[s_k Delta] = q_b(k) (E[Delta | k] - E[Delta]).
double cavi_stationarity(const std::vector<std::vector<double>>& log_factors,
                         const std::vector<std::vector<std::size_t>>& idx,
                         std::span<const double> log_post) {
  const std::size_t n = log_post.size();
  const std::size_t m = log_factors.size();
  std::vector<double> q(n), delta(n);
  double mean_delta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double lq = 0.0;
    for (std::size_t b = 0; b < m; ++b) lq += log_factors[b][idx[b][k]];
    q[k] = lq == kNegInf ? 0.0 : std::exp(lq);
    delta[k] = q[k] > 0.0 ? lq - log_post[k] : 0.0;
    mean_delta += q[k] * delta[k];
  }
  double worst = 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    std::vector<double> acc(log_factors[b].size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) acc[idx[b][k]] += q[k] * delta[k];
    for (std::size_t j = 0; j + 1 < acc.size(); ++j) {
      const double qb = std::exp(log_factors[b][j]);
      worst = std::max(worst, std::abs(acc[j] - qb * mean_delta));
    }
  }
  return worst;
}

}  // namespace

MeanFieldFit fit_meanfield_gaussian(const GaussianMeasure& posterior, const BlockStructure& blocks) {
  require_dims(posterior.dim(), blocks);
  const auto d = static_cast<Eigen::Index>(posterior.dim());
  const Eigen::MatrixXd& prec = posterior.precision();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, d);
  for (const auto& blk : blocks.blocks()) {
    const auto k = static_cast<Eigen::Index>(blk.size());
    Eigen::MatrixXd sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        sub(a, b) = prec(static_cast<Eigen::Index>(blk[static_cast<std::size_t>(a)]),
                         static_cast<Eigen::Index>(blk[static_cast<std::size_t>(b)]));
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NonPositiveDefinite, "precision block is not positive definite");
    }
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    inv = 0.5 * (inv + inv.transpose());
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        v(static_cast<Eigen::Index>(blk[static_cast<std::size_t>(a)]),
          static_cast<Eigen::Index>(blk[static_cast<std::size_t>(b)])) = inv(a, b);
      }
    }
  }
  return fit_from_member(GaussianMeasure(posterior.mean(), v), posterior, blocks);
}

MeanFieldFit fit_meanfield_cavi(const GridMeasure& posterior, const BlockStructure& blocks,
                                const CaviConfig& cfg) {
  if (!posterior.normalized()) throw Error(ErrorCode::NotNormalized, "posterior grid must be normalized");
  require_dims(posterior.dim(), blocks);
  const std::size_t m = blocks.size();
  const std::size_t n = posterior.size();
  const auto log_post = posterior.log_weights();

  std::vector<std::vector<std::size_t>> idx;
  std::vector<std::vector<double>> log_factors;
  for (const auto& blk : blocks.blocks()) {
    idx.push_back(sub_indices(posterior.shape(), blk));
    const GridMeasure marg = marginal(posterior, blk);
    log_factors.emplace_back(marg.log_weights().begin(), marg.log_weights().end());
  }

  auto kl_of = [&]() {
    double kl = 0.0, comp = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double lq = 0.0;
      for (std::size_t b = 0; b < m; ++b) lq += log_factors[b][idx[b][k]];
      if (lq == kNegInf) continue;
      // Kahan: KL terms can be of mixed sign.
      const double term = std::exp(lq) * (lq - log_post[k]);
      const double y = term - comp;
      const double t = kl + y;
      comp = (t - kl) - y;
      kl = t;
    }
    return kl;
  };

  MeanFieldFit fit{GaussianMeasure(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)), blocks, {}};
  fit.tol = cfg.tol;
  double previous = kl_of();
  bool mass_converged = false;
  double stationarity = std::numeric_limits<double>::infinity();

  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t b = 0; b < m; ++b) {
      std::vector<double> acc(log_factors[b].size(), 0.0);
      std::vector<bool> dead(log_factors[b].size(), false);
      for (std::size_t k = 0; k < n; ++k) {
        double lrest = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
          if (c != b) lrest += log_factors[c][idx[c][k]];
        }
        if (lrest == kNegInf) continue;
        const std::size_t j = idx[b][k];
        if (log_post[k] == kNegInf) {
          dead[j] = true;
          continue;
        }
        acc[j] += std::exp(lrest) * log_post[k];
      }
      for (std::size_t j = 0; j < acc.size(); ++j) {
        if (dead[j]) acc[j] = kNegInf;
      }
      const double lse = log_sum_exp(acc);
      if (lse == kNegInf) throw Error(ErrorCode::AllMassZero, "coordinate update lost all mass");
      for (std::size_t j = 0; j < acc.size(); ++j) {
        const double updated = acc[j] - lse;
        const double before = log_factors[b][j] == kNegInf ? 0.0 : std::exp(log_factors[b][j]);
        const double after = updated == kNegInf ? 0.0 : std::exp(updated);
        change = std::max(change, std::abs(after - before));
        log_factors[b][j] = updated;
      }
    }
    const double kl = kl_of();
    if (kl > previous + 1e-10) {
      throw Error(ErrorCode::NoProgress, "KL increased during a coordinate sweep");
    }
    fit.kl_trace.push_back(kl);
    previous = kl;
    fit.sweeps = sweep + 1;
    mass_converged = change <= cfg.tol;
    if (mass_converged) {
      stationarity = cavi_stationarity(log_factors, idx, log_post);
      if (stationarity <= cfg.tol) break;
    }
  }

  std::vector<double> lw(n);
  for (std::size_t k = 0; k < n; ++k) {
    double lq = 0.0;
    for (std::size_t b = 0; b < m; ++b) lq += log_factors[b][idx[b][k]];
    lw[k] = lq;
  }
  fit.qstar = normalize(GridMeasure(posterior.axes(), std::move(lw)));
  const Measure post{posterior};
  fit.stationarity_residual = stationarity_check(fit, post, score_basis(fit.qstar, blocks));
  fit.converged = mass_converged && fit.stationarity_residual <= cfg.tol;
  return fit;
}

MeanFieldFit fit_meanfield(const Measure& posterior, const BlockStructure& blocks, const CaviConfig& cfg) {
  if (const auto* g = std::get_if<GaussianMeasure>(&posterior)) return fit_meanfield_gaussian(*g, blocks);
  return fit_meanfield_cavi(std::get<GridMeasure>(posterior), blocks, cfg);
}

MeanFieldFit fit_from_member(Measure member, const Measure& posterior, const BlockStructure& blocks,
                             double tol) {
  require_dims(dim_of(member), blocks);
  if (member.index() != posterior.index()) {
    throw Error(ErrorCode::RepresentationMismatch, "member and posterior use different representations");
  }
  if (const auto* g = std::get_if<GaussianMeasure>(&member)) {
    if (!is_block_diagonal(g->covariance(), blocks)) {
      throw Error(ErrorCode::NotProductMeasure, "covariance couples different blocks");
    }
  }
  MeanFieldFit fit{std::move(member), blocks, {}};
  fit.tol = tol;
  fit.kl_trace = {kl_divergence(fit.qstar, posterior)};
  fit.sweeps = 0;
  fit.stationarity_residual = stationarity_check(fit, posterior, score_basis(fit.qstar, blocks));
  fit.converged = fit.stationarity_residual <= tol;
  return fit;
}

ResidualFunctional::ResidualFunctional(Quadratic q)
    : quadratic_(std::move(q)), spec_(quadratic_polynomial(*quadratic_)) {}

ResidualFunctional::ResidualFunctional(GridTable table) : table_(table), spec_(std::move(table)) {}

double ResidualFunctional::evaluate(std::span<const double> x) const {
  if (!quadratic_) throw Error(ErrorCode::UnsupportedPair, "grid residual has no pointwise evaluation");
  const auto& q = *quadratic_;
  if (static_cast<Eigen::Index>(x.size()) != q.center.size()) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
  }
  Eigen::VectorXd z(q.center.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = x[static_cast<std::size_t>(i)] - q.center(i);
  return z.dot(q.a * z) + q.b.dot(z) + q.c;
}

ResidualFunctional residual(const MeanFieldFit& fit, const Measure& posterior) {
  if (fit.qstar.index() != posterior.index()) {
    throw Error(ErrorCode::RepresentationMismatch, "fit and posterior use different representations");
  }
  if (const auto* q = std::get_if<GaussianMeasure>(&fit.qstar)) {
    const auto& p = std::get<GaussianMeasure>(posterior);
    if (p.dim() != q->dim()) throw Error(ErrorCode::DimensionMismatch, "fit and posterior dimensions differ");
    ResidualFunctional::Quadratic quad;
    quad.center = q->mean();
    const Eigen::VectorXd shift = q->mean() - p.mean();
    quad.a = 0.5 * (p.precision() - q->precision());
    quad.b = p.precision() * shift;
    quad.c = 0.5 * shift.dot(p.precision() * shift) + 0.5 * (p.log_det_cov() - q->log_det_cov());
    return ResidualFunctional(std::move(quad));
  }
  const auto& qg = std::get<GridMeasure>(fit.qstar);
  const auto& pg = std::get<GridMeasure>(posterior);
  if (!same_axes(qg.axes(), pg.axes())) throw Error(ErrorCode::AxesMismatch, "fit and posterior grids differ");
  const double lq0 = log_sum_exp(qg.log_weights());
  const double lp0 = log_sum_exp(pg.log_weights());
  std::vector<double> values(qg.size(), 0.0);
  for (std::size_t k = 0; k < qg.size(); ++k) {
    const double lq = qg.log_weights()[k];
    if (lq == kNegInf) continue;
    const double lp = pg.log_weights()[k];
    if (lp == kNegInf) throw Error(ErrorCode::SupportMismatch, "q* has mass where the posterior has none");
    values[k] = (lq - lq0) - (lp - lp0);
  }
  return ResidualFunctional(full_table(qg, std::move(values)));
}

double stationarity_check(const MeanFieldFit& fit, const Measure& posterior, const ScoreBasis& scores) {
  const ResidualFunctional delta = residual(fit, posterior);
  double worst = 0.0;
  if (const auto* grid = std::get_if<GridMeasure>(&fit.qstar)) {
    const auto masses = grid->masses();
    const auto dv = tabulate(delta.functional(), *grid);
    for (const auto& s : scores.scores) {
      auto sv = tabulate(s, *grid);
      for (std::size_t k = 0; k < sv.size(); ++k) sv[k] *= dv[k] + 1.0;
      worst = std::max(worst, std::abs(weighted_sum(masses, sv)));
    }
    return worst;
  }
  const auto& g = std::get<GaussianMeasure>(fit.qstar);
  const Polynomial dp = delta.functional().polynomial() + 1.0;
  for (const auto& s : scores.scores) {
    worst = std::max(worst, std::abs(expect(g, s.polynomial() * dp)));
  }
  return worst;
}

}  // namespace vibias
