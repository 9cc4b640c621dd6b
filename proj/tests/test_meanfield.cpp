#include "support.hpp"

#include "vibias/config.hpp"
#include "vibias/expectation.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/tangent.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace vibias;
namespace ts = testing_support;
using ts::code_of;

namespace {

const GaussianMeasure& gauss(const MeanFieldFit& f) { return std::get<GaussianMeasure>(f.qstar); }
const GridMeasure& grid(const MeanFieldFit& f) { return std::get<GridMeasure>(f.qstar); }

// KL(N(m, diag v) || N(m, S)) minimized coordinate-wise by golden section.
std::vector<double> numeric_diag_fit(const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd p = s.inverse();
  std::vector<double> v(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    // The diagonal KL separates: f(v) = (p_ii v - log v) / 2.
    auto f = [&](double x) { return 0.5 * (p(i, i) * x - std::log(x)); };
    double lo = 1e-6, hi = 50.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      (f(a) < f(b) ? hi : lo) = (f(a) < f(b) ? b : a);
    }
    v[static_cast<std::size_t>(i)] = 0.5 * (lo + hi);
  }
  return v;
}

GridMeasure gaussian_grid(double rho, std::size_t n = 121) {
  return discretize(GaussianMeasure(Eigen::VectorXd::Zero(2), ts::pair_cov(rho)),
                    Axes{linspace(-6, 6, n), linspace(-6, 6, n)});
}

double grid_variance(const GridMeasure& g, std::size_t axis) {
  const double m = ts::plain_expect(g, [&](const auto& x) { return x[axis]; });
  return ts::plain_expect(g, [&](const auto& x) { return (x[axis] - m) * (x[axis] - m); });
}

}  // namespace

TEST(GaussianFit, SpecExamples) {
  const auto blocks = BlockStructure::fully_factorized(2);
  const MeanFieldFit a = fit_meanfield_gaussian(GaussianMeasure(Eigen::VectorXd::Zero(2), ts::pair_cov(0.5)), blocks);
  const auto va = numeric_diag_fit(ts::pair_cov(0.5));
  EXPECT_NEAR(gauss(a).covariance()(0, 0), va[0], 1e-7);
  EXPECT_NEAR(gauss(a).covariance()(1, 1), 0.75, 1e-14);
  EXPECT_EQ(gauss(a).covariance()(0, 1), 0.0);
  EXPECT_EQ(gauss(a).mean().norm(), 0.0);
  EXPECT_TRUE(a.converged);
  EXPECT_LE(a.stationarity_residual, 1e-10);

  const MeanFieldFit b = fit_meanfield_gaussian(GaussianMeasure(Eigen::VectorXd::Zero(2), Eigen::Vector2d(2.0, 0.5).asDiagonal()), blocks);
  EXPECT_NEAR(b.kl_trace.back(), 0.0, 1e-15);
  EXPECT_NEAR(gauss(b).covariance()(0, 0), 2.0, 1e-15);

  Eigen::MatrixXd s(2, 2);
  s << 2, 0.6, 0.6, 1;
  Eigen::VectorXd mu(2);
  mu << 0.3, -1.2;
  const MeanFieldFit c = fit_meanfield_gaussian(GaussianMeasure(mu, s), blocks);
  const auto vc = numeric_diag_fit(s);
  EXPECT_NEAR(gauss(c).covariance()(0, 0), 1.64, 1e-12);
  EXPECT_NEAR(gauss(c).covariance()(1, 1), 0.82, 1e-12);
  EXPECT_NEAR(gauss(c).covariance()(1, 1), vc[1], 1e-7);
  EXPECT_EQ(gauss(c).mean(), mu);
}

TEST(GaussianFit, PrecisionMatchingAndOptimality) {
  ts::Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.below(3);
    std::vector<std::vector<std::size_t>> parts(1 + rng.below(d));
    for (std::size_t i = 0; i < d; ++i) parts[i < parts.size() ? i : rng.below(parts.size())].push_back(i);
    const BlockStructure blocks(parts, d);
    Eigen::VectorXd mu(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = rng.uniform(-2, 2);
    const GaussianMeasure post(mu, ts::random_spd(rng, d));
    const MeanFieldFit fit = fit_meanfield_gaussian(post, blocks);
    const Eigen::MatrixXd pq = gauss(fit).precision();
    for (const auto& blk : blocks.blocks()) {
      for (std::size_t i : blk) {
        for (std::size_t j : blk) {
          const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
          EXPECT_NEAR(pq(ii, jj), post.precision()(ii, jj), 1e-10);
        }
      }
    }
    const double kl0 = kl_divergence(fit.qstar, Measure{post});
    for (int dir = 0; dir < 20; ++dir) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(mu.size(), mu.size());
      for (const auto& blk : blocks.blocks()) {
        for (std::size_t i : blk) {
          for (std::size_t j : blk) {
            if (j < i) continue;
            const double r = rng.uniform(-1, 1);
            e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
            e(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
          }
        }
      }
      Eigen::VectorXd dm(mu.size());
      for (Eigen::Index i = 0; i < dm.size(); ++i) dm(i) = rng.uniform(-1, 1);
      const double eps = 1e-3;
      const GaussianMeasure moved(mu + eps * dm, gauss(fit).covariance() + eps * e);
      EXPECT_GE(kl_divergence(Measure{moved}, Measure{post}), kl0 - 1e-9);
    }
  }
}

TEST(GaussianFit, BlockStructureLeavesWithinBlockCorrelation) {
  const Eigen::MatrixXd s = default_gaussian3_cov();
  const BlockStructure blocks({{0, 2}, {1}}, 3);
  const MeanFieldFit fit = fit_meanfield_gaussian(GaussianMeasure(Eigen::VectorXd::Zero(3), s), blocks);
  const Eigen::MatrixXd v = gauss(fit).covariance();
  EXPECT_EQ(v(0, 1), 0.0);
  EXPECT_EQ(v(1, 2), 0.0);
  EXPECT_NE(v(0, 2), 0.0);
}

TEST(Cavi, ProductPosteriorIsFixedPoint) {
  ts::Rng rng(32);
  const auto blocks = BlockStructure::fully_factorized(2);
  const GridMeasure g = ts::random_product_grid(rng, blocks);
  const MeanFieldFit fit = fit_meanfield_cavi(g, blocks);
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(fit.sweeps, 1u);
  EXPECT_NEAR(fit.kl_trace.back(), 0.0, 1e-10);
}

TEST(Cavi, CorrelatedGaussianGrid) {
  const GridMeasure post = gaussian_grid(0.5);
  const MeanFieldFit fit = fit_meanfield_cavi(post, BlockStructure::fully_factorized(2));
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.kl_trace.back(), -0.5 * std::log(0.75), 2e-3);
  EXPECT_NEAR(grid_variance(grid(fit), 0), 0.75, 5e-3);
  EXPECT_NEAR(grid_variance(grid(fit), 1), 0.75, 5e-3);
  EXPECT_LE(fit.stationarity_residual, 1e-6);
  for (std::size_t k = 1; k < fit.kl_trace.size(); ++k) EXPECT_LE(fit.kl_trace[k], fit.kl_trace[k - 1] + 1e-10);
  EXPECT_NEAR(kl_divergence(fit.qstar, Measure{post}), fit.kl_trace.back(), 1e-12);
}

TEST(Cavi, BimodalFixedPoint) {
  Axes ax{linspace(-3, 3, 41), linspace(-3, 3, 41)};
  std::vector<double> lw;
  for (double x : ax[0]) {
    for (double y : ax[1]) lw.push_back(-std::pow(x * x - 1.0, 2) - std::pow(y - x, 2));
  }
  const GridMeasure post = normalize(GridMeasure(ax, lw));
  const auto blocks = BlockStructure::fully_factorized(2);
  const MeanFieldFit fit = fit_meanfield_cavi(post, blocks);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.stationarity_residual, fit.tol);
  EXPECT_GT(fit.kl_trace.back(), 0.0);
  // One more coordinate update from q* must not move it.
  const GridMeasure& q = grid(fit);
  const GridMeasure qy = marginal(q, {1});
  const GridMeasure qx = marginal(q, {0});
  std::vector<double> upd(ax[0].size());
  for (std::size_t i = 0; i < upd.size(); ++i) {
    for (std::size_t j = 0; j < ax[1].size(); ++j) upd[i] += qy.mass(j) * post.log_weights()[i * 41 + j];
  }
  const GridMeasure again = normalize(GridMeasure({ax[0]}, upd));
  for (std::size_t i = 0; i < upd.size(); ++i) EXPECT_NEAR(again.mass(i), qx.mass(i), 1e-8);
}

TEST(Cavi, KlMonotoneOnRandomGrids) {
  ts::Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto blocks = BlockStructure::fully_factorized(2);
    const GridMeasure base = ts::random_product_grid(rng, BlockStructure::single_block(2), 5, 3);
    const MeanFieldFit fit = fit_meanfield_cavi(base, blocks);
    for (std::size_t k = 1; k < fit.kl_trace.size(); ++k) EXPECT_LE(fit.kl_trace[k], fit.kl_trace[k - 1] + 1e-10);
    if (fit.converged) {
      EXPECT_LE(fit.stationarity_residual, fit.tol);
    }
    const ResidualFunctional delta = residual(fit, Measure{base});
    const std::vector<double>& dv = delta.table().values;
    const GridMeasure& q = grid(fit);
    double z = 0.0, m = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
      z += q.mass(k) * std::exp(-dv[k]);
      m += q.mass(k) * dv[k];
    }
    EXPECT_NEAR(z, 1.0, 1e-8);
    EXPECT_NEAR(m, fit.kl_trace.back(), 1e-8);
  }
}

TEST(Cavi, RejectsBadInput) {
  const GridMeasure raw({{0, 1}, {0, 1}}, {0, 0, 0, 0});
  EXPECT_EQ(code_of([&] { fit_meanfield_cavi(raw, BlockStructure::fully_factorized(2)); }), ErrorCode::NotNormalized);
  EXPECT_EQ(code_of([&] { fit_meanfield_cavi(normalize(raw), BlockStructure::fully_factorized(3)); }),
            ErrorCode::DimensionMismatch);
}

TEST(Residual, GaussianExamples) {
  const GaussianMeasure post(Eigen::VectorXd::Zero(2), ts::pair_cov(0.5));
  const MeanFieldFit fit = fit_meanfield_gaussian(post, BlockStructure::fully_factorized(2));
  const ResidualFunctional d = residual(fit, Measure{post});
  const double pt[2] = {1.0, 1.0};
  EXPECT_NEAR(d.evaluate(pt), -0.522826, 1e-6);
  ts::Rng rng(34);
  for (int i = 0; i < 20; ++i) {
    const double x[2] = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    EXPECT_NEAR(d.evaluate(x), gauss(fit).log_density(x) - post.log_density(x), 1e-12);
    EXPECT_NEAR(d.evaluate(x), -(0.5 / 0.75) * x[0] * x[1] + 0.143841, 1e-6);
  }
  const Polynomial& poly = d.functional().polynomial();
  const double z = ts::gaussian2_quadrature(Eigen::VectorXd::Zero(2), gauss(fit).covariance(), [&](double a, double b) {
    const double q[2] = {a, b};
    return std::exp(-poly.evaluate(q));
  });
  EXPECT_NEAR(z, 1.0, 1e-8);
  EXPECT_NEAR(expect(fit.qstar, poly), kl_divergence(fit.qstar, Measure{post}), 1e-12);

  const GaussianMeasure p2(Eigen::VectorXd::Zero(2), ts::pair_cov(0.2));
  const MeanFieldFit f2 = fit_meanfield_gaussian(p2, BlockStructure::fully_factorized(2));
  const FunctionalSpec d2 = residual(f2, Measure{p2}).functional();
  const double m2 = expect(f2.qstar, d2);
  EXPECT_NEAR(inner_product(d2, d2, f2.qstar) - m2 * m2, 0.04, 1e-10);

  const MeanFieldFit self = fit_from_member(Measure{post}, Measure{post}, BlockStructure::single_block(2));
  EXPECT_TRUE(residual(self, Measure{post}).functional().polynomial().is_zero(1e-15));
}

TEST(Residual, RepresentationMismatch) {
  const GaussianMeasure post(Eigen::VectorXd::Zero(2), ts::pair_cov(0.5));
  const MeanFieldFit fit = fit_meanfield_gaussian(post, BlockStructure::fully_factorized(2));
  EXPECT_EQ(code_of([&] { residual(fit, Measure{gaussian_grid(0.5, 11)}); }), ErrorCode::RepresentationMismatch);
}

TEST(Stationarity, DetectsNonOptimalMember) {
  const GaussianMeasure post(Eigen::VectorXd::Zero(2), ts::pair_cov(0.5));
  const auto blocks = BlockStructure::fully_factorized(2);
  const MeanFieldFit fit = fit_meanfield_gaussian(post, blocks);
  EXPECT_LE(stationarity_check(fit, Measure{post}, score_basis(fit)), 1e-10);
  const GaussianMeasure off(Eigen::VectorXd::Zero(2), gauss(fit).covariance() + 0.1 * Eigen::MatrixXd::Identity(2, 2));
  const MeanFieldFit bad = fit_from_member(Measure{off}, Measure{post}, blocks);
  EXPECT_GT(bad.stationarity_residual, 1e-3);
  EXPECT_FALSE(bad.converged);
  EXPECT_GT(bad.kl_trace.back(), fit.kl_trace.back());
}
