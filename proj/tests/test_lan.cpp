#include "support.hpp"

#include "vibias/lan.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace vibias;
namespace ts = testing_support;
using ts::code_of;

namespace {

const Polynomial X = Polynomial::coordinate(2, 0);
const Polynomial Y = Polynomial::coordinate(2, 1);
const auto kBlocks = BlockStructure::fully_factorized(2);

Eigen::MatrixXd fd_hessian(const Polynomial& p, const Eigen::VectorXd& at, double h) {
  const auto d = at.size();
  Eigen::MatrixXd out(d, d);
  auto f = [&](Eigen::VectorXd x) { return p.evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(d))); };
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd a = at, b = at, c = at, e = at;
      a(i) += h; a(j) += h;
      b(i) += h; b(j) -= h;
      c(i) -= h; c(j) += h;
      e(i) -= h; e(j) -= h;
      out(i, j) = (f(a) - f(b) - f(c) + f(e)) / (4 * h * h);
    }
  }
  return out;
}

LanExperiment pair_experiment(double rho, Eigen::Vector2d mu = Eigen::Vector2d::Zero(),
                              std::vector<long> n = {10, 100, 1000}) {
  return LanExperiment::make(mu, ts::pair_cov(rho), std::move(n), kBlocks);
}

}  // namespace

TEST(Hessian, Examples) {
  const Eigen::Vector2d at(0.7, -1.3);
  Eigen::Matrix2d off;
  off << 0, 1, 1, 0;
  EXPECT_EQ(hessian_at(X * Y, at), Eigen::MatrixXd(off));
  Eigen::Matrix2d sq;
  sq << 2, 0, 0, 0;
  EXPECT_EQ(hessian_at(X * X, at), Eigen::MatrixXd(sq));
  const Polynomial cube = X * X * X;
  const Eigen::MatrixXd h = hessian_at(cube, Eigen::Vector2d(2, 0));
  EXPECT_NEAR(h(0, 0), 12.0, 1e-15);
  EXPECT_LT((h - fd_hessian(cube, Eigen::Vector2d(2, 0), 1e-4)).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_EQ(code_of([] { hessian_at(BoxTail({1.0, 1.0}), Eigen::Vector2d::Zero()); }), ErrorCode::NotPolynomial);
}

TEST(Hessian, MatchesFiniteDifferencesOnRandomPolynomials) {
  ts::Rng rng(71);
  for (int i = 0; i < 30; ++i) {
    const std::size_t d = 1 + rng.below(3);
    const Polynomial p = ts::random_polynomial(rng, d, 4);
    Eigen::VectorXd at(static_cast<Eigen::Index>(d));
    for (Eigen::Index k = 0; k < at.size(); ++k) at(k) = rng.uniform(-1.5, 1.5);
    const Eigen::MatrixXd h = hessian_at(p, at);
    EXPECT_EQ(h, h.transpose());
    EXPECT_LT((h - fd_hessian(p, at, 1e-4)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(PredictBias, Examples) {
  const Eigen::MatrixXd s = ts::pair_cov(0.3);
  const Eigen::MatrixXd v = 0.91 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::Matrix2d off, sq;
  off << 0, 1, 1, 0;
  sq << 2, 0, 0, 0;
  EXPECT_NEAR(predict_bias(off, s, v, 100), 0.003, 1e-15);
  EXPECT_NEAR(predict_bias(sq, s, v, 100), 0.0009, 1e-15);
  EXPECT_EQ(predict_bias(off, s, s, 7), 0.0);
  EXPECT_EQ(code_of([&] { predict_bias(Eigen::MatrixXd::Identity(3, 3), s, v, 1); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { predict_bias(off, s, v, 0); }), ErrorCode::InvalidArgument);
}

TEST(PredictBias, OffDiagonalContraction) {
  ts::Rng rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.below(3);
    const auto n = static_cast<Eigen::Index>(d);
    const Eigen::MatrixXd s = ts::random_spd(rng, d);
    const LanExperiment e = LanExperiment::make(Eigen::VectorXd::Zero(n), s, {1}, BlockStructure::fully_factorized(d));
    Eigen::MatrixXd h(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) h(i, j) = h(j, i) = (i == j) ? 0.0 : rng.uniform(-2, 2);
    }
    double want = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) want += h(i, j) * s(i, j);
      }
    }
    EXPECT_NEAR(predict_bias(h, e.sigma, e.v, 3), want / 6.0, 1e-12);
  }
}

TEST(LanExperiment, InvariantsAndErrors) {
  const LanExperiment e = pair_experiment(0.3);
  EXPECT_EQ(e.v(0, 1), 0.0);
  EXPECT_NEAR(e.v(0, 0), 0.91, 1e-14);
  EXPECT_LE(e.scale_commutation_residual, 1e-12);
  EXPECT_EQ(code_of([] { pair_experiment(0.3, Eigen::Vector2d::Zero(), {}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { pair_experiment(0.3, Eigen::Vector2d::Zero(), {10, 0}); }), ErrorCode::InvalidArgument);
}

TEST(RunSweep, CrossProduct) {
  const LanSweepResult r = run_sweep(pair_experiment(0.3, Eigen::Vector2d(2, -1)), X * Y);
  ASSERT_EQ(r.points.size(), 3u);
  const double want[3] = {0.03, 0.003, 0.0003};
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.points[k].measured, want[k], 1e-12);
    EXPECT_NEAR(r.points[k].measured, r.points[k].predicted, 1e-12);
    EXPECT_NEAR(r.points[k].predicted * static_cast<double>(r.points[k].n), r.trace_coeff, 1e-12);
  }
  EXPECT_NEAR(r.slope, -1.0, 1e-6);
  EXPECT_NEAR(r.limit_n_bias, 0.3, 1e-12);
  EXPECT_FALSE(r.degenerate);
}

TEST(RunSweep, LinearIsUnbiased) {
  const LanSweepResult r = run_sweep(pair_experiment(0.3, Eigen::Vector2d(2, -1)), X);
  for (const auto& p : r.points) {
    EXPECT_LE(std::abs(p.measured), kZeroBias);
    EXPECT_FALSE(p.ratio.has_value());
  }
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.slope, std::numeric_limits<double>::infinity());
}

TEST(RunSweep, QuarticAgainstMomentOracle) {
  const Eigen::Vector2d mu(2, -1);
  const LanExperiment e = pair_experiment(0.3, mu);
  const Polynomial g = X * X * X * X;
  const LanSweepResult r = run_sweep(e, g);
  for (const auto& p : r.points) {
    const double n = static_cast<double>(p.n);
    const double oracle = ts::raw_moment(mu, e.sigma / n, g) - ts::raw_moment(mu, e.v / n, g);
    EXPECT_NEAR(p.measured, oracle, 1e-12 * std::max(1.0, std::abs(oracle)));
  }
  // tr(H (sigma - v)) / 2 with H_11 = 12 mu_1^2.
  EXPECT_NEAR(r.trace_coeff, 6.0 * 4.0 * 0.09, 1e-12);
  EXPECT_NEAR(r.slope, -1.0, 0.02);
  EXPECT_GT(std::abs(r.points[0].measured * 10.0 - r.trace_coeff), 1e-3);  // O(1/n^2) visible at n = 10
  EXPECT_NEAR(r.limit_n_bias, r.trace_coeff, 1e-2);
}

TEST(RunSweep, QuadraticsAreExactOnRandomCovariances) {
  ts::Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.below(2);
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::VectorXd mu(n);
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = rng.uniform(-3, 3);
    const LanExperiment e = LanExperiment::make(mu, ts::random_spd(rng, d), {5, 50, 500}, BlockStructure::fully_factorized(d));
    const Polynomial g = ts::random_polynomial(rng, d, 2);
    const LanSweepResult r = run_sweep(e, g);
    for (const auto& p : r.points) EXPECT_NEAR(p.measured, p.predicted, 1e-12);
    const std::size_t i = rng.below(d), j = (i + 1) % d;
    Exponents ex(d, 0);
    ex[i] = 1;
    ex[j] = 1;
    const LanSweepResult c = run_sweep(e, Polynomial(d, {{1.0, ex}}));
    for (const auto& p : c.points) {
      EXPECT_NEAR(p.measured * static_cast<double>(p.n), e.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 1e-12);
    }
    if (!c.degenerate) {
      EXPECT_NEAR(c.slope, -1.0, 0.02);
    }
  }
}

TEST(TangentAudit, Examples) {
  const LanExperiment e = pair_experiment(0.3, Eigen::Vector2d(2, -1));
  const TangentAudit lin = tangent_functional_audit(e, X + Y);
  EXPECT_EQ(lin.trace_coeff, 0.0);
  EXPECT_TRUE(lin.first_order_bias_vanishes);

  const TangentAudit sq = tangent_functional_audit(e, X * X + Y * Y);
  EXPECT_NEAR(sq.trace_coeff, 0.18, 1e-12);
  EXPECT_NEAR(sq.measured_n_bias, 0.18, 1e-12);
  EXPECT_FALSE(sq.first_order_bias_vanishes);
  EXPECT_FALSE(sq.note.empty());
  EXPECT_EQ(sq.n, 1000);

  const TangentAudit diag = tangent_functional_audit(pair_experiment(0.0), X * X + Y * Y);
  EXPECT_EQ(diag.trace_coeff, 0.0);
  EXPECT_TRUE(diag.first_order_bias_vanishes);

  EXPECT_EQ(code_of([&] { tangent_functional_audit(e, X * Y); }), ErrorCode::NotBlockAdditive);
}
