#include "support.hpp"

#include "vibias/expectation.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/tangent.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace vibias;
namespace ts = testing_support;
using ts::code_of;

namespace {

GaussianMeasure diag_gaussian(std::vector<double> v, std::vector<double> m = {}) {
  const auto d = static_cast<Eigen::Index>(v.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < m.size(); ++i) mu(static_cast<Eigen::Index>(i)) = m[i];
  return GaussianMeasure(mu, Eigen::Map<Eigen::VectorXd>(v.data(), d).asDiagonal());
}

// Random block-diagonal Gaussian with random block structure.
std::pair<GaussianMeasure, BlockStructure> random_product_gaussian(ts::Rng& rng, std::size_t d) {
  std::vector<std::vector<std::size_t>> parts(2 + rng.below(d - 1));
  for (std::size_t i = 0; i < d; ++i) parts[i < parts.size() ? i : rng.below(parts.size())].push_back(i);
  const BlockStructure blocks(parts, d);
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (const auto& blk : blocks.blocks()) {
    const Eigen::MatrixXd c = ts::random_spd(rng, blk.size());
    for (std::size_t a = 0; a < blk.size(); ++a) {
      for (std::size_t b = 0; b < blk.size(); ++b) {
        cov(static_cast<Eigen::Index>(blk[a]), static_cast<Eigen::Index>(blk[b])) =
            c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
  Eigen::VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i) mu(i) = rng.uniform(-1, 1);
  return {GaussianMeasure(mu, cov), blocks};
}

}  // namespace

TEST(ScoreBasis, GaussianDiagonal) {
  const GaussianMeasure q = diag_gaussian({0.7, 1.3}, {0.2, -0.4});
  const ScoreBasis b = score_basis(Measure{q}, BlockStructure::fully_factorized(2));
  ASSERT_EQ(b.scores.size(), 4u);
  EXPECT_EQ(b.family, FamilyTag::GaussianMeanField);
  EXPECT_EQ(b.block_index, (std::vector<std::size_t>{0, 0, 1, 1}));
  const Polynomial x1 = Polynomial::coordinate(2, 0) - 0.2;
  const Polynomial x2 = Polynomial::coordinate(2, 1) + 0.4;
  const std::vector<Polynomial> want{x1, x1 * x1 - 0.7, x2, x2 * x2 - 1.3};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_LT((b.scores[j].polynomial() - want[j]).max_abs_coef(), 1e-14) << j;
    EXPECT_NEAR(expect(Measure{q}, b.scores[j]), 0.0, 1e-12);
  }
}

TEST(ScoreBasis, GridFactorsAreCenteredIndicatorsOfFullRank) {
  ts::Rng rng(41);
  const auto blocks = BlockStructure::fully_factorized(2);
  const GridMeasure g = ts::random_product_grid(rng, blocks, 5, 0);
  const ScoreBasis b = score_basis(Measure{g}, blocks);
  EXPECT_EQ(b.family, FamilyTag::GridProduct);
  ASSERT_EQ(b.scores.size(), 8u);
  const auto n = static_cast<Eigen::Index>(b.scores.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_NEAR(expect(Measure{g}, b.scores[static_cast<std::size_t>(i)]), 0.0, 1e-12);
    for (Eigen::Index j = 0; j < n; ++j) {
      gram(i, j) = inner_product(b.scores[static_cast<std::size_t>(i)], b.scores[static_cast<std::size_t>(j)], Measure{g});
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  lu.setThreshold(1e-10);
  EXPECT_EQ(lu.rank(), 8);
  // Scores depend on their own block only.
  for (std::size_t j = 0; j < b.scores.size(); ++j) {
    const std::size_t other = 1 - b.block_index[j];
    const GridTable t = conditional_expectation(b.scores[j], g, blocks.block(other));
    for (double v : t.values) EXPECT_NEAR(v, 0.0, 1e-10);
  }
}

TEST(ScoreBasis, RequiresConvergedProductFit) {
  const GaussianMeasure post(Eigen::VectorXd::Zero(2), ts::pair_cov(0.5));
  MeanFieldFit fit = fit_meanfield_gaussian(post, BlockStructure::fully_factorized(2));
  fit.converged = false;
  EXPECT_EQ(code_of([&] { score_basis(fit); }), ErrorCode::NotConverged);
  EXPECT_EQ(code_of([&] { score_basis(Measure{post}, BlockStructure::fully_factorized(2)); }),
            ErrorCode::NotProductMeasure);
}

TEST(Anova, SpecExamples) {
  const auto blocks = BlockStructure::fully_factorized(2);
  const Measure q{diag_gaussian({0.6, 1.7})};
  const Polynomial x = Polynomial::coordinate(2, 0), y = Polynomial::coordinate(2, 1);

  const AnovaDecomposition a = anova_decompose(x * y, q, blocks);
  EXPECT_EQ(a.mean, 0.0);
  EXPECT_TRUE(a.block_components[0].polynomial().is_zero());
  EXPECT_TRUE(a.block_components[1].polynomial().is_zero());
  EXPECT_EQ(a.interaction.polynomial(), x * y);

  const AnovaDecomposition b = anova_decompose(x * x + y, q, blocks);
  EXPECT_TRUE(b.interaction.polynomial().is_zero(1e-14));
  EXPECT_NEAR(b.mean, 0.6, 1e-15);

  const Measure q75{diag_gaussian({0.75, 0.75})};
  const AnovaDecomposition c = anova_decompose((x + y) * (x + y), q75, blocks);
  EXPECT_NEAR(c.mean, 1.5, 1e-14);
  EXPECT_LT((c.block_components[0].polynomial() - (x * x - 0.75)).max_abs_coef(), 1e-14);
  EXPECT_LT((c.block_components[1].polynomial() - (y * y - 0.75)).max_abs_coef(), 1e-14);
  EXPECT_LT((c.interaction.polynomial() - 2.0 * (x * y)).max_abs_coef(), 1e-14);

  // Same example by direct grid sums.
  const GridMeasure g = discretize(diag_gaussian({0.75, 0.75}), GridConfig{121, 6.0});
  const AnovaDecomposition cg = anova_decompose((x + y) * (x + y), Measure{g}, blocks);
  const double mx = ts::plain_expect(g, [](const auto& p) { return p[0] * p[0]; });
  EXPECT_NEAR(cg.mean, 2.0 * mx, 1e-12);
  const auto vals = tabulate(cg.interaction, g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto p = g.node(k);
    EXPECT_NEAR(vals[k], 2.0 * p[0] * p[1], 1e-10);
  }
  EXPECT_EQ(code_of([&] { anova_decompose(x * y, Measure{GaussianMeasure(Eigen::VectorXd::Zero(2), ts::pair_cov(0.3))}, blocks); }),
            ErrorCode::NotProductMeasure);
}

TEST(Anova, GridInvariantsOnRandomProducts) {
  ts::Rng rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 2 + rng.below(2);
    const BlockStructure blocks = (d == 3 && rng.below(2)) ? BlockStructure({{0}, {1, 2}}, 3) : BlockStructure::fully_factorized(d);
    const GridMeasure g = ts::random_product_grid(rng, blocks, 3, 3);
    std::vector<double> h(g.size());
    for (auto& v : h) v = rng.uniform(-1, 1);
    const FunctionalSpec hs = full_table(g, h);
    const AnovaDecomposition a = anova_decompose(hs, Measure{g}, blocks);
    std::vector<double> rebuilt(g.size(), a.mean);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      EXPECT_NEAR(expect(Measure{g}, a.block_components[b]), 0.0, 1e-10);
      const auto comp = tabulate(a.block_components[b], g);
      for (std::size_t k = 0; k < g.size(); ++k) rebuilt[k] += comp[k];
      const GridTable ce = conditional_expectation(a.interaction, g, blocks.block(b));
      for (double v : ce.values) EXPECT_NEAR(v, 0.0, 1e-10);
    }
    const auto inter = tabulate(a.interaction, g);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(rebuilt[k] + inter[k], h[k], 1e-10);
  }
}

TEST(TangentProject, Examples) {
  const auto blocks = BlockStructure::fully_factorized(2);
  const GaussianMeasure q = diag_gaussian({0.96, 0.96});
  const MeanFieldFit fit = fit_from_member(Measure{q}, Measure{q}, blocks);
  const Polynomial x = Polynomial::coordinate(2, 0), y = Polynomial::coordinate(2, 1);
  const TangentProjection p = tangent_project(x * y + x, fit);
  EXPECT_EQ(p.g_par.polynomial(), x);
  EXPECT_EQ(p.g_perp.polynomial(), x * y);
  EXPECT_TRUE(tangent_project(x * x * x - 2.0 * y, fit).g_perp.polynomial().is_zero(1e-14));
  const Polynomial u = x * x - 0.96, v = y * y * y + 3.0 * y;
  EXPECT_LT((tangent_project(u * v, fit).g_perp.polynomial() - u * v).max_abs_coef(), 1e-13);
}

TEST(TangentProject, PythagorasIdempotenceAnnihilation) {
  ts::Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.below(3);
    const auto [q, blocks] = random_product_gaussian(rng, d);
    const MeanFieldFit fit = fit_from_member(Measure{q}, Measure{q}, blocks);
    const Polynomial h = ts::random_polynomial(rng, d, 3);
    const TangentProjection p = tangent_project(h, fit);
    const double eh = expect(q, h);
    const Polynomial hc = h - eh, pc = p.g_par.polynomial() - eh;
    const double lhs = expect(q, hc * hc);
    const double rhs = expect(q, pc * pc) + expect(q, p.g_perp.polynomial() * p.g_perp.polynomial());
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, lhs));
    EXPECT_NEAR(expect(q, pc * p.g_perp.polynomial()), 0.0, 1e-10 * std::max(1.0, lhs));

    const TangentProjection again = tangent_project(p.g_par, fit);
    EXPECT_LT((again.g_par.polynomial() - p.g_par.polynomial()).max_abs_coef(), 1e-10);
    EXPECT_TRUE(again.g_perp.polynomial().is_zero(1e-10));

    for (const auto& blk : blocks.blocks()) {
      EXPECT_TRUE(conditional_expectation(p.g_perp.polynomial(), q, blk).is_zero(1e-10));
    }
  }
}

TEST(Orthogonality, SpecExamples) {
  const auto blocks = BlockStructure::fully_factorized(2);
  const GaussianMeasure post(Eigen::VectorXd::Zero(2), ts::pair_cov(0.5));
  const MeanFieldFit fit = fit_meanfield_gaussian(post, blocks);
  const ResidualFunctional delta = residual(fit, Measure{post});
  const OrthogonalityReport r = orthogonality_report(delta, score_basis(fit), fit.qstar);
  EXPECT_LE(r.max_score_inner, 1e-10);
  EXPECT_LE(r.max_probe_inner, 1e-10);
  EXPECT_EQ(r.probes, 10u);
  EXPECT_EQ(r.seed, kDefaultProbeSeed);

  const GaussianMeasure ind = GaussianMeasure(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const MeanFieldFit self = fit_meanfield_gaussian(ind, blocks);
  EXPECT_EQ(orthogonality_report(residual(self, Measure{ind}), score_basis(self), self.qstar).value(), 0.0);

  const GridMeasure g = discretize(post, Axes{linspace(-6, 6, 121), linspace(-6, 6, 121)});
  const MeanFieldFit cavi = fit_meanfield_cavi(g, blocks);
  const OrthogonalityReport rg = orthogonality_report(residual(cavi, Measure{g}), score_basis(cavi), cavi.qstar);
  EXPECT_LE(rg.value(), 1e-6);
  EXPECT_LE(rg.value(), std::max(1e-8, 10.0 * cavi.stationarity_residual));
}

TEST(Orthogonality, ProbesAreSeededAndBlockAdditive) {
  const BlockStructure blocks({{0, 2}, {1}}, 3);
  const auto a = block_additive_probes(blocks, 5, 7);
  const auto b = block_additive_probes(blocks, 5, 7);
  const auto c = block_additive_probes(blocks, 5, 8);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    for (const auto& t : a[i].terms()) {
      const bool b0 = t.exponents[0] + t.exponents[2] > 0, b1 = t.exponents[1] > 0;
      EXPECT_FALSE(b0 && b1);
      unsigned deg = 0;
      for (unsigned e : t.exponents) deg += e;
      EXPECT_LE(deg, 2u);
    }
  }
  EXPECT_FALSE(a[0] == c[0]);
}

TEST(Orthogonality, HoldsAtRandomConvergedFits) {
  ts::Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.below(3);
    Eigen::VectorXd mu(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = rng.uniform(-1, 1);
    const GaussianMeasure post(mu, ts::random_spd(rng, d));
    const auto blocks = BlockStructure::fully_factorized(d);
    const MeanFieldFit fit = fit_meanfield_gaussian(post, blocks);
    const auto r = orthogonality_report(residual(fit, Measure{post}), score_basis(fit), fit.qstar, 10, 100 + static_cast<std::uint64_t>(trial));
    EXPECT_LE(r.value(), std::max(1e-8, 10.0 * fit.stationarity_residual));
  }
}
