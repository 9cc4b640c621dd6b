#include "support.hpp"

#include "vibias/bias.hpp"
#include "vibias/expectation.hpp"
#include "vibias/functionals.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/tangent.hpp"

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

GaussianMeasure diag2(double a, double b, double ma = 0.0, double mb = 0.0) {
  return GaussianMeasure(Eigen::Vector2d(ma, mb), Eigen::Vector2d(a, b).asDiagonal());
}

}  // namespace

TEST(CrossCovariance, PolynomialExamples) {
  const Measure q{diag2(0.8, 1.1, 0.5, -0.3)};
  const CrossCovariance c = cross_cov_functional(X, Y, kBlocks);
  EXPECT_EQ(c.h.polynomial(), X * Y);
  const Polynomial want = (X - 0.5) * (Y + 0.3);
  EXPECT_LT((c.interaction(q).polynomial() - want).max_abs_coef(), 1e-15);
  EXPECT_LT((anova_decompose(c.h, q, kBlocks).interaction.polynomial() - want).max_abs_coef(), 1e-14);

  const CrossCovariance k = cross_cov_functional(Polynomial::constant(2, 2.0), Y);
  EXPECT_TRUE(k.interaction(q).polynomial().is_zero(1e-15));

  EXPECT_EQ(code_of([] { cross_cov_functional(X, X * Y); }), ErrorCode::BlockOverlap);
  EXPECT_EQ(code_of([] { cross_cov_functional(X, Y, BlockStructure::single_block(2)); }), ErrorCode::BlockOverlap);
}

TEST(CrossCovariance, AttachedInteractionMatchesGridAnova) {
  const GridMeasure g = discretize(diag2(0.75, 0.75), GridConfig{81, 6.0});
  const CrossCovariance c = cross_cov_functional(X * X, Y);
  const auto attached = tabulate(c.interaction(Measure{g}), g);
  const auto anova = tabulate(anova_decompose(c.h, Measure{g}, kBlocks).interaction, g);
  const double ex2 = ts::plain_expect(g, [](const auto& p) { return p[0] * p[0]; });
  EXPECT_NEAR(ex2, 0.75, 1e-6);  // discretization error only
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto p = g.node(k);
    EXPECT_NEAR(attached[k], anova[k], 1e-10);
    EXPECT_NEAR(attached[k], (p[0] * p[0] - ex2) * p[1], 1e-10);
  }
  // Box tails: the product collapses into one box.
  const CrossCovariance b = cross_cov_functional(BoxTail({1.0, std::nullopt}), BoxTail({std::nullopt, 0.5}));
  EXPECT_EQ(b.h.box_tail().active_coords(), (std::vector<std::size_t>{0, 1}));
  const auto bi = tabulate(b.interaction(Measure{g}), g);
  const auto ba = tabulate(anova_decompose(b.h, Measure{g}, kBlocks).interaction, g);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(bi[k], ba[k], 1e-10);
  EXPECT_EQ(code_of([&] { b.interaction(Measure{diag2(1, 1)}); }), ErrorCode::UnsupportedPair);
}

TEST(LinearContrast, SplitAndBias) {
  const LinearContrast e1 = linear_contrast_variance({1.0, 0.0});
  EXPECT_TRUE(e1.interaction_part.empty());
  EXPECT_EQ(e1.h, X * X);

  const GaussianMeasure p = correlated_pair(0.2);
  const MeanFieldFit fit = fit_meanfield_gaussian(p, kBlocks);
  for (auto [a, want] : {std::pair{std::vector<double>{1, 1}, 0.48}, std::pair{std::vector<double>{1, -1}, -0.32}}) {
    const LinearContrast c = linear_contrast_variance(a);
    EXPECT_EQ(c.additive_part + c.interaction_part, c.h);
    const Polynomial l = a[0] * X + a[1] * Y;
    EXPECT_EQ(c.h, l * l);
    const BiasReport r = bias_report(c.h, Measure{p}, fit);
    EXPECT_NEAR(r.exact, want, 1e-12);
    const BiasReport ri = bias_report(c.interaction_part, Measure{p}, fit);
    EXPECT_NEAR(r.linear, ri.linear, 1e-10);
  }
  EXPECT_EQ(code_of([] { linear_contrast_variance({0.0, 0.0}); }), ErrorCode::ZeroVector);
}

TEST(JointTail, Examples) {
  const BoxTail h = joint_tail_indicator({1.0, 1.0});
  const Measure id{diag2(1, 1)};
  EXPECT_NEAR(expect(id, h), 0.0251715, 1e-5);
  EXPECT_NEAR(expect(id, joint_tail_indicator({-std::numeric_limits<double>::infinity(), 0.7})), ts::normal_sf(0.7), 1e-10);
  EXPECT_NEAR(expect(id, joint_tail_indicator({std::nullopt, 0.7})), ts::normal_sf(0.7), 1e-10);
  EXPECT_EQ(code_of([] { joint_tail_indicator({std::nullopt, std::nullopt}); }), ErrorCode::InvalidArgument);

  const GaussianMeasure p = correlated_pair(0.2);
  const MeanFieldFit fit = fit_meanfield_gaussian(p, kBlocks);
  const double exact = expect(Measure{p}, h) - expect(fit.qstar, h);
  const double want = ts::bivariate_tail(1.0, 1.0, 0.2) - std::pow(ts::normal_sf(1.0 / std::sqrt(0.96)), 2);
  EXPECT_GT(exact, 0.0);
  EXPECT_NEAR(exact, want, 1e-9);
}

TEST(JointTail, FactorizesUnderProductMeasures) {
  ts::Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const Measure q{diag2(rng.uniform(0.3, 2), rng.uniform(0.3, 2), rng.uniform(-1, 1), rng.uniform(-1, 1))};
    const BoxTail box = joint_tail_indicator({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const double f = factorized_tail_probability(box, q, kBlocks);
    const auto& g = std::get<GaussianMeasure>(q);
    double want = 1.0;
    for (std::size_t i = 0; i < 2; ++i) want *= ts::normal_sf((*box.lower[i] - g.mean()(static_cast<Eigen::Index>(i))) / g.stddev(i));
    EXPECT_NEAR(f, want, 1e-10);
    EXPECT_NEAR(expect(q, box), f, 1e-6);
  }
  ts::Rng r2(62);
  const GridMeasure grid = ts::random_product_grid(r2, kBlocks);
  const BoxTail box = joint_tail_indicator({grid.axis(0)[2], grid.axis(1)[1]});
  EXPECT_NEAR(expect(Measure{grid}, box), factorized_tail_probability(box, Measure{grid}, kBlocks), 1e-14);
}

TEST(PolynomialBuilder, Examples) {
  const Polynomial z = polynomial(2, {});
  EXPECT_TRUE(z.empty());
  EXPECT_EQ(expect(Measure{correlated_pair(0.3)}, z), 0.0);
  const Polynomial two = polynomial(2, {{1, {1, 1}}, {1, {1, 1}}});
  ASSERT_EQ(two.terms().size(), 1u);
  EXPECT_EQ(two.terms()[0].coef, 2.0);
  EXPECT_NEAR(expect(Measure{correlated_pair(0.3)}, polynomial(2, {{1, {2, 2}}})), 1.18, 1e-14);
  EXPECT_EQ(code_of([] { polynomial(2, {{1, {1, 1, 0}}}); }), ErrorCode::DimensionMismatch);
}
