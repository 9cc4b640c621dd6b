#pragma once

#include "vibias/functional.hpp"
#include "vibias/measure.hpp"
#include "vibias/quadrature.hpp"

#include <span>
#include <vector>

namespace vibias {

/// Fixed-order compensated sum of masses[i] * values[i].
double weighted_sum(std::span<const double> masses, std::span<const double> values);

/// Exact weighted sum for grids; Wick moments for Gaussian polynomials;
/// internal quadrature for Gaussian box tails. GridTable on a Gaussian is an
/// UnsupportedPair.
double expect(const Measure& m, const FunctionalSpec& g, const QuadratureConfig& cfg = {});

double expect(const GridMeasure& m, std::span<const double> values);

struct QuadratureValue {
  double value = 0.0;
  QuadratureInfo info;
};

/// Gaussian probability of a box tail; integrates only over the engaged
/// coordinates using the exact Gaussian marginal.
QuadratureValue box_tail_probability(const GaussianMeasure& g, const BoxTail& box,
                                     const QuadratureConfig& cfg = {});

/// E_m[f g]. Symmetric in f and g.
double inner_product(const FunctionalSpec& f, const FunctionalSpec& g, const Measure& m,
                     const QuadratureConfig& cfg = {});

/// KL(q || p). Grids must share axes; Gaussians use the trace/log-det formula.
double kl_divergence(const Measure& q, const Measure& p);

/// Sum out every coordinate outside `block`. The block is treated as a set.
GridMeasure marginal(const GridMeasure& m, std::vector<std::size_t> block);

/// Max-norm distance between the joint masses and the product of block
/// marginals.
double product_defect(const GridMeasure& m, const BlockStructure& blocks);

bool is_product_measure(const GridMeasure& m, const BlockStructure& blocks,
                        double tol = 1e-10);

/// E_m[h | theta_block] tabulated on the block's sub-grid. The measure must
/// factor as (block) x (rest).
GridTable conditional_expectation(const FunctionalSpec& h, const GridMeasure& m,
                                  std::vector<std::size_t> block);

GridTable conditional_expectation(std::span<const double> h_values, const GridMeasure& m,
                                  std::vector<std::size_t> block);

/// Under a Gaussian whose covariance does not couple `block` with the rest,
/// E[p | theta_block] as a polynomial in the block coordinates.
Polynomial conditional_expectation(const Polynomial& p, const GaussianMeasure& g,
                                   std::vector<std::size_t> block);

}  // namespace vibias
