#pragma once

#include "vibias/functional.hpp"
#include "vibias/measure.hpp"
#include "vibias/quadrature.hpp"

#include <optional>
#include <vector>

namespace vibias {

/// h = u v with u and v on disjoint coordinates.
struct CrossCovariance {
  FunctionalSpec u;
  FunctionalSpec v;
  FunctionalSpec h;

  /// (u - E u)(v - E v) under qstar: a polynomial on Gaussians, a full-grid
  /// table on grids. Box tails on a Gaussian have no finite representation.
  FunctionalSpec interaction(const Measure& qstar) const;
};

/// Supported factor pairs: polynomial x polynomial, box tail x box tail and
/// table x table. BlockOverlap when the supports intersect, or when `blocks`
/// is given and u, v do not sit in two distinct single blocks.
CrossCovariance cross_cov_functional(const FunctionalSpec& u, const FunctionalSpec& v,
                                     const std::optional<BlockStructure>& blocks = std::nullopt);

struct LinearContrast {
  Polynomial h;
  Polynomial additive_part;     ///< sum a_i^2 theta_i^2
  Polynomial interaction_part;  ///< 2 sum_{i<j} a_i a_j theta_i theta_j
};

LinearContrast linear_contrast_variance(const std::vector<double>& a);

/// 1{theta_i > t_i for every set t_i}.
BoxTail joint_tail_indicator(std::vector<std::optional<double>> thresholds);

/// Product over blocks of the block-restricted exceedance probabilities.
double factorized_tail_probability(const BoxTail& box, const Measure& qstar, const BlockStructure& blocks,
                                   const QuadratureConfig& cfg = {});

Polynomial polynomial(std::size_t dim, std::vector<Monomial> terms);

}  // namespace vibias
