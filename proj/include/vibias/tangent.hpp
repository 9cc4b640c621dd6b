#pragma once

#include "vibias/functional.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/quadrature.hpp"

#include <cstdint>
#include <vector>

namespace vibias {

enum class FamilyTag { GaussianMeanField, GridProduct };

std::string_view to_string(FamilyTag tag) noexcept;

/// Centered score functions spanning the tangent space of the family at q*.
struct ScoreBasis {
  std::vector<FunctionalSpec> scores;
  FamilyTag family;
  std::vector<std::size_t> block_index;
};

/// Gaussian: per block, centered linear and quadratic monomials of the block
/// coordinates. Grid: per block factor, centered node indicators with the
/// last node dropped.
ScoreBasis score_basis(const MeanFieldFit& fit);
ScoreBasis score_basis(const Measure& qstar, const BlockStructure& blocks);

/// h = mean + sum_b block_components[b] + interaction under a product q*.
/// For more than two blocks `interaction` collects every non-additive order.
struct AnovaDecomposition {
  double mean = 0.0;
  std::vector<FunctionalSpec> block_components;
  FunctionalSpec interaction;
  BlockStructure block_structure;

  /// mean + sum of block components.
  FunctionalSpec additive_part() const;
};

AnovaDecomposition anova_decompose(const FunctionalSpec& h, const Measure& qstar,
                                   const BlockStructure& blocks);

struct TangentProjection {
  FunctionalSpec g_par;
  FunctionalSpec g_perp;
};

TangentProjection tangent_project(const FunctionalSpec& h, const MeanFieldFit& fit);

inline constexpr std::uint64_t kDefaultProbeSeed = 20240917;

struct OrthogonalityReport {
  double max_score_inner = 0.0;  ///< max_j |<s_j, Delta>|
  double max_probe_inner = 0.0;  ///< max over random centered block-additive probes
  std::size_t probes = 0;
  std::uint64_t seed = kDefaultProbeSeed;

  double value() const { return std::max(max_score_inner, max_probe_inner); }
};

/// Random centered block-additive probes: per block, random coefficients on
/// every monomial of degree 1..2 in the block coordinates.
std::vector<Polynomial> block_additive_probes(const BlockStructure& blocks, std::size_t count,
                                              std::uint64_t seed);

OrthogonalityReport orthogonality_report(const ResidualFunctional& delta, const ScoreBasis& basis,
                                         const Measure& qstar, std::size_t probes = 10,
                                         std::uint64_t seed = kDefaultProbeSeed);

}  // namespace vibias
