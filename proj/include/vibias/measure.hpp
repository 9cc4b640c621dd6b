#pragma once

#include "vibias/block_structure.hpp"
#include "vibias/gaussian_measure.hpp"
#include "vibias/grid_measure.hpp"

#include <variant>

namespace vibias {

/// Either an exactly summable grid measure or a closed-form Gaussian.
using Measure = std::variant<GridMeasure, GaussianMeasure>;

inline bool is_grid(const Measure& m) noexcept { return std::holds_alternative<GridMeasure>(m); }
inline bool is_gaussian(const Measure& m) noexcept {
  return std::holds_alternative<GaussianMeasure>(m);
}

std::size_t dim_of(const Measure& m);

/// True when the Gaussian covariance has no entries coupling different blocks.
bool is_block_diagonal(const Eigen::MatrixXd& cov, const BlockStructure& blocks,
                       double tol = 1e-12);

}  // namespace vibias
