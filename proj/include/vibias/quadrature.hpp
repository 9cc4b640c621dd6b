#pragma once

#include "vibias/gaussian_measure.hpp"
#include "vibias/grid_measure.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace vibias {

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
Rule1D gauss_legendre(std::size_t n);

/// Composite Gauss-Legendre rule on [lo, hi] with roughly `points` nodes.
/// Panel edges are forced onto every breakpoint inside (lo, hi), so an
/// integrand that jumps only at breakpoints is integrated to full order.
Rule1D composite_rule(double lo, double hi, std::size_t points, std::size_t order,
                      std::span<const double> breakpoints = {});

/// Resolution of the internal Gaussian quadrature. `points_per_axis` is
/// lowered automatically when the tensor grid would exceed `max_nodes`.
struct QuadratureConfig {
  std::size_t points_per_axis = 1001;
  double span_sd = 10.0;
  std::size_t order = 8;
  std::size_t max_nodes = 4'000'000;
};

struct QuadratureInfo {
  std::size_t points_per_axis = 0;
  double step = 0.0;  ///< largest panel width over all axes
};

std::size_t effective_points(const QuadratureConfig& cfg, std::size_t dim);

/// Tensor grid spanning every measure in `cover` (mean +- span_sd sd on each
/// axis) with breakpoints per axis. The returned grid is `target`'s density
/// times the quadrature weights, normalized.
struct QuadratureGrid {
  Axes axes;
  std::vector<std::vector<double>> weights;
  QuadratureInfo info;
};

QuadratureGrid make_quadrature_grid(std::span<const GaussianMeasure* const> cover,
                                    const std::vector<std::vector<double>>& breakpoints,
                                    const QuadratureConfig& cfg);

GridMeasure weighted_grid(const GaussianMeasure& target, const QuadratureGrid& q);

}  // namespace vibias
