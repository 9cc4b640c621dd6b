#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vibias {

class GaussianMeasure;

using Axes = std::vector<std::vector<double>>;

/// Discrete probability measure on a tensor-product grid.
///
/// Log-masses are stored row-major (last axis varies fastest). A log-mass of
/// -inf marks a node with zero mass. When `normalized` is requested at
/// construction the log-sum-exp of the weights must be 0 within 1e-12.
class GridMeasure {
 public:
  GridMeasure(Axes axes, std::vector<double> log_weights, bool normalized = false);

  std::size_t dim() const noexcept { return axes_.size(); }
  std::size_t size() const noexcept { return log_weights_.size(); }
  const Axes& axes() const noexcept { return axes_; }
  const std::vector<double>& axis(std::size_t i) const { return axes_.at(i); }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  const std::vector<std::size_t>& strides() const noexcept { return strides_; }
  std::span<const double> log_weights() const noexcept { return log_weights_; }
  bool normalized() const noexcept { return normalized_; }

  double mass(std::size_t flat) const;
  std::vector<double> masses() const;

  /// Coordinates of node `flat`.
  std::vector<double> node(std::size_t flat) const;
  std::vector<std::size_t> unravel(std::size_t flat) const;

 private:
  Axes axes_;
  std::vector<double> log_weights_;
  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  bool normalized_;
};

/// Shift log-weights so the masses sum to one. Throws AllMassZero when every
/// entry is -inf.
GridMeasure normalize(const GridMeasure& m);

double log_sum_exp(std::span<const double> values);

std::vector<double> linspace(double lo, double hi, std::size_t n);

bool same_axes(const Axes& a, const Axes& b, double tol = 1e-12);

/// For every node of a grid with `shape`, the row-major index of its
/// projection onto `coords` (sorted) within the sub-grid spanned by them.
std::vector<std::size_t> sub_indices(const std::vector<std::size_t>& shape,
                                     const std::vector<std::size_t>& coords);

std::size_t product_of(const std::vector<std::size_t>& shape,
                       const std::vector<std::size_t>& coords);

struct GridConfig {
  std::size_t points = 121;
  double span_sd = 6.0;
};

/// Evaluate the density of `g` on the supplied axes and normalize.
GridMeasure discretize(const GaussianMeasure& g, Axes axes);

/// Per-axis mean +- span_sd standard deviations with `points` nodes each.
GridMeasure discretize(const GaussianMeasure& g, const GridConfig& cfg = {});

}  // namespace vibias
