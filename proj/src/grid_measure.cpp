#include "vibias/grid_measure.hpp"

#include "vibias/error.hpp"
#include "vibias/gaussian_measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vibias {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

GridMeasure::GridMeasure(Axes axes, std::vector<double> log_weights, bool normalized)
    : axes_(std::move(axes)), log_weights_(std::move(log_weights)), normalized_(normalized) {
  if (axes_.empty()) throw Error(ErrorCode::InvalidArgument, "grid needs at least one axis");
  shape_.resize(axes_.size());
  strides_.resize(axes_.size());
  std::size_t total = 1;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    const auto& ax = axes_[i];
    if (ax.empty()) throw Error(ErrorCode::InvalidArgument, "axis " + std::to_string(i) + " is empty");
    for (std::size_t k = 0; k < ax.size(); ++k) {
      if (!std::isfinite(ax[k])) throw Error(ErrorCode::InvalidArgument, "axis points must be finite");
      if (k > 0 && !(ax[k] > ax[k - 1])) {
        throw Error(ErrorCode::InvalidArgument,
                    "axis " + std::to_string(i) + " is not strictly increasing");
      }
    }
    shape_[i] = ax.size();
    total *= ax.size();
  }
  std::size_t stride = 1;
  for (std::size_t i = axes_.size(); i-- > 0;) {
    strides_[i] = stride;
    stride *= shape_[i];
  }
  if (log_weights_.size() != total) {
    throw Error(ErrorCode::ShapeMismatch, "log_weights has " + std::to_string(log_weights_.size()) +
                                              " entries, grid has " + std::to_string(total));
  }
  for (double w : log_weights_) {
    if (std::isnan(w) || w == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorCode::InvalidArgument, "log_weights must be finite or -inf");
    }
  }
  if (normalized_) {
    const double lse = log_sum_exp(log_weights_);
    if (!(std::abs(lse) <= 1e-12)) {
      throw Error(ErrorCode::NotNormalized, "log-sum-exp of weights is " + std::to_string(lse));
    }
  }
}

double GridMeasure::mass(std::size_t flat) const { return std::exp(log_weights_.at(flat)); }

std::vector<double> GridMeasure::masses() const {
  std::vector<double> out(log_weights_.size());
  std::transform(log_weights_.begin(), log_weights_.end(), out.begin(),
                 [](double w) { return std::exp(w); });
  return out;
}

std::vector<std::size_t> GridMeasure::unravel(std::size_t flat) const {
  std::vector<std::size_t> idx(axes_.size());
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    idx[i] = (flat / strides_[i]) % shape_[i];
  }
  return idx;
}

std::vector<double> GridMeasure::node(std::size_t flat) const {
  std::vector<double> x(axes_.size());
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    x[i] = axes_[i][(flat / strides_[i]) % shape_[i]];
  }
  return x;
}

double log_sum_exp(std::span<const double> values) {
  double mx = kNegInf;
  for (double v : values) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

GridMeasure normalize(const GridMeasure& m) {
  const double lse = log_sum_exp(m.log_weights());
  if (lse == kNegInf) throw Error(ErrorCode::AllMassZero, "every grid node has zero mass");
  std::vector<double> lw(m.log_weights().begin(), m.log_weights().end());
  for (double& w : lw) w -= lse;
  return {m.axes(), std::move(lw), true};
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = lo + h * static_cast<double>(k);
  out.back() = hi;
  return out;
}

bool same_axes(const Axes& a, const Axes& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      if (std::abs(a[i][k] - b[i][k]) > tol * std::max(1.0, std::abs(a[i][k]))) return false;
    }
  }
  return true;
}

std::size_t product_of(const std::vector<std::size_t>& shape,
                       const std::vector<std::size_t>& coords) {
  std::size_t n = 1;
  for (std::size_t c : coords) n *= shape.at(c);
  return n;
}

std::vector<std::size_t> sub_indices(const std::vector<std::size_t>& shape,
                                     const std::vector<std::size_t>& coords) {
  const std::size_t d = shape.size();
  std::size_t total = 1;
  for (std::size_t s : shape) total *= s;

  // Stride of every full-grid axis inside the sub-grid (0 when not selected).
  std::vector<std::size_t> sub_stride(d, 0);
  std::size_t stride = 1;
  for (std::size_t k = coords.size(); k-- > 0;) {
    sub_stride.at(coords[k]) = stride;
    stride *= shape[coords[k]];
  }

  std::vector<std::size_t> out(total);
  std::vector<std::size_t> idx(d, 0);
  std::size_t sub = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    out[flat] = sub;
    // Odometer increment, last axis fastest.
    for (std::size_t i = d; i-- > 0;) {
      ++idx[i];
      sub += sub_stride[i];
      if (idx[i] < shape[i]) break;
      sub -= sub_stride[i] * shape[i];
      idx[i] = 0;
    }
  }
  return out;
}

GridMeasure discretize(const GaussianMeasure& g, Axes axes) {
  if (axes.size() != g.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "axes count does not match Gaussian dimension");
  }
  // Axes are validated by the GridMeasure constructor; compute via a
  // placeholder grid to reuse its indexing.
  std::size_t total = 1;
  for (const auto& ax : axes) total *= ax.size();
  GridMeasure shape_only(axes, std::vector<double>(total, 0.0));
  std::vector<double> lw(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    lw[flat] = g.log_density(shape_only.node(flat));
  }
  return normalize(GridMeasure(std::move(axes), std::move(lw)));
}

GridMeasure discretize(const GaussianMeasure& g, const GridConfig& cfg) {
  if (cfg.points < 2) throw Error(ErrorCode::InvalidArgument, "grid needs at least 2 points per axis");
  Axes axes;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const double m = g.mean()(static_cast<Eigen::Index>(i));
    const double s = g.stddev(i);
    axes.push_back(linspace(m - cfg.span_sd * s, m + cfg.span_sd * s, cfg.points));
  }
  return discretize(g, std::move(axes));
}

}  // namespace vibias
