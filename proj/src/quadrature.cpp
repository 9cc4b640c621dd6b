#include "vibias/quadrature.hpp"

#include "vibias/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace vibias {

Rule1D gauss_legendre(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "Gauss-Legendre order must be positive");
  const double nd = static_cast<double>(n);
  // Legendre P_n and P_{n-1} at x via the three-term recurrence.
  auto legendre = [n](double x) {
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double kd = static_cast<double>(k);
      const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, p0};
  };

  Rule1D r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      const auto [pn, pm] = legendre(x);
      dp = nd * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre(x);
    dp = nd * (x * pn - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

Rule1D composite_rule(double lo, double hi, std::size_t points, std::size_t order,
                      std::span<const double> breakpoints) {
  if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "quadrature interval is empty");
  std::vector<double> edges{lo};
  for (double b : breakpoints) {
    if (b > lo && b < hi) edges.push_back(b);
  }
  edges.push_back(hi);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  const Rule1D base = gauss_legendre(order);
  const std::size_t total_panels = std::max<std::size_t>(1, points / order);
  const double length = hi - lo;

  Rule1D out;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double a = edges[s];
    const double b = edges[s + 1];
    const auto panels = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(total_panels) * (b - a) / length)));
    const double w = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double left = a + w * static_cast<double>(p);
      for (std::size_t k = 0; k < order; ++k) {
        out.nodes.push_back(left + 0.5 * w * (base.nodes[k] + 1.0));
        out.weights.push_back(0.5 * w * base.weights[k]);
      }
    }
  }
  return out;
}

std::size_t effective_points(const QuadratureConfig& cfg, std::size_t dim) {
  std::size_t p = cfg.points_per_axis;
  const double cap = std::floor(std::pow(static_cast<double>(cfg.max_nodes), 1.0 / static_cast<double>(dim)));
  if (static_cast<double>(p) > cap) p = static_cast<std::size_t>(cap);
  return std::max(p, cfg.order);
}

QuadratureGrid make_quadrature_grid(std::span<const GaussianMeasure* const> cover,
                                    const std::vector<std::vector<double>>& breakpoints,
                                    const QuadratureConfig& cfg) {
  if (cover.empty()) throw Error(ErrorCode::InvalidArgument, "quadrature cover is empty");
  const std::size_t d = cover.front()->dim();
  const std::size_t points = effective_points(cfg, d);
  QuadratureGrid q;
  q.info.points_per_axis = 0;
  for (std::size_t i = 0; i < d; ++i) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto* g : cover) {
      if (g->dim() != d) throw Error(ErrorCode::DimensionMismatch, "quadrature cover dimensions differ");
      const double m = g->mean()(static_cast<Eigen::Index>(i));
      const double s = g->stddev(i);
      lo = std::min(lo, m - cfg.span_sd * s);
      hi = std::max(hi, m + cfg.span_sd * s);
    }
    std::span<const double> bps;
    if (i < breakpoints.size()) bps = breakpoints[i];
    Rule1D r = composite_rule(lo, hi, points, cfg.order, bps);
    // Panel width: nodes come in groups of `order`.
    for (std::size_t k = 0; k + cfg.order <= r.nodes.size(); k += cfg.order) {
      double w = 0.0;
      for (std::size_t j = 0; j < cfg.order; ++j) w += r.weights[k + j];
      q.info.step = std::max(q.info.step, w);
    }
    q.info.points_per_axis = std::max(q.info.points_per_axis, r.nodes.size());
    q.axes.push_back(std::move(r.nodes));
    q.weights.push_back(std::move(r.weights));
  }
  return q;
}

GridMeasure weighted_grid(const GaussianMeasure& target, const QuadratureGrid& q) {
  if (target.dim() != q.axes.size()) {
    throw Error(ErrorCode::DimensionMismatch, "quadrature grid dimension mismatch");
  }
  std::size_t total = 1;
  for (const auto& ax : q.axes) total *= ax.size();
  const GridMeasure shape_only(q.axes, std::vector<double>(total, 0.0));
  const auto& strides = shape_only.strides();
  const auto& shape = shape_only.shape();
  const std::size_t d = q.axes.size();

  const Eigen::MatrixXd& prec = target.precision();
  const Eigen::VectorXd& mu = target.mean();
  const double norm = -0.5 * (target.log_det_cov() + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));

  std::vector<double> lw(total);
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  for (std::size_t flat = 0; flat < total; ++flat) {
    double logw = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t k = (flat / strides[i]) % shape[i];
      z(static_cast<Eigen::Index>(i)) = q.axes[i][k] - mu(static_cast<Eigen::Index>(i));
      logw += std::log(q.weights[i][k]);
    }
    lw[flat] = norm - 0.5 * z.dot(prec * z) + logw;
  }
  return normalize(GridMeasure(q.axes, std::move(lw)));
}

}  // namespace vibias
