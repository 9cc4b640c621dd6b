#pragma once

#include "vibias/functional.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/quadrature.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vibias {

/// e^{-x} - 1 + x, with a series branch near 0.
double rho_rem(double x);

/// |rho_rem(x)| <= x^2 e^{|x|} / 2.
bool remainder_pointwise_bound(double x);

enum class BiasMode { Grid, GaussianExact, GaussianQuadrature };

std::string_view to_string(BiasMode mode) noexcept;

/// Change-of-measure decomposition of E_pi[h] - E_q*[h].
///
/// `linear` and `remainder` are computed with h centered under q*, which
/// keeps the transfer identity free of the E[h]·KL offset. The uncentered
/// variants are kept in `linear_raw` and `remainder_raw`.
struct BiasReport {
  std::string functional_id;
  double exact = 0.0;
  double linear = 0.0;
  double interaction = 0.0;
  double remainder = 0.0;
  double delta_l2 = 0.0;
  double delta_l2_centered = 0.0;
  double bound_ratio = 0.0;
  double identity_residual = 0.0;
  double transfer_residual = 0.0;

  double linear_raw = 0.0;
  double remainder_raw = 0.0;
  double h_centered_l2 = 0.0;
  double stationarity_residual = 0.0;
  double identity_tol = 0.0;
  double transfer_tol = 0.0;
  bool identity_ok = false;
  bool transfer_ok = false;
  BiasMode mode = BiasMode::Grid;
  std::optional<QuadratureInfo> quadrature;
  std::string note;
};

/// Requires a converged fit. Exact bias always comes from expectations
/// under both measures; the expansion terms never feed into it.
BiasReport bias_report(const FunctionalSpec& h, const Measure& posterior, const MeanFieldFit& fit,
                       std::string functional_id = "", const QuadratureConfig& cfg = {});

struct BoundCheck {
  double ratio = 0.0;
  bool pointwise_holds = true;
  std::size_t nodes_checked = 0;
};

/// Ratio |remainder| / (||h - Eh|| ||Delta||^2), plus the pointwise remainder
/// bound at every node in grid mode. ZeroVariance when h is q*-a.s. constant.
BoundCheck remainder_bound_check(const BiasReport& report, const FunctionalSpec& h,
                                 const MeanFieldFit& fit, const Measure& posterior);

/// N(0, [[v, rho v], [rho v, v]]).
GaussianMeasure correlated_pair(double rho, double variance = 1.0);

using PosteriorFamily = std::function<Measure(double)>;

struct ScalingPoint {
  double eps = 0.0;
  double exact = 0.0;
  double delta_l2 = 0.0;
};

struct ScalingResult {
  double slope = 0.0;  ///< +inf when some bias is exactly zero
  bool degenerate = false;
  std::vector<ScalingPoint> points;
};

/// Least-squares slope of log|exact bias| against log eps. The default family
/// is the unit-variance correlated pair with correlation eps, fitted fully
/// factorized. At least 4 positive, strictly decreasing eps values.
ScalingResult scaling_study(const FunctionalSpec& h, const std::vector<double>& eps_grid,
                            const PosteriorFamily& family = {},
                            const std::optional<BlockStructure>& blocks = std::nullopt);

/// OLS slope of y against x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Bias report for a caller-supplied subgradient representer. Only the
/// linear pathway <psi, q* - pi> is evaluated; the expansion remainder of the
/// convex functional itself is not computed.
BiasReport convex_functional_bias(const FunctionalSpec& psi, const Measure& posterior,
                                  const MeanFieldFit& fit, std::string functional_id = "",
                                  const QuadratureConfig& cfg = {});

}  // namespace vibias
