#pragma once

#include "vibias/block_structure.hpp"
#include "vibias/functional.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace vibias {

/// Exactly Gaussian sequence pi_n = N(mu, sigma/n) with mean-field partner
/// q_n = N(mu, v/n), v the KL projection of N(mu, sigma).
struct LanExperiment {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd v;
  std::vector<long> n_grid;
  BlockStructure block_structure;
  /// max |n * V(sigma/n) - V(sigma)| over the grid; the projection should
  /// commute with the 1/n scaling.
  double scale_commutation_residual = 0.0;

  static LanExperiment make(Eigen::VectorXd mu, Eigen::MatrixXd sigma, std::vector<long> n_grid,
                            BlockStructure blocks);
};

/// Symbolic second derivatives of a polynomial at `point`.
Eigen::MatrixXd hessian_at(const FunctionalSpec& g, const Eigen::VectorXd& point);

/// tr(H (sigma - v)) / (2n).
double predict_bias(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& v,
                    long n);

struct LanPoint {
  long n = 0;
  double measured = 0.0;
  double predicted = 0.0;
  std::optional<double> ratio;  ///< measured / predicted, unset when predicted is 0
};

struct LanSweepResult {
  std::vector<LanPoint> points;
  double slope = 0.0;  ///< +inf when degenerate
  bool degenerate = false;
  double limit_n_bias = 0.0;  ///< n * measured at the largest n
  double trace_coeff = 0.0;   ///< tr(H (sigma - v)) / 2
  Eigen::MatrixXd hessian;
};

/// Biases below this magnitude are treated as exactly zero when fitting the
/// n-slope.
inline constexpr double kZeroBias = 1e-14;

/// Polynomial g only (NotPolynomial otherwise); per-n points run in parallel.
LanSweepResult run_sweep(const LanExperiment& exp, const FunctionalSpec& g);

struct TangentAudit {
  double trace_coeff = 0.0;
  double measured_n_bias = 0.0;  ///< at the largest n of the grid
  long n = 0;
  bool first_order_bias_vanishes = false;  ///< |measured_n_bias| <= 1e-10
  std::string note;
};

/// g must be block-additive: every monomial inside a single block.
TangentAudit tangent_functional_audit(const LanExperiment& exp, const FunctionalSpec& g);

}  // namespace vibias
