#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace vibias {

/// Multivariate normal with cached precision and log-determinant.
/// Construction rejects asymmetric or non positive definite covariances.
class GaussianMeasure {
 public:
  GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }
  const Eigen::MatrixXd& precision() const noexcept { return precision_; }
  double log_det_cov() const noexcept { return log_det_cov_; }

  double log_density(std::span<const double> x) const;

  /// Marginal over the given coordinates (in the given order).
  GaussianMeasure marginal(const std::vector<std::size_t>& coords) const;

  /// Same mean, covariance multiplied by factor.
  GaussianMeasure scaled(double factor) const;

  double stddev(std::size_t i) const { return std::sqrt(cov_(i, i)); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd precision_;
  double log_det_cov_ = 0.0;
};

}  // namespace vibias
