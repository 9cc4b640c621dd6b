#include "vibias/gaussian_measure.hpp"

#include "vibias/error.hpp"

#include <cmath>
#include <numbers>

namespace vibias {

GaussianMeasure::GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  const auto d = mean_.size();
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "Gaussian measure needs dimension >= 1");
  if (cov_.rows() != d || cov_.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "covariance shape does not match mean");
  }
  if (!mean_.allFinite() || !cov_.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "Gaussian parameters must be finite");
  }
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::NonPositiveDefinite, "covariance is not symmetric");
  }
  cov_ = 0.5 * (cov_ + cov_.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::NonPositiveDefinite, "covariance has a non-positive eigenvalue");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NonPositiveDefinite, "Cholesky factorization failed");
  }
  precision_ = llt.solve(Eigen::MatrixXd::Identity(d, d));
  precision_ = 0.5 * (precision_ + precision_.transpose());
  const Eigen::MatrixXd l = llt.matrixL();
  log_det_cov_ = 2.0 * l.diagonal().array().log().sum();
}

double GaussianMeasure::log_density(std::span<const double> x) const {
  const auto d = mean_.size();
  if (static_cast<Eigen::Index>(x.size()) != d) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension does not match measure");
  }
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = x[static_cast<std::size_t>(i)] - mean_(i);
  const double quad = z.dot(precision_ * z);
  return -0.5 * (quad + log_det_cov_ + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
}

GaussianMeasure GaussianMeasure::marginal(const std::vector<std::size_t>& coords) const {
  const auto k = static_cast<Eigen::Index>(coords.size());
  Eigen::VectorXd m(k);
  Eigen::MatrixXd c(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto i = static_cast<Eigen::Index>(coords.at(static_cast<std::size_t>(a)));
    if (i >= mean_.size()) throw Error(ErrorCode::InvalidArgument, "marginal coordinate out of range");
    m(a) = mean_(i);
    for (Eigen::Index b = 0; b < k; ++b) {
      c(a, b) = cov_(i, static_cast<Eigen::Index>(coords[static_cast<std::size_t>(b)]));
    }
  }
  return {std::move(m), std::move(c)};
}

GaussianMeasure GaussianMeasure::scaled(double factor) const {
  if (!(factor > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale factor must be positive");
  return {mean_, cov_ * factor};
}

}  // namespace vibias
