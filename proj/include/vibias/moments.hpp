#pragma once

#include "vibias/functional.hpp"
#include "vibias/gaussian_measure.hpp"

#include <map>

namespace vibias {

/// Raw Gaussian moments E[prod_i theta_i^{e_i}] via the Stein recursion
///   E[theta_k X] = m_k E[X] + sum_j C_kj E[d X / d theta_j],
/// which reproduces the Isserlis pairing sums for centered measures.
/// Results are memoized across calls on the same instance.
class GaussianMoments {
 public:
  explicit GaussianMoments(const GaussianMeasure& g);

  double operator()(const Exponents& e);

  double expect(const Polynomial& p);

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  std::map<Exponents, double> memo_;
};

double gaussian_moment(const GaussianMeasure& g, const Exponents& e);

double expect(const GaussianMeasure& g, const Polynomial& p);

}  // namespace vibias
