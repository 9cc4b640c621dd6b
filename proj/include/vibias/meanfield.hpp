#pragma once

#include "vibias/functional.hpp"
#include "vibias/measure.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace vibias {

struct ScoreBasis;

struct CaviConfig {
  std::size_t max_sweeps = 500;
  double tol = 1e-10;  ///< max-norm change of factor masses between sweeps
};

/// KL projection of a posterior onto a block mean-field family.
struct MeanFieldFit {
  Measure qstar;
  BlockStructure blocks;
  std::vector<double> kl_trace;  ///< KL(q || posterior) after every sweep
  bool converged = false;
  double stationarity_residual = 0.0;
  std::size_t sweeps = 0;
  double tol = 0.0;
};

/// Closed-form projection of a Gaussian: same mean, block-diagonal precision
/// whose diagonal blocks equal those of the posterior precision.
MeanFieldFit fit_meanfield_gaussian(const GaussianMeasure& posterior, const BlockStructure& blocks);

/// Coordinate ascent on a grid posterior, initialized at the product of its
/// block marginals and sweeping blocks in index order.
MeanFieldFit fit_meanfield_cavi(const GridMeasure& posterior, const BlockStructure& blocks,
                                const CaviConfig& cfg = {});

/// Gaussian closed form or grid coordinate ascent, by representation.
MeanFieldFit fit_meanfield(const Measure& posterior, const BlockStructure& blocks,
                           const CaviConfig& cfg = {});

/// Wrap an arbitrary family member as a fit (KL and stationarity evaluated,
/// converged iff stationarity <= tol). Used to probe non-optimal members.
MeanFieldFit fit_from_member(Measure member, const Measure& posterior, const BlockStructure& blocks,
                             double tol = 1e-10);

/// Delta(theta) = log q*(theta) - log pi(theta).
///
/// Gaussian case: zᵀ A z + bᵀ z + c with z = theta - center, where
/// A = (P_pi - P_q)/2 and c includes (log det Sigma - log det V)/2.
/// Grid case: tabulated difference of normalized log-masses (0 where q* has
/// no mass).
class ResidualFunctional {
 public:
  struct Quadratic {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    double c = 0.0;
    Eigen::VectorXd center;
  };

  explicit ResidualFunctional(Quadratic q);
  explicit ResidualFunctional(GridTable table);

  bool is_quadratic() const noexcept { return quadratic_.has_value(); }
  const Quadratic& quadratic() const { return *quadratic_; }
  const GridTable& table() const { return *table_; }

  /// Polynomial (Gaussian) or GridTable (grid) form.
  const FunctionalSpec& functional() const noexcept { return spec_; }

  double evaluate(std::span<const double> x) const;

 private:
  std::optional<Quadratic> quadratic_;
  std::optional<GridTable> table_;
  FunctionalSpec spec_;
};

ResidualFunctional residual(const MeanFieldFit& fit, const Measure& posterior);

/// max_j |E_q*[s_j (Delta + 1)]|.
double stationarity_check(const MeanFieldFit& fit, const Measure& posterior, const ScoreBasis& scores);

}  // namespace vibias
