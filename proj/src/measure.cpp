#include "vibias/measure.hpp"

namespace vibias {

std::size_t dim_of(const Measure& m) {
  return std::visit([](const auto& x) { return x.dim(); }, m);
}

bool is_block_diagonal(const Eigen::MatrixXd& cov, const BlockStructure& blocks, double tol) {
  if (static_cast<std::size_t>(cov.rows()) != blocks.dim()) return false;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      if (blocks.block_of(static_cast<std::size_t>(i)) != blocks.block_of(static_cast<std::size_t>(j)) &&
          std::abs(cov(i, j)) > tol) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace vibias
