#include "vibias/moments.hpp"

#include "vibias/error.hpp"

#include <algorithm>

namespace vibias {

GaussianMoments::GaussianMoments(const GaussianMeasure& g) : mean_(g.mean()), cov_(g.covariance()) {}

double GaussianMoments::operator()(const Exponents& e) {
  const auto d = static_cast<std::size_t>(mean_.size());
  if (e.size() != d) throw Error(ErrorCode::DimensionMismatch, "moment exponent dimension mismatch");
  const auto first = std::find_if(e.begin(), e.end(), [](unsigned x) { return x > 0; });
  if (first == e.end()) return 1.0;
  if (auto it = memo_.find(e); it != memo_.end()) return it->second;

  const auto k = static_cast<std::size_t>(first - e.begin());
  Exponents rest = e;
  --rest[k];
  double value = mean_(static_cast<Eigen::Index>(k)) * (*this)(rest);
  for (std::size_t j = 0; j < d; ++j) {
    if (rest[j] == 0) continue;
    const double c = cov_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    if (c == 0.0) continue;
    Exponents lowered = rest;
    --lowered[j];
    value += c * static_cast<double>(rest[j]) * (*this)(lowered);
  }
  memo_.emplace(e, value);
  return value;
}

double GaussianMoments::expect(const Polynomial& p) {
  if (p.dim() != static_cast<std::size_t>(mean_.size())) {
    throw Error(ErrorCode::DimensionMismatch, "polynomial dimension does not match measure");
  }
  double s = 0.0;
  for (const auto& t : p.terms()) s += t.coef * (*this)(t.exponents);
  return s;
}

double gaussian_moment(const GaussianMeasure& g, const Exponents& e) { return GaussianMoments(g)(e); }

double expect(const GaussianMeasure& g, const Polynomial& p) { return GaussianMoments(g).expect(p); }

}  // namespace vibias
