#include "vibias/functionals.hpp"

#include "vibias/error.hpp"
#include "vibias/expectation.hpp"

#include <algorithm>

namespace vibias {

namespace {

bool disjoint(std::vector<std::size_t> a, std::vector<std::size_t> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return common.empty();
}

std::optional<std::size_t> single_block(const std::vector<std::size_t>& support, const BlockStructure& blocks) {
  if (support.empty()) return std::nullopt;
  const std::size_t b = blocks.block_of(support.front());
  for (std::size_t c : support) {
    if (blocks.block_of(c) != b) throw Error(ErrorCode::BlockOverlap, "factor spans several blocks");
  }
  return b;
}

std::size_t dim_of_spec(const FunctionalSpec& f) {
  switch (f.kind()) {
    case FunctionalKind::Polynomial:
      return f.polynomial().dim();
    case FunctionalKind::BoxTail:
      return f.box_tail().dim();
    case FunctionalKind::GridTable:
      return 0;
  }
  return 0;
}

GridTable table_product(const GridTable& a, const GridTable& b) {
  std::vector<std::size_t> coords = a.coords;
  coords.insert(coords.end(), b.coords.begin(), b.coords.end());
  std::vector<std::pair<std::size_t, std::vector<double>>> pairs;
  for (std::size_t i = 0; i < a.coords.size(); ++i) pairs.emplace_back(a.coords[i], a.axes[i]);
  for (std::size_t i = 0; i < b.coords.size(); ++i) pairs.emplace_back(b.coords[i], b.axes[i]);
  std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<std::size_t> sorted;
  Axes axes;
  std::vector<std::size_t> shape;
  for (auto& [c, ax] : pairs) {
    sorted.push_back(c);
    shape.push_back(ax.size());
    axes.push_back(std::move(ax));
  }
  auto positions = [&](const std::vector<std::size_t>& sub) {
    std::vector<std::size_t> pos;
    for (std::size_t c : sub) {
      pos.push_back(static_cast<std::size_t>(std::find(sorted.begin(), sorted.end(), c) - sorted.begin()));
    }
    return pos;
  };
  const auto ia = sub_indices(shape, positions(a.coords));
  const auto ib = sub_indices(shape, positions(b.coords));
  std::vector<double> values(ia.size());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = a.values[ia[k]] * b.values[ib[k]];
  return GridTable(std::move(sorted), std::move(axes), std::move(values));
}

}  // namespace

CrossCovariance cross_cov_functional(const FunctionalSpec& u, const FunctionalSpec& v,
                                     const std::optional<BlockStructure>& blocks) {
  if (u.kind() != v.kind()) throw Error(ErrorCode::UnsupportedPair, "factors must share a representation");
  if (!disjoint(u.support(), v.support())) throw Error(ErrorCode::BlockOverlap, "factor supports intersect");
  if (blocks) {
    const auto bu = single_block(u.support(), *blocks);
    const auto bv = single_block(v.support(), *blocks);
    if (bu && bv && *bu == *bv) throw Error(ErrorCode::BlockOverlap, "factors live in the same block");
  }
  switch (u.kind()) {
    case FunctionalKind::Polynomial: {
      if (u.polynomial().dim() != v.polynomial().dim()) {
        throw Error(ErrorCode::DimensionMismatch, "factor dimensions differ");
      }
      return {u, v, u.polynomial() * v.polynomial()};
    }
    case FunctionalKind::BoxTail: {
      const BoxTail& a = u.box_tail();
      const BoxTail& b = v.box_tail();
      if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "factor dimensions differ");
      std::vector<std::optional<double>> lower(a.dim());
      for (std::size_t i = 0; i < a.dim(); ++i) lower[i] = a.active(i) ? a.lower[i] : b.lower[i];
      return {u, v, BoxTail(std::move(lower))};
    }
    case FunctionalKind::GridTable:
      return {u, v, table_product(u.grid_table(), v.grid_table())};
  }
  throw Error(ErrorCode::UnsupportedPair, "unknown functional kind");
}

FunctionalSpec CrossCovariance::interaction(const Measure& qstar) const {
  if (const auto* grid = std::get_if<GridMeasure>(&qstar)) {
    auto uv = tabulate(u, *grid);
    auto vv = tabulate(v, *grid);
    const double eu = expect(*grid, uv);
    const double ev = expect(*grid, vv);
    for (std::size_t k = 0; k < uv.size(); ++k) uv[k] = (uv[k] - eu) * (vv[k] - ev);
    return full_table(*grid, std::move(uv));
  }
  if (u.kind() != FunctionalKind::Polynomial) {
    throw Error(ErrorCode::UnsupportedPair, "closed-form interaction needs polynomial factors on a Gaussian");
  }
  if (dim_of_spec(u) != dim_of(qstar)) throw Error(ErrorCode::DimensionMismatch, "functional dimension mismatch");
  const double eu = expect(qstar, u);
  const double ev = expect(qstar, v);
  return (u.polynomial() - eu) * (v.polynomial() - ev);
}

LinearContrast linear_contrast_variance(const std::vector<double>& a) {
  if (std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; })) {
    throw Error(ErrorCode::ZeroVector, "contrast vector is zero");
  }
  const std::size_t d = a.size();
  std::vector<Monomial> add, inter;
  for (std::size_t i = 0; i < d; ++i) {
    Exponents e(d, 0);
    e[i] = 2;
    add.push_back({a[i] * a[i], e});
    for (std::size_t j = i + 1; j < d; ++j) {
      Exponents f(d, 0);
      f[i] = 1;
      f[j] = 1;
      inter.push_back({2.0 * a[i] * a[j], f});
    }
  }
  Polynomial ap(d, std::move(add));
  Polynomial ip(d, std::move(inter));
  return {ap + ip, ap, ip};
}

BoxTail joint_tail_indicator(std::vector<std::optional<double>> thresholds) {
  return BoxTail(std::move(thresholds));
}

double factorized_tail_probability(const BoxTail& box, const Measure& qstar, const BlockStructure& blocks,
                                   const QuadratureConfig& cfg) {
  if (box.dim() != blocks.dim() || dim_of(qstar) != box.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "box, measure and blocks must share a dimension");
  }
  double prob = 1.0;
  for (const auto& blk : blocks.blocks()) {
    std::vector<std::optional<double>> lower(box.dim());
    bool any = false;
    for (std::size_t i : blk) {
      if (box.active(i)) {
        lower[i] = box.lower[i];
        any = true;
      }
    }
    if (!any) continue;
    prob *= expect(qstar, BoxTail(std::move(lower)), cfg);
  }
  return prob;
}

Polynomial polynomial(std::size_t dim, std::vector<Monomial> terms) { return Polynomial(dim, std::move(terms)); }

}  // namespace vibias
