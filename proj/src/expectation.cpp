#include "vibias/expectation.hpp"

#include "vibias/error.hpp"
#include "vibias/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace vibias {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

void require_normalized(const GridMeasure& m) {
  if (!m.normalized()) throw Error(ErrorCode::NotNormalized, "grid measure must be normalized");
}

std::vector<std::size_t> as_set(std::vector<std::size_t> block, std::size_t dim) {
  if (block.empty()) throw Error(ErrorCode::EmptyBlock, "block is empty");
  std::sort(block.begin(), block.end());
  block.erase(std::unique(block.begin(), block.end()), block.end());
  if (block.back() >= dim) throw Error(ErrorCode::InvalidArgument, "block coordinate out of range");
  return block;
}

std::vector<std::size_t> complement_of(const std::vector<std::size_t>& block, std::size_t dim) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < dim; ++c) {
    if (!std::binary_search(block.begin(), block.end(), c)) out.push_back(c);
  }
  return out;
}

// Marginal masses over sorted coords, indexed by the sub-grid.
std::vector<double> marginal_masses(const GridMeasure& m, const std::vector<std::size_t>& coords) {
  const auto idx = sub_indices(m.shape(), coords);
  std::vector<Neumaier> acc(product_of(m.shape(), coords));
  const auto lw = m.log_weights();
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (lw[k] != kNegInf) acc[idx[k]].add(std::exp(lw[k]));
  }
  std::vector<double> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = acc[i].value();
  return out;
}

Axes sub_axes(const GridMeasure& m, const std::vector<std::size_t>& coords) {
  Axes out;
  for (std::size_t c : coords) out.push_back(m.axis(c));
  return out;
}

}  // namespace

double weighted_sum(std::span<const double> masses, std::span<const double> values) {
  if (masses.size() != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "weights and values differ in length");
  }
  Neumaier acc;
  for (std::size_t k = 0; k < masses.size(); ++k) {
    if (masses[k] != 0.0) acc.add(masses[k] * values[k]);
  }
  return acc.value();
}

double expect(const GridMeasure& m, std::span<const double> values) {
  require_normalized(m);
  return weighted_sum(m.masses(), values);
}

QuadratureValue box_tail_probability(const GaussianMeasure& g, const BoxTail& box,
                                     const QuadratureConfig& cfg) {
  if (box.dim() != g.dim()) throw Error(ErrorCode::DimensionMismatch, "box tail dimension mismatch");
  const auto active = box.active_coords();
  QuadratureValue out;
  if (active.empty()) {
    out.value = 1.0;
    return out;
  }
  const GaussianMeasure marg = g.marginal(active);
  const std::size_t k = active.size();
  const std::size_t points = effective_points(cfg, k);

  std::vector<Rule1D> rules;
  for (std::size_t a = 0; a < k; ++a) {
    const double mu = marg.mean()(static_cast<Eigen::Index>(a));
    const double sd = marg.stddev(a);
    const double lo = std::max(*box.lower[active[a]], mu - cfg.span_sd * sd);
    const double hi = mu + cfg.span_sd * sd;
    if (!(hi > lo)) {
      out.value = 0.0;
      return out;
    }
    rules.push_back(composite_rule(lo, hi, points, cfg.order));
    out.info.points_per_axis = std::max(out.info.points_per_axis, rules.back().nodes.size());
    out.info.step = std::max(out.info.step, (hi - lo) / static_cast<double>(std::max<std::size_t>(1, points / cfg.order)));
  }

  std::size_t total = 1;
  for (const auto& r : rules) total *= r.nodes.size();
  const Eigen::MatrixXd& prec = marg.precision();
  const double norm = -0.5 * (marg.log_det_cov() + static_cast<double>(k) * std::log(2.0 * std::numbers::pi));
  Eigen::VectorXd z(static_cast<Eigen::Index>(k));
  std::vector<std::size_t> idx(k, 0);
  Neumaier acc;
  for (std::size_t flat = 0; flat < total; ++flat) {
    double w = 1.0;
    for (std::size_t a = 0; a < k; ++a) {
      z(static_cast<Eigen::Index>(a)) = rules[a].nodes[idx[a]] - marg.mean()(static_cast<Eigen::Index>(a));
      w *= rules[a].weights[idx[a]];
    }
    acc.add(w * std::exp(norm - 0.5 * z.dot(prec * z)));
    for (std::size_t a = k; a-- > 0;) {
      if (++idx[a] < rules[a].nodes.size()) break;
      idx[a] = 0;
    }
  }
  out.value = acc.value();
  return out;
}

double expect(const Measure& m, const FunctionalSpec& g, const QuadratureConfig& cfg) {
  if (const auto* grid = std::get_if<GridMeasure>(&m)) {
    require_normalized(*grid);
    return weighted_sum(grid->masses(), tabulate(g, *grid));
  }
  const auto& gauss = std::get<GaussianMeasure>(m);
  switch (g.kind()) {
    case FunctionalKind::Polynomial: return expect(gauss, g.polynomial());
    case FunctionalKind::BoxTail: return box_tail_probability(gauss, g.box_tail(), cfg).value;
    case FunctionalKind::GridTable:
      throw Error(ErrorCode::UnsupportedPair, "grid-tabulated functional cannot be paired with a Gaussian");
  }
  return 0.0;
}

double inner_product(const FunctionalSpec& f, const FunctionalSpec& g, const Measure& m,
                     const QuadratureConfig& cfg) {
  if (const auto* grid = std::get_if<GridMeasure>(&m)) {
    require_normalized(*grid);
    const auto fv = tabulate(f, *grid);
    auto gv = tabulate(g, *grid);
    for (std::size_t k = 0; k < gv.size(); ++k) gv[k] *= fv[k];
    return weighted_sum(grid->masses(), gv);
  }
  const auto& gauss = std::get<GaussianMeasure>(m);
  if (f.kind() == FunctionalKind::GridTable || g.kind() == FunctionalKind::GridTable) {
    throw Error(ErrorCode::UnsupportedPair, "grid-tabulated functional cannot be paired with a Gaussian");
  }
  if (f.is_polynomial() && g.is_polynomial()) return expect(gauss, f.polynomial() * g.polynomial());
  if (f.kind() == FunctionalKind::BoxTail && g.kind() == FunctionalKind::BoxTail) {
    const auto& a = f.box_tail();
    const auto& b = g.box_tail();
    if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "box tail dimensions differ");
    std::vector<std::optional<double>> lower(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
      if (a.lower[i] && b.lower[i]) {
        lower[i] = std::max(*a.lower[i], *b.lower[i]);
      } else {
        lower[i] = a.lower[i] ? a.lower[i] : b.lower[i];
      }
    }
    return box_tail_probability(gauss, BoxTail(std::move(lower)), cfg).value;
  }
  // Mixed polynomial / box tail: tensor quadrature with panel edges on the thresholds.
  std::vector<std::vector<double>> breaks(gauss.dim());
  for (const auto* s : {&f, &g}) {
    if (s->kind() != FunctionalKind::BoxTail) continue;
    const auto& b = s->box_tail();
    for (std::size_t i : b.active_coords()) breaks[i].push_back(*b.lower[i]);
  }
  const GaussianMeasure* cover[] = {&gauss};
  const auto qg = make_quadrature_grid(cover, breaks, cfg);
  return inner_product(f, g, Measure{weighted_grid(gauss, qg)}, cfg);
}

double kl_divergence(const Measure& q, const Measure& p) {
  if (is_grid(q) && is_grid(p)) {
    const auto& qg = std::get<GridMeasure>(q);
    const auto& pg = std::get<GridMeasure>(p);
    if (!same_axes(qg.axes(), pg.axes())) throw Error(ErrorCode::AxesMismatch, "grids have different axes");
    const double lq0 = log_sum_exp(qg.log_weights());
    const double lp0 = log_sum_exp(pg.log_weights());
    if (lq0 == kNegInf || lp0 == kNegInf) throw Error(ErrorCode::AllMassZero, "grid has no mass");
    Neumaier acc;
    const auto lq = qg.log_weights();
    const auto lp = pg.log_weights();
    for (std::size_t k = 0; k < qg.size(); ++k) {
      if (lq[k] == kNegInf) continue;
      if (lp[k] == kNegInf) {
        throw Error(ErrorCode::SupportMismatch, "q has mass where p has none");
      }
      const double a = lq[k] - lq0;
      const double b = lp[k] - lp0;
      acc.add(std::exp(a) * (a - b));
    }
    return acc.value();
  }
  if (is_gaussian(q) && is_gaussian(p)) {
    const auto& a = std::get<GaussianMeasure>(q);
    const auto& b = std::get<GaussianMeasure>(p);
    if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "Gaussian dimensions differ");
    const Eigen::VectorXd dm = b.mean() - a.mean();
    const double tr = (b.precision() * a.covariance()).trace();
    const double quad = dm.dot(b.precision() * dm);
    return 0.5 * (tr + quad - static_cast<double>(a.dim()) + b.log_det_cov() - a.log_det_cov());
  }
  throw Error(ErrorCode::UnsupportedPair, "KL needs two grids or two Gaussians");
}

GridMeasure marginal(const GridMeasure& m, std::vector<std::size_t> block) {
  block = as_set(std::move(block), m.dim());
  auto masses = marginal_masses(m, block);
  std::vector<double> lw(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) lw[i] = masses[i] > 0.0 ? std::log(masses[i]) : kNegInf;
  return normalize(GridMeasure(sub_axes(m, block), std::move(lw)));
}

double product_defect(const GridMeasure& m, const BlockStructure& blocks) {
  if (blocks.dim() != m.dim()) throw Error(ErrorCode::DimensionMismatch, "block structure dimension mismatch");
  std::vector<std::vector<double>> margs;
  std::vector<std::vector<std::size_t>> idx;
  for (const auto& b : blocks.blocks()) {
    margs.push_back(marginal_masses(m, b));
    idx.push_back(sub_indices(m.shape(), b));
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    double prod = 1.0;
    for (std::size_t b = 0; b < margs.size(); ++b) prod *= margs[b][idx[b][k]];
    worst = std::max(worst, std::abs(m.mass(k) - prod));
  }
  return worst;
}

bool is_product_measure(const GridMeasure& m, const BlockStructure& blocks, double tol) {
  return product_defect(m, blocks) <= tol;
}

GridTable conditional_expectation(std::span<const double> h, const GridMeasure& m,
                                  std::vector<std::size_t> block) {
  require_normalized(m);
  block = as_set(std::move(block), m.dim());
  if (h.size() != m.size()) throw Error(ErrorCode::ShapeMismatch, "values do not match the grid");
  const auto rest = complement_of(block, m.dim());
  if (rest.empty()) return GridTable(block, m.axes(), std::vector<double>(h.begin(), h.end()));

  if (!is_product_measure(m, BlockStructure({block, rest}, m.dim()))) {
    throw Error(ErrorCode::NotProductMeasure, "measure does not factor across the conditioning block");
  }
  const auto rest_mass = marginal_masses(m, rest);
  const auto bi = sub_indices(m.shape(), block);
  const auto ri = sub_indices(m.shape(), rest);
  std::vector<Neumaier> acc(product_of(m.shape(), block));
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double w = rest_mass[ri[k]];
    if (w != 0.0) acc[bi[k]].add(w * h[k]);
  }
  std::vector<double> values(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) values[i] = acc[i].value();
  return GridTable(block, sub_axes(m, block), std::move(values));
}

GridTable conditional_expectation(const FunctionalSpec& h, const GridMeasure& m,
                                  std::vector<std::size_t> block) {
  const auto values = tabulate(h, m);
  return conditional_expectation(values, m, std::move(block));
}

Polynomial conditional_expectation(const Polynomial& p, const GaussianMeasure& g,
                                   std::vector<std::size_t> block) {
  if (p.dim() != g.dim()) throw Error(ErrorCode::DimensionMismatch, "polynomial dimension mismatch");
  block = as_set(std::move(block), g.dim());
  const auto rest = complement_of(block, g.dim());
  if (rest.empty()) return p;
  for (std::size_t i : block) {
    for (std::size_t j : rest) {
      if (std::abs(g.covariance()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) > 1e-12) {
        throw Error(ErrorCode::NotProductMeasure, "Gaussian couples the block with the remaining coordinates");
      }
    }
  }
  GaussianMoments rest_moments(g.marginal(rest));
  std::vector<Monomial> terms;
  for (const auto& t : p.terms()) {
    Exponents er(rest.size());
    for (std::size_t a = 0; a < rest.size(); ++a) er[a] = t.exponents[rest[a]];
    Exponents eb(p.dim(), 0);
    for (std::size_t i : block) eb[i] = t.exponents[i];
    terms.push_back({t.coef * rest_moments(er), std::move(eb)});
  }
  return Polynomial(p.dim(), std::move(terms));
}

}  // namespace vibias
