#include "vibias/tangent.hpp"

#include "vibias/error.hpp"
#include "vibias/expectation.hpp"
#include "vibias/moments.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vibias {

namespace {

void require_product(const Measure& q, const BlockStructure& blocks) {
  if (dim_of(q) != blocks.dim()) throw Error(ErrorCode::DimensionMismatch, "block structure dimension mismatch");
  if (const auto* g = std::get_if<GaussianMeasure>(&q)) {
    if (!is_block_diagonal(g->covariance(), blocks)) {
      throw Error(ErrorCode::NotProductMeasure, "Gaussian covariance couples blocks");
    }
  } else if (!is_product_measure(std::get<GridMeasure>(q), blocks)) {
    throw Error(ErrorCode::NotProductMeasure, "grid measure does not factor across blocks");
  }
}

// Uniform on [-1, 1) from the raw engine output, identical on every platform.
double unit_uniform(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

}  // namespace

std::string_view to_string(FamilyTag tag) noexcept {
  return tag == FamilyTag::GaussianMeanField ? "gaussian_mean_field" : "grid_product";
}

ScoreBasis score_basis(const MeanFieldFit& fit) {
  if (!fit.converged) throw Error(ErrorCode::NotConverged, "fit did not converge");
  return score_basis(fit.qstar, fit.blocks);
}

ScoreBasis score_basis(const Measure& qstar, const BlockStructure& blocks) {
  require_product(qstar, blocks);
  ScoreBasis basis;
  if (const auto* g = std::get_if<GaussianMeasure>(&qstar)) {
    basis.family = FamilyTag::GaussianMeanField;
    const std::size_t d = g->dim();
    auto centered = [&](std::size_t i) {
      return Polynomial::coordinate(d, i) - g->mean()(static_cast<Eigen::Index>(i));
    };
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks.block(b);
      for (std::size_t i : blk) {
        basis.scores.emplace_back(centered(i));
        basis.block_index.push_back(b);
      }
      for (std::size_t a = 0; a < blk.size(); ++a) {
        for (std::size_t c = a; c < blk.size(); ++c) {
          const double v = g->covariance()(static_cast<Eigen::Index>(blk[a]), static_cast<Eigen::Index>(blk[c]));
          basis.scores.emplace_back(centered(blk[a]) * centered(blk[c]) - v);
          basis.block_index.push_back(b);
        }
      }
    }
    return basis;
  }
  basis.family = FamilyTag::GridProduct;
  const auto& grid = std::get<GridMeasure>(qstar);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const GridMeasure factor = marginal(grid, blocks.block(b));
    const auto masses = factor.masses();
    for (std::size_t k = 0; k + 1 < masses.size(); ++k) {
      std::vector<double> values(masses.size());
      for (std::size_t j = 0; j < masses.size(); ++j) values[j] = (j == k ? 1.0 : 0.0) - masses[k];
      basis.scores.emplace_back(GridTable(blocks.block(b), factor.axes(), std::move(values)));
      basis.block_index.push_back(b);
    }
  }
  return basis;
}

FunctionalSpec AnovaDecomposition::additive_part() const {
  if (interaction.is_polynomial()) {
    Polynomial out = Polynomial::constant(interaction.polynomial().dim(), mean);
    for (const auto& c : block_components) out = out + c.polynomial();
    return out;
  }
  const GridTable& full = interaction.grid_table();
  std::vector<std::size_t> shape;
  for (const auto& ax : full.axes) shape.push_back(ax.size());
  std::vector<double> values(full.values.size(), mean);
  for (const auto& c : block_components) {
    const GridTable& t = c.grid_table();
    const auto idx = sub_indices(shape, t.coords);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += t.values[idx[k]];
  }
  return GridTable(full.coords, full.axes, std::move(values));
}

AnovaDecomposition anova_decompose(const FunctionalSpec& h, const Measure& qstar,
                                   const BlockStructure& blocks) {
  require_product(qstar, blocks);
  if (const auto* g = std::get_if<GaussianMeasure>(&qstar)) {
    if (!h.is_polynomial()) {
      throw Error(ErrorCode::UnsupportedPair, "Gaussian ANOVA needs a polynomial functional");
    }
    const Polynomial& p = h.polynomial();
    if (p.dim() != g->dim()) throw Error(ErrorCode::DimensionMismatch, "functional dimension mismatch");
    const double prune = 1e-14 * (1.0 + p.max_abs_coef());
    const double mean = expect(*g, p);
    std::vector<FunctionalSpec> comps;
    Polynomial rest = p - mean;
    for (const auto& blk : blocks.blocks()) {
      Polynomial c = (conditional_expectation(p, *g, blk) - mean).pruned(prune);
      rest = rest - c;
      comps.emplace_back(std::move(c));
    }
    return {mean, std::move(comps), rest.pruned(prune), blocks};
  }
  const auto& grid = std::get<GridMeasure>(qstar);
  const auto values = tabulate(h, grid);
  const double mean = expect(grid, values);
  std::vector<double> rest(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) rest[k] = values[k] - mean;
  std::vector<FunctionalSpec> comps;
  for (const auto& blk : blocks.blocks()) {
    GridTable t = conditional_expectation(values, grid, blk);
    for (auto& v : t.values) v -= mean;
    const auto idx = sub_indices(grid.shape(), t.coords);
    for (std::size_t k = 0; k < rest.size(); ++k) rest[k] -= t.values[idx[k]];
    comps.emplace_back(std::move(t));
  }
  return {mean, std::move(comps), full_table(grid, std::move(rest)), blocks};
}

TangentProjection tangent_project(const FunctionalSpec& h, const MeanFieldFit& fit) {
  if (!fit.converged) throw Error(ErrorCode::NotConverged, "fit did not converge");
  const AnovaDecomposition a = anova_decompose(h, fit.qstar, fit.blocks);
  return {a.additive_part(), a.interaction};
}

std::vector<Polynomial> block_additive_probes(const BlockStructure& blocks, std::size_t count,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t d = blocks.dim();
  std::vector<Polynomial> out;
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<Monomial> terms;
    for (const auto& blk : blocks.blocks()) {
      for (std::size_t a = 0; a < blk.size(); ++a) {
        Exponents e(d, 0);
        e[blk[a]] = 1;
        terms.push_back({unit_uniform(rng), e});
      }
      for (std::size_t a = 0; a < blk.size(); ++a) {
        for (std::size_t c = a; c < blk.size(); ++c) {
          Exponents e(d, 0);
          e[blk[a]] += 1;
          e[blk[c]] += 1;
          terms.push_back({unit_uniform(rng), e});
        }
      }
    }
    out.emplace_back(d, std::move(terms));
  }
  return out;
}

OrthogonalityReport orthogonality_report(const ResidualFunctional& delta, const ScoreBasis& basis,
                                         const Measure& qstar, std::size_t probes, std::uint64_t seed) {
  OrthogonalityReport report;
  report.probes = probes;
  report.seed = seed;
  const std::size_t d = dim_of(qstar);
  BlockStructure blocks = BlockStructure::single_block(d);
  if (!basis.block_index.empty()) {
    std::vector<std::vector<std::size_t>> groups(basis.block_index.back() + 1);
    for (std::size_t j = 0; j < basis.scores.size(); ++j) {
      for (std::size_t c : basis.scores[j].support()) groups[basis.block_index[j]].push_back(c);
    }
    // Blocks can lose every score on a single-node grid axis; fold missing
    // coordinates into singleton blocks.
    std::vector<bool> seen(d, false);
    std::vector<std::vector<std::size_t>> clean;
    for (auto& g : groups) {
      std::sort(g.begin(), g.end());
      g.erase(std::unique(g.begin(), g.end()), g.end());
      for (std::size_t c : g) seen[c] = true;
      if (!g.empty()) clean.push_back(g);
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (!seen[c]) clean.push_back({c});
    }
    blocks = BlockStructure(std::move(clean), d);
  }
  const auto probe_polys = block_additive_probes(blocks, probes, seed);

  if (const auto* grid = std::get_if<GridMeasure>(&qstar)) {
    const auto masses = grid->masses();
    const auto dv = tabulate(delta.functional(), *grid);
    auto inner = [&](const FunctionalSpec& f, bool center) {
      auto fv = tabulate(f, *grid);
      const double m = center ? weighted_sum(masses, fv) : 0.0;
      for (std::size_t k = 0; k < fv.size(); ++k) fv[k] = (fv[k] - m) * dv[k];
      return weighted_sum(masses, fv);
    };
    for (const auto& s : basis.scores) report.max_score_inner = std::max(report.max_score_inner, std::abs(inner(s, false)));
    for (const auto& p : probe_polys) report.max_probe_inner = std::max(report.max_probe_inner, std::abs(inner(p, true)));
    return report;
  }
  const auto& g = std::get<GaussianMeasure>(qstar);
  GaussianMoments moments(g);
  const Polynomial& dp = delta.functional().polynomial();
  for (const auto& s : basis.scores) {
    report.max_score_inner = std::max(report.max_score_inner, std::abs(moments.expect(s.polynomial() * dp)));
  }
  for (const auto& p : probe_polys) {
    const Polynomial pc = p - moments.expect(p);
    report.max_probe_inner = std::max(report.max_probe_inner, std::abs(moments.expect(pc * dp)));
  }
  return report;
}

}  // namespace vibias
