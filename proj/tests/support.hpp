#pragma once

// Independent oracles and seeded generators shared by the unit tests.

#include "vibias/block_structure.hpp"
#include "vibias/error.hpp"
#include "vibias/functional.hpp"
#include "vibias/gaussian_measure.hpp"
#include "vibias/grid_measure.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace testing_support {

/// Code of the vibias::Error raised by f; fails the test when nothing is thrown.
template <class F>
vibias::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const vibias::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vibias::Error thrown";
  return vibias::ErrorCode::InvalidArgument;
}

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(eng() >> 11) * 0x1.0p-53;
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(eng() % n); }
};

inline Eigen::MatrixXd random_spd(Rng& rng, std::size_t d, double ridge = 0.3) {
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  }
  Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(d) + ridge * Eigen::MatrixXd::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

inline vibias::Polynomial random_polynomial(Rng& rng, std::size_t d, unsigned max_degree, std::size_t max_terms = 6) {
  const std::size_t terms = 1 + rng.below(max_terms);
  std::vector<vibias::Monomial> out;
  for (std::size_t t = 0; t < terms; ++t) {
    vibias::Exponents e(d, 0);
    const unsigned deg = static_cast<unsigned>(rng.below(max_degree + 1));
    for (unsigned k = 0; k < deg; ++k) e[rng.below(d)] += 1;
    out.push_back({rng.uniform(-1.0, 1.0), e});
  }
  return vibias::Polynomial(d, std::move(out));
}

inline Eigen::MatrixXd pair_cov(double rho, double v = 1.0) {
  Eigen::MatrixXd s(2, 2);
  s << v, rho * v, rho * v, v;
  return s;
}

/// Centered Gaussian moment of the listed coordinates by pair-partition
/// enumeration (Isserlis).
inline double isserlis(const Eigen::MatrixXd& c, std::vector<std::size_t> idx) {
  if (idx.empty()) return 1.0;
  if (idx.size() % 2) return 0.0;
  const std::size_t first = idx[0];
  double total = 0.0;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    std::vector<std::size_t> rest;
    for (std::size_t j = 1; j < idx.size(); ++j) {
      if (j != k) rest.push_back(idx[j]);
    }
    total += c(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(idx[k])) * isserlis(c, rest);
  }
  return total;
}

/// Raw moment under N(m, c): expand each factor as m_i + z_i over all subsets.
inline double raw_moment(const Eigen::VectorXd& m, const Eigen::MatrixXd& c, const vibias::Exponents& e) {
  std::vector<std::size_t> factors;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (unsigned k = 0; k < e[i]; ++k) factors.push_back(i);
  }
  const std::size_t n = factors.size();
  double total = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double prod = 1.0;
    std::vector<std::size_t> z;
    for (std::size_t k = 0; k < n; ++k) {
      if (mask & (std::size_t{1} << k)) {
        z.push_back(factors[k]);
      } else {
        prod *= m(static_cast<Eigen::Index>(factors[k]));
      }
    }
    total += prod * isserlis(c, z);
  }
  return total;
}

inline double raw_moment(const Eigen::VectorXd& m, const Eigen::MatrixXd& c, const vibias::Polynomial& p) {
  double s = 0.0;
  for (const auto& t : p.terms()) s += t.coef * raw_moment(m, c, t.exponents);
  return s;
}

/// Composite Simpson on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// P(X > s, Y > t) for unit-variance normals with correlation rho.
inline double bivariate_tail(double s, double t, double rho) {
  const double r = std::sqrt(1.0 - rho * rho);
  return simpson([&](double x) { return normal_pdf(x) * normal_sf((t - rho * x) / r); }, s, s + 14.0, 40000);
}

/// E[f] under a 2-d Gaussian by tensor Simpson on mean +- 9 sd.
inline double gaussian2_quadrature(const Eigen::VectorXd& m, const Eigen::MatrixXd& c,
                                   const std::function<double(double, double)>& f, std::size_t n = 800) {
  const Eigen::MatrixXd p = c.inverse();
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(c.determinant()));
  const double s0 = std::sqrt(c(0, 0)), s1 = std::sqrt(c(1, 1));
  return simpson(
      [&](double x) {
        return simpson(
            [&](double y) {
              const double a = x - m(0), b = y - m(1);
              const double q = p(0, 0) * a * a + 2.0 * p(0, 1) * a * b + p(1, 1) * b * b;
              return norm * std::exp(-0.5 * q) * f(x, y);
            },
            m(1) - 9.0 * s1, m(1) + 9.0 * s1, n);
      },
      m(0) - 9.0 * s0, m(0) + 9.0 * s0, n);
}

/// Direct sum of masses * values in plain double precision.
inline double plain_expect(const vibias::GridMeasure& g, const std::function<double(const std::vector<double>&)>& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += g.mass(k) * f(g.node(k));
  return s;
}

/// Random product grid across `blocks` (arbitrary joint masses within each block).
inline vibias::GridMeasure random_product_grid(Rng& rng, const vibias::BlockStructure& blocks,
                                               std::size_t min_pts = 4, std::size_t extra = 4) {
  vibias::Axes axes;
  std::vector<std::size_t> shape;
  for (std::size_t i = 0; i < blocks.dim(); ++i) {
    const std::size_t k = min_pts + rng.below(extra + 1);
    std::vector<double> ax(k);
    double x = -2.0;
    for (auto& a : ax) {
      x += rng.uniform(0.1, 0.7);
      a = x;
    }
    axes.push_back(ax);
    shape.push_back(k);
  }
  std::size_t total = 1;
  for (std::size_t s : shape) total *= s;
  std::vector<double> lw(total, 0.0);
  for (const auto& blk : blocks.blocks()) {
    std::vector<double> f(vibias::product_of(shape, blk));
    for (auto& x : f) x = rng.uniform(-2.0, 0.0);
    const auto idx = vibias::sub_indices(shape, blk);
    for (std::size_t k = 0; k < total; ++k) lw[k] += f[idx[k]];
  }
  return vibias::normalize(vibias::GridMeasure(axes, lw));
}

}  // namespace testing_support
