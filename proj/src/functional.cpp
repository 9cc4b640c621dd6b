#include "vibias/functional.hpp"

#include "vibias/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace vibias {

namespace {

std::vector<Monomial> canonicalize(std::size_t dim, std::vector<Monomial> terms) {
  std::map<Exponents, double> merged;
  for (auto& t : terms) {
    if (t.exponents.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "monomial has " + std::to_string(t.exponents.size()) +
                                                    " exponents, polynomial dimension is " +
                                                    std::to_string(dim));
    }
    if (!std::isfinite(t.coef)) throw Error(ErrorCode::InvalidArgument, "coefficients must be finite");
    merged[t.exponents] += t.coef;
  }
  std::vector<Monomial> out;
  out.reserve(merged.size());
  for (auto& [e, c] : merged) {
    if (c != 0.0) out.push_back({c, e});
  }
  return out;
}

double ipow(double x, unsigned e) {
  double r = 1.0;
  while (e) {
    if (e & 1u) r *= x;
    x *= x;
    e >>= 1u;
  }
  return r;
}

}  // namespace

Polynomial::Polynomial(std::size_t dim, std::vector<Monomial> terms)
    : dim_(dim), terms_(canonicalize(dim, std::move(terms))) {}

Polynomial Polynomial::constant(std::size_t dim, double c) {
  return Polynomial(dim, {{c, Exponents(dim, 0)}});
}

Polynomial Polynomial::coordinate(std::size_t dim, std::size_t i) {
  if (i >= dim) throw Error(ErrorCode::InvalidArgument, "coordinate index out of range");
  Exponents e(dim, 0);
  e[i] = 1;
  return Polynomial(dim, {{1.0, std::move(e)}});
}

Polynomial Polynomial::monomial(double coef, Exponents exponents) {
  const std::size_t d = exponents.size();
  return Polynomial(d, {{coef, std::move(exponents)}});
}

unsigned Polynomial::degree() const {
  unsigned deg = 0;
  for (const auto& t : terms_) {
    unsigned s = 0;
    for (unsigned e : t.exponents) s += e;
    deg = std::max(deg, s);
  }
  return deg;
}

double Polynomial::evaluate(std::span<const double> x) const {
  if (x.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
  double s = 0.0;
  for (const auto& t : terms_) {
    double v = t.coef;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (t.exponents[i]) v *= ipow(x[i], t.exponents[i]);
    }
    s += v;
  }
  return s;
}

std::vector<std::size_t> Polynomial::support() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dim_; ++i) {
    for (const auto& t : terms_) {
      if (t.exponents[i] > 0) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

double Polynomial::constant_term() const {
  for (const auto& t : terms_) {
    if (std::all_of(t.exponents.begin(), t.exponents.end(), [](unsigned e) { return e == 0; })) {
      return t.coef;
    }
  }
  return 0.0;
}

double Polynomial::max_abs_coef() const {
  double m = 0.0;
  for (const auto& t : terms_) m = std::max(m, std::abs(t.coef));
  return m;
}

Polynomial Polynomial::pruned(double tol) const {
  std::vector<Monomial> kept;
  for (const auto& t : terms_) {
    if (std::abs(t.coef) > tol) kept.push_back(t);
  }
  return Polynomial(dim_, std::move(kept));
}

Polynomial Polynomial::operator-() const { return (-1.0) * (*this); }

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  if (a.dim_ != b.dim_) throw Error(ErrorCode::DimensionMismatch, "polynomial dimensions differ");
  std::vector<Monomial> t = a.terms_;
  t.insert(t.end(), b.terms_.begin(), b.terms_.end());
  return Polynomial(a.dim_, std::move(t));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.dim_ != b.dim_) throw Error(ErrorCode::DimensionMismatch, "polynomial dimensions differ");
  std::vector<Monomial> t;
  t.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& x : a.terms_) {
    for (const auto& y : b.terms_) {
      Exponents e(a.dim_);
      for (std::size_t i = 0; i < a.dim_; ++i) e[i] = x.exponents[i] + y.exponents[i];
      t.push_back({x.coef * y.coef, std::move(e)});
    }
  }
  return Polynomial(a.dim_, std::move(t));
}

Polynomial operator*(double s, const Polynomial& p) {
  std::vector<Monomial> t = p.terms_;
  for (auto& m : t) m.coef *= s;
  return Polynomial(p.dim_, std::move(t));
}

Polynomial operator+(const Polynomial& p, double c) { return p + Polynomial::constant(p.dim_, c); }
Polynomial operator-(const Polynomial& p, double c) { return p + Polynomial::constant(p.dim_, -c); }

bool Polynomial::operator==(const Polynomial& other) const {
  if (dim_ != other.dim_ || terms_.size() != other.terms_.size()) return false;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    if (terms_[k].coef != other.terms_[k].coef || terms_[k].exponents != other.terms_[k].exponents) {
      return false;
    }
  }
  return true;
}

BoxTail::BoxTail(std::vector<std::optional<double>> thresholds) : lower(std::move(thresholds)) {
  if (std::none_of(lower.begin(), lower.end(), [](const auto& t) { return t.has_value(); })) {
    throw Error(ErrorCode::InvalidArgument, "box tail needs at least one threshold");
  }
  for (const auto& t : lower) {
    if (t && (std::isnan(*t) || *t == std::numeric_limits<double>::infinity())) {
      throw Error(ErrorCode::InvalidArgument, "thresholds must be finite or -inf");
    }
  }
}

bool BoxTail::active(std::size_t i) const {
  return lower.at(i).has_value() && std::isfinite(*lower[i]);
}

std::vector<std::size_t> BoxTail::active_coords() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (active(i)) out.push_back(i);
  }
  return out;
}

double BoxTail::evaluate(std::span<const double> x) const {
  if (x.size() != lower.size()) throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (active(i) && !(x[i] > *lower[i])) return 0.0;
  }
  return 1.0;
}

GridTable::GridTable(std::vector<std::size_t> c, Axes a, std::vector<double> v)
    : coords(std::move(c)), axes(std::move(a)), values(std::move(v)) {
  if (coords.size() != axes.size()) {
    throw Error(ErrorCode::ShapeMismatch, "grid table needs one axis per coordinate");
  }
  if (!std::is_sorted(coords.begin(), coords.end()) ||
      std::adjacent_find(coords.begin(), coords.end()) != coords.end()) {
    throw Error(ErrorCode::InvalidArgument, "grid table coordinates must be sorted and distinct");
  }
  std::size_t total = 1;
  for (const auto& ax : axes) total *= ax.size();
  if (values.size() != total) {
    throw Error(ErrorCode::ShapeMismatch, "grid table values do not match its axes");
  }
}

const Polynomial& FunctionalSpec::polynomial() const {
  if (const auto* p = std::get_if<Polynomial>(&v_)) return *p;
  throw Error(ErrorCode::NotPolynomial, "functional is not a polynomial");
}

const BoxTail& FunctionalSpec::box_tail() const {
  if (const auto* p = std::get_if<BoxTail>(&v_)) return *p;
  throw Error(ErrorCode::InvalidArgument, "functional is not a box tail");
}

const GridTable& FunctionalSpec::grid_table() const {
  if (const auto* p = std::get_if<GridTable>(&v_)) return *p;
  throw Error(ErrorCode::InvalidArgument, "functional is not a grid table");
}

std::vector<std::size_t> FunctionalSpec::support() const {
  switch (kind()) {
    case FunctionalKind::Polynomial: return polynomial().support();
    case FunctionalKind::BoxTail: return box_tail().active_coords();
    case FunctionalKind::GridTable: return grid_table().coords;
  }
  return {};
}

std::string_view to_string(FunctionalKind kind) noexcept {
  switch (kind) {
    case FunctionalKind::Polynomial: return "poly";
    case FunctionalKind::BoxTail: return "boxtail";
    case FunctionalKind::GridTable: return "grid";
  }
  return "unknown";
}

std::vector<double> tabulate(const FunctionalSpec& f, const GridMeasure& grid) {
  const std::size_t n = grid.size();
  std::vector<double> out(n);
  switch (f.kind()) {
    case FunctionalKind::Polynomial: {
      const auto& p = f.polynomial();
      if (p.dim() != grid.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "polynomial dimension does not match grid");
      }
      for (std::size_t k = 0; k < n; ++k) out[k] = p.evaluate(grid.node(k));
      break;
    }
    case FunctionalKind::BoxTail: {
      const auto& b = f.box_tail();
      if (b.dim() != grid.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "box tail dimension does not match grid");
      }
      for (std::size_t k = 0; k < n; ++k) out[k] = b.evaluate(grid.node(k));
      break;
    }
    case FunctionalKind::GridTable: {
      const auto& t = f.grid_table();
      Axes sub;
      for (std::size_t c : t.coords) {
        if (c >= grid.dim()) throw Error(ErrorCode::DimensionMismatch, "grid table coordinate out of range");
        sub.push_back(grid.axis(c));
      }
      if (!same_axes(sub, t.axes)) {
        throw Error(ErrorCode::AxesMismatch, "grid table axes do not match the grid");
      }
      const auto idx = sub_indices(grid.shape(), t.coords);
      for (std::size_t k = 0; k < n; ++k) out[k] = t.values[idx[k]];
      break;
    }
  }
  return out;
}

GridTable full_table(const GridMeasure& grid, std::vector<double> values) {
  std::vector<std::size_t> coords(grid.dim());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  return {std::move(coords), grid.axes(), std::move(values)};
}

}  // namespace vibias
