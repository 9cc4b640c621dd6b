#pragma once

#include "vibias/grid_measure.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace vibias {

using Exponents = std::vector<unsigned>;

struct Monomial {
  double coef = 0.0;
  Exponents exponents;
};

/// Real polynomial in `dim` variables, kept in canonical form: terms sorted
/// by exponent vector, duplicates merged, zero coefficients dropped.
class Polynomial {
 public:
  explicit Polynomial(std::size_t dim, std::vector<Monomial> terms = {});

  static Polynomial constant(std::size_t dim, double c);
  static Polynomial coordinate(std::size_t dim, std::size_t i);
  static Polynomial monomial(double coef, Exponents exponents);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Monomial>& terms() const noexcept { return terms_; }
  bool empty() const noexcept { return terms_.empty(); }
  unsigned degree() const;

  double evaluate(std::span<const double> x) const;

  /// Coordinates that appear with a positive exponent in some term.
  std::vector<std::size_t> support() const;

  /// Coefficient of the constant monomial.
  double constant_term() const;

  double max_abs_coef() const;
  bool is_zero(double tol = 0.0) const { return max_abs_coef() <= tol; }

  /// Drop terms whose |coef| <= tol.
  Polynomial pruned(double tol) const;

  Polynomial operator-() const;
  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(double s, const Polynomial& p);
  friend Polynomial operator+(const Polynomial& p, double c);
  friend Polynomial operator-(const Polynomial& p, double c);

  bool operator==(const Polynomial& other) const;

 private:
  std::size_t dim_;
  std::vector<Monomial> terms_;
};

/// Indicator of the open box {theta_i > lower_i for every engaged i}.
/// Unset or -inf thresholds leave the coordinate unconstrained.
struct BoxTail {
  std::vector<std::optional<double>> lower;

  explicit BoxTail(std::vector<std::optional<double>> thresholds);

  std::size_t dim() const noexcept { return lower.size(); }
  bool active(std::size_t i) const;
  std::vector<std::size_t> active_coords() const;
  double evaluate(std::span<const double> x) const;
};

/// Values tabulated on the sub-grid spanned by `coords` (row-major over the
/// sorted coordinates).
struct GridTable {
  std::vector<std::size_t> coords;
  Axes axes;
  std::vector<double> values;

  GridTable(std::vector<std::size_t> coords, Axes axes, std::vector<double> values);
};

enum class FunctionalKind { Polynomial, BoxTail, GridTable };

class FunctionalSpec {
 public:
  using Variant = std::variant<Polynomial, BoxTail, GridTable>;

  FunctionalSpec(Polynomial p) : v_(std::move(p)) {}  // NOLINT(implicit)
  FunctionalSpec(BoxTail b) : v_(std::move(b)) {}     // NOLINT(implicit)
  FunctionalSpec(GridTable t) : v_(std::move(t)) {}   // NOLINT(implicit)

  FunctionalKind kind() const noexcept { return static_cast<FunctionalKind>(v_.index()); }
  const Variant& variant() const noexcept { return v_; }

  bool is_polynomial() const noexcept { return kind() == FunctionalKind::Polynomial; }
  const Polynomial& polynomial() const;
  const BoxTail& box_tail() const;
  const GridTable& grid_table() const;

  /// Coordinates the functional can depend on.
  std::vector<std::size_t> support() const;

 private:
  Variant v_;
};

std::string_view to_string(FunctionalKind kind) noexcept;

/// Values of `f` at every node of `grid`, row-major.
std::vector<double> tabulate(const FunctionalSpec& f, const GridMeasure& grid);

/// Wrap per-node values on `grid` as a GridTable over all coordinates.
GridTable full_table(const GridMeasure& grid, std::vector<double> values);

}  // namespace vibias
