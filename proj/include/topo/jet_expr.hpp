/// @file jet_expr.hpp
/// @brief Exact polynomial expressions on jet space.
///
/// A JetExpr is a canonical sum of terms, each an exact rational coefficient
/// times a monomial in independent variables (t, x, y, z), jet coordinates of
/// dependent fields (u and its derivatives, potentials w, ...), arbitrary
/// functions of a subset of the independent variables, and named constant
/// parameters. Parameters may carry negative powers (so 1/alpha is a valid
/// coefficient); every other symbol carries a positive power.
#pragma once

#include <gmpxx.h>

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace topo {

using Rational = mpq_class;

/// Slots of a multi-index: t first, then the spatial axes x, y, z.
inline constexpr int kSlots = 4;
inline constexpr int kTime = 0;

using MultiIndex = std::array<std::uint8_t, kSlots>;

int order(const MultiIndex& m);
int spatial_order(const MultiIndex& m);
MultiIndex bumped(MultiIndex m, int axis, int by = 1);
/// Component-wise a <= b.
bool divides(const MultiIndex& a, const MultiIndex& b);
MultiIndex difference(const MultiIndex& b, const MultiIndex& a);
/// Parses a subscript such as "txxy" into a multi-index.
MultiIndex multi_index_from_letters(std::string_view letters);
std::string letters_of(const MultiIndex& m);
char axis_letter(int axis);

enum class SymbolKind : std::uint8_t { Param = 0, Indep = 1, ArbFun = 2, Jet = 3 };

/// One symbol of the monomial alphabet. `id` is the interned name of a
/// parameter, function or field, or the slot of an independent variable.
struct Symbol {
  SymbolKind kind = SymbolKind::Param;
  std::uint8_t id = 0;
  MultiIndex deriv{};

  auto operator<=>(const Symbol&) const = default;
  bool operator==(const Symbol&) const = default;

  static Symbol param(std::uint8_t id) { return {SymbolKind::Param, id, {}}; }
  static Symbol indep(int axis) { return {SymbolKind::Indep, static_cast<std::uint8_t>(axis), {}}; }
  static Symbol jet(std::uint8_t field, MultiIndex d = {}) { return {SymbolKind::Jet, field, d}; }
  static Symbol fun(std::uint8_t fid, MultiIndex d = {}) { return {SymbolKind::ArbFun, fid, d}; }
};

/// Process-wide intern table for field, function and parameter names.
/// Fixed names are registered first so that the monomial order is stable.
class SymbolRegistry {
 public:
  static SymbolRegistry& instance();

  std::uint8_t field(std::string_view name);
  /// `signature` is a bit mask over slots (bit 0 = t, bit 1 = x, ...).
  std::uint8_t function(std::string_view name, unsigned signature);
  std::uint8_t param(std::string_view name);

  std::string field_name(std::uint8_t id) const;
  std::string function_name(std::uint8_t id) const;
  unsigned function_signature(std::uint8_t id) const;
  std::string param_name(std::uint8_t id) const;

  std::optional<std::uint8_t> find_field(std::string_view name) const;
  std::optional<std::uint8_t> find_param(std::string_view name) const;

 private:
  SymbolRegistry();
  struct Impl;
  Impl* impl_;
};

inline constexpr unsigned kSigTime = 1u;
inline constexpr unsigned kSigAll = 0xFu;

/// Convenience accessors for the standard dependent variable.
std::uint8_t field_u();
Symbol u_jet(const MultiIndex& d = {});
Symbol u_jet(std::string_view letters);

std::string to_string(const Symbol& s);

struct Factor {
  Symbol sym;
  int power = 1;
  auto operator<=>(const Factor&) const = default;
  bool operator==(const Factor&) const = default;
};

/// Product of symbol powers, sorted by symbol, no zero powers.
struct Monomial {
  std::vector<Factor> factors;

  auto operator<=>(const Monomial&) const = default;
  bool operator==(const Monomial&) const = default;

  bool empty() const { return factors.empty(); }
  int power_of(const Symbol& s) const;
  /// Number of jet factors counted with multiplicity.
  int jet_degree() const;
  int max_jet_order() const;
  bool params_only() const;

  Monomial times(const Monomial& other) const;
  Monomial times(const Symbol& s, int power = 1) const;
  /// Lowers the power of `s` by `by`; `s` must be present with power >= by
  /// unless it is a parameter.
  Monomial without(const Symbol& s, int by = 1) const;
};

class JetExpr {
 public:
  using TermMap = std::map<Monomial, Rational>;

  JetExpr() = default;
  JetExpr(const Rational& c);  // NOLINT(google-explicit-constructor)
  JetExpr(long c) : JetExpr(Rational(c)) {}  // NOLINT
  JetExpr(int c) : JetExpr(Rational(c)) {}   // NOLINT

  static JetExpr symbol(const Symbol& s, int power = 1);
  static JetExpr term(const Rational& c, Monomial m);

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  /// Coefficient of a monomial (zero if absent).
  Rational coefficient(const Monomial& m) const;
  /// True when the expression is a rational constant.
  bool is_constant() const;
  Rational constant_value() const;

  void add_term(const Rational& c, const Monomial& m);

  JetExpr& operator+=(const JetExpr& o);
  JetExpr& operator-=(const JetExpr& o);
  JetExpr& operator*=(const JetExpr& o);
  JetExpr& operator*=(const Rational& c);

  friend JetExpr operator+(JetExpr a, const JetExpr& b) { return a += b; }
  friend JetExpr operator-(JetExpr a, const JetExpr& b) { return a -= b; }
  friend JetExpr operator*(const JetExpr& a, const JetExpr& b);
  friend JetExpr operator*(JetExpr a, const Rational& c) { return a *= c; }
  friend JetExpr operator*(const Rational& c, JetExpr a) { return a *= c; }
  friend JetExpr operator*(JetExpr a, int c) { return a *= Rational(c); }
  friend JetExpr operator*(int c, JetExpr a) { return a *= Rational(c); }
  friend JetExpr operator-(JetExpr a);
  friend bool operator==(const JetExpr& a, const JetExpr& b) { return a.terms_ == b.terms_; }

  JetExpr pow(int k) const;

  /// Total jet degree (max over terms), maximal jet order, etc.
  int jet_degree() const;
  int max_jet_order() const;
  int max_power_of_indep(int axis) const;
  bool contains(const std::function<bool(const Symbol&)>& pred) const;
  std::vector<Symbol> symbols() const;

 private:
  TermMap terms_;
};

/// Printable form in the expression grammar (re-parseable).
std::string to_string(const JetExpr& e);

/// Total derivative D_axis with respect to slot `axis` (0 = t).
JetExpr total_derivative(const JetExpr& e, int axis);
/// Repeated total derivative D^K.
JetExpr total_derivative(const JetExpr& e, const MultiIndex& k);
/// Partial derivative with respect to one symbol, treating all others as
/// independent coordinates.
JetExpr partial(const JetExpr& e, const Symbol& s);

/// Replaces symbols: `rule` returns the replacement for a symbol or nullopt
/// to keep it. Negative parameter powers need a single-term replacement.
JetExpr substitute(const JetExpr& e, const std::function<std::optional<JetExpr>(const Symbol&)>& rule);

/// Coefficient expression of a symbol power: the part of e proportional to
/// s^power exactly, divided by s^power.
JetExpr coefficient_of(const JetExpr& e, const Symbol& s, int power);

class MissingBinding : public std::runtime_error {
 public:
  explicit MissingBinding(const Symbol& s);
  Symbol symbol;
};

using SymbolValues = std::map<Symbol, double>;

/// Floating point evaluation. Every symbol of e needs a binding.
double eval_at(const JetExpr& e, const SymbolValues& values);
double eval_at(const JetExpr& e, const std::function<std::optional<double>(const Symbol&)>& lookup);

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Symbols visible to the parser.
struct ParseContext {
  int dim = 1;
  std::vector<std::string> fields{"u"};
  std::map<std::string, unsigned> functions{{"f", kSigTime}};
  std::vector<std::string> params;

  int slots() const { return dim + 1; }
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownSymbol, OutsideSignature, NonPolynomial };
  ParseError(Kind kind, std::size_t offset, const std::string& what);
  Kind kind;
  std::size_t offset;
};

JetExpr parse_expr(std::string_view source, const ParseContext& ctx);
JetExpr parse_expr(std::string_view source, int dim);

}  // namespace topo
