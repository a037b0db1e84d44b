/// @file substitution.hpp
/// @brief Leading-derivative substitution and side relations.
///
/// A Substituter eliminates one leading symbol (a jet coordinate of a field,
/// or a derivative of an arbitrary function) together with all of its
/// derivatives, replacing them by total derivatives of a right-hand side.
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <vector>

#include "topo/jet_expr.hpp"

namespace topo {

class SubstitutionDepthExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Records every replacement as coefficient * D^K(leading - rhs).
struct SubstitutionLedger {
  std::map<MultiIndex, JetExpr> coefficients;

  /// Sum of coefficient * D^K(base).
  JetExpr expand(const JetExpr& base) const;
};

class Substituter {
 public:
  /// `leading` must be a Jet or ArbFun symbol; `rhs` must not contain it or
  /// any of its derivatives.
  Substituter(Symbol leading, JetExpr rhs, int max_depth = 200);

  const Symbol& leading() const { return leading_; }
  const JetExpr& rhs() const { return rhs_; }

  bool reducible(const Symbol& s) const;
  bool is_reduced(const JetExpr& e) const;

  /// Replaces every reducible symbol, to a fixed point.
  JetExpr apply(const JetExpr& e) const;
  /// Same, recording the replacement multiples in `ledger`.
  JetExpr apply(const JetExpr& e, SubstitutionLedger& ledger) const;

 private:
  const JetExpr& reduced(const MultiIndex& d, int depth) const;
  JetExpr apply_depth(const JetExpr& e, int depth) const;
  const JetExpr& raw(const MultiIndex& k) const;

  Symbol leading_;
  JetExpr rhs_;
  int max_depth_;

  mutable std::recursive_mutex mu_;
  mutable std::map<MultiIndex, JetExpr> reduced_cache_;
  mutable std::set<MultiIndex> in_progress_;
  mutable std::map<MultiIndex, JetExpr> raw_cache_;
};

/// Relations among constants and arbitrary functions applied before any zero
/// test: parameters with a fixed square (sigma^2 = 1, alpha^2 = 2/3) and
/// differential relations on arbitrary functions (biharmonic phi).
class SideRelations {
 public:
  void add_square(std::uint8_t param, const Rational& square);
  void add_function_relation(Symbol leading, JetExpr rhs);

  bool empty() const { return squares_.empty() && functions_.empty(); }
  const std::map<std::uint8_t, Rational>& squares() const { return squares_; }
  const std::vector<std::shared_ptr<Substituter>>& function_relations() const { return functions_; }

  JetExpr reduce(const JetExpr& e) const;
  bool is_zero(const JetExpr& e) const { return reduce(e).is_zero(); }

 private:
  JetExpr reduce_params(const JetExpr& e) const;

  std::map<std::uint8_t, Rational> squares_;
  std::vector<std::shared_ptr<Substituter>> functions_;
};

}  // namespace topo
