/// @file linear_solve.hpp
/// @brief Exact sparse linear systems over the rationals and polynomial
/// ansatz solving for linear differential equations on jet space.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "topo/jet_expr.hpp"

namespace topo {

/// Sparse system A x = b with rational entries. Columns are ordered; the
/// solution sets every free column to zero, which for column order equal to
/// preference order gives a deterministic, minimal-support witness.
class SparseRationalSystem {
 public:
  explicit SparseRationalSystem(std::size_t columns) : columns_(columns) {}

  void add_row(std::map<std::size_t, Rational> row, Rational rhs);
  std::size_t rows() const { return rows_.size(); }
  std::size_t columns() const { return columns_; }

  /// nullopt if inconsistent.
  std::optional<std::vector<Rational>> solve() const;

 private:
  std::size_t columns_;
  std::vector<std::map<std::size_t, Rational>> rows_;
  std::vector<Rational> rhs_;
};

/// Linear operator acting on one unknown component: maps a candidate
/// monomial of that unknown to its contribution to each equation.
using AnsatzOperator = std::function<std::vector<JetExpr>(std::size_t unknown, const Monomial& m)>;

struct AnsatzResult {
  std::vector<JetExpr> unknowns;
  std::size_t columns = 0;
};

/// Finds unknowns X_j = sum over candidates[j] of c * m with
/// op(X) = targets exactly; nullopt when the ansatz admits no solution.
std::optional<AnsatzResult> solve_ansatz(const std::vector<std::vector<Monomial>>& candidates,
                                         const AnsatzOperator& op, const std::vector<JetExpr>& targets);

}  // namespace topo
