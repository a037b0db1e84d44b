#include "topo/linear_solve.hpp"

#include <algorithm>

namespace topo {

void SparseRationalSystem::add_row(std::map<std::size_t, Rational> row, Rational rhs) {
  for (auto it = row.begin(); it != row.end();) {
    if (it->second == 0) {
      it = row.erase(it);
    } else {
      ++it;
    }
  }
  rows_.push_back(std::move(row));
  rhs_.push_back(std::move(rhs));
}

std::optional<std::vector<Rational>> SparseRationalSystem::solve() const {
  // Gauss-Jordan with pivots chosen in column order; rows are kept sparse.
  std::vector<std::map<std::size_t, Rational>> rows = rows_;
  std::vector<Rational> rhs = rhs_;
  std::vector<bool> used(rows.size(), false);
  std::map<std::size_t, std::size_t> pivot_row;  // column -> row

  // Column -> rows that touch it, refreshed lazily.
  std::vector<std::vector<std::size_t>> touching(columns_);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [c, v] : rows[r]) touching[c].push_back(r);

  for (std::size_t col = 0; col < columns_; ++col) {
    std::size_t best = rows.size();
    std::size_t best_len = 0;
    for (std::size_t r : touching[col]) {
      if (used[r]) continue;
      auto it = rows[r].find(col);
      if (it == rows[r].end() || it->second == 0) continue;
      if (best == rows.size() || rows[r].size() < best_len) {
        best = r;
        best_len = rows[r].size();
      }
    }
    if (best == rows.size()) continue;
    used[best] = true;
    pivot_row[col] = best;
    Rational inv = 1 / rows[best].at(col);
    for (auto& [c, v] : rows[best]) v *= inv;
    rhs[best] *= inv;
    // Eliminate col from every other row touching it.
    std::vector<std::size_t> targets = touching[col];
    for (std::size_t r : targets) {
      if (r == best) continue;
      auto it = rows[r].find(col);
      if (it == rows[r].end()) continue;
      Rational factor = it->second;
      for (const auto& [c, v] : rows[best]) {
        auto& slot = rows[r][c];
        bool was_zero = slot == 0;
        slot -= factor * v;
        if (slot == 0) {
          rows[r].erase(c);
        } else if (was_zero) {
          touching[c].push_back(r);
        }
      }
      rhs[r] -= factor * rhs[best];
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (!used[r] && rows[r].empty() && rhs[r] != 0) return std::nullopt;
  std::vector<Rational> x(columns_, Rational(0));
  for (const auto& [col, r] : pivot_row) {
    // Free columns are zero, so the pivot value is the reduced right-hand side.
    x[col] = rhs[r];
    for (const auto& [c, v] : rows[r])
      if (c != col && !pivot_row.count(c)) {
        // free variable contributes zero
      }
  }
  // Pivot rows may still reference later pivot columns if they were created
  // before those pivots; back-substitute in reverse pivot order.
  std::vector<std::size_t> cols;
  for (const auto& [col, r] : pivot_row) cols.push_back(col);
  for (auto it = cols.rbegin(); it != cols.rend(); ++it) {
    std::size_t col = *it;
    std::size_t r = pivot_row[col];
    Rational v = rhs[r];
    for (const auto& [c, a] : rows[r])
      if (c != col) v -= a * x[c];
    x[col] = v;
  }
  return x;
}

std::optional<AnsatzResult> solve_ansatz(const std::vector<std::vector<Monomial>>& candidates,
                                         const AnsatzOperator& op, const std::vector<JetExpr>& targets) {
  std::vector<std::pair<std::size_t, const Monomial*>> cols;
  for (std::size_t j = 0; j < candidates.size(); ++j)
    for (const auto& m : candidates[j]) cols.emplace_back(j, &m);

  // Row key: (equation, monomial)
  std::map<std::pair<std::size_t, Monomial>, std::size_t> row_index;
  std::vector<std::map<std::size_t, Rational>> rows;
  std::vector<Rational> rhs;
  auto row_for = [&](std::size_t eq, const Monomial& m) -> std::size_t {
    auto key = std::make_pair(eq, m);
    auto it = row_index.find(key);
    if (it != row_index.end()) return it->second;
    rows.emplace_back();
    rhs.emplace_back(0);
    return row_index.emplace(std::move(key), rows.size() - 1).first->second;
  };
  for (std::size_t c = 0; c < cols.size(); ++c) {
    auto images = op(cols[c].first, *cols[c].second);
    for (std::size_t eq = 0; eq < images.size(); ++eq)
      for (const auto& [m, v] : images[eq].terms()) rows[row_for(eq, m)][c] += v;
  }
  for (std::size_t eq = 0; eq < targets.size(); ++eq)
    for (const auto& [m, v] : targets[eq].terms()) rhs[row_for(eq, m)] += v;

  SparseRationalSystem sys(cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) sys.add_row(std::move(rows[r]), std::move(rhs[r]));
  auto x = sys.solve();
  if (!x) return std::nullopt;
  AnsatzResult res;
  res.columns = cols.size();
  res.unknowns.resize(candidates.size());
  for (std::size_t c = 0; c < cols.size(); ++c)
    if ((*x)[c] != 0) res.unknowns[cols[c].first].add_term((*x)[c], *cols[c].second);
  return res;
}

}  // namespace topo
