#include "topo/substitution.hpp"

namespace topo {

JetExpr SubstitutionLedger::expand(const JetExpr& base) const {
  JetExpr r;
  for (const auto& [k, c] : coefficients) r += c * total_derivative(base, k);
  return r;
}

Substituter::Substituter(Symbol leading, JetExpr rhs, int max_depth)
    : leading_(leading), rhs_(std::move(rhs)), max_depth_(max_depth) {
  if (leading_.kind != SymbolKind::Jet && leading_.kind != SymbolKind::ArbFun)
    throw std::invalid_argument("leading symbol must be a jet coordinate or function derivative");
  if (!is_reduced(rhs_))
    throw std::invalid_argument("right-hand side contains the leading derivative " + to_string(leading_));
}

bool Substituter::reducible(const Symbol& s) const {
  return s.kind == leading_.kind && s.id == leading_.id && divides(leading_.deriv, s.deriv);
}

bool Substituter::is_reduced(const JetExpr& e) const {
  return !e.contains([this](const Symbol& s) { return reducible(s); });
}

const JetExpr& Substituter::raw(const MultiIndex& k) const {
  std::lock_guard lk(mu_);
  if (auto it = raw_cache_.find(k); it != raw_cache_.end()) return it->second;
  JetExpr r;
  if (order(k) == 0) {
    r = rhs_;
  } else {
    for (int a = 0; a < kSlots; ++a) {
      if (k[a] > 0) {
        r = total_derivative(raw(bumped(k, a, -1)), a);
        break;
      }
    }
  }
  return raw_cache_.emplace(k, std::move(r)).first->second;
}

const JetExpr& Substituter::reduced(const MultiIndex& d, int depth) const {
  std::lock_guard lk(mu_);
  if (auto it = reduced_cache_.find(d); it != reduced_cache_.end()) return it->second;
  if (depth > max_depth_ || in_progress_.count(d))
    throw SubstitutionDepthExceeded("substitution for " + to_string(leading_) +
                                    " does not terminate; check the declared leading derivative");
  in_progress_.insert(d);
  MultiIndex k = difference(d, leading_.deriv);
  JetExpr r;
  if (order(k) == 0) {
    r = rhs_;
  } else {
    // Differentiate the reduced form of a lower derivative, spatial axes first
    // so that time derivatives of the right-hand side stay shallow.
    int axis = -1;
    for (int a = kSlots - 1; a >= 0; --a)
      if (k[a] > 0) {
        axis = a;
        break;
      }
    JetExpr lower = reduced(bumped(d, axis, -1), depth + 1);
    r = apply_depth(total_derivative(lower, axis), depth + 1);
  }
  in_progress_.erase(d);
  return reduced_cache_.emplace(d, std::move(r)).first->second;
}

JetExpr Substituter::apply_depth(const JetExpr& e, int depth) const {
  JetExpr out;
  for (const auto& [m, c] : e.terms()) {
    bool any = false;
    for (const auto& f : m.factors)
      if (reducible(f.sym)) {
        any = true;
        break;
      }
    if (!any) {
      out.add_term(c, m);
      continue;
    }
    JetExpr prod(c);
    Monomial kept;
    for (const auto& f : m.factors) {
      if (reducible(f.sym)) {
        prod *= reduced(f.sym.deriv, depth).pow(f.power);
      } else {
        kept = kept.times(f.sym, f.power);
      }
    }
    out += prod * JetExpr::term(1, kept);
  }
  return out;
}

JetExpr Substituter::apply(const JetExpr& e) const { return apply_depth(e, 0); }

JetExpr Substituter::apply(const JetExpr& e, SubstitutionLedger& ledger) const {
  JetExpr cur = e;
  for (int pass = 0;; ++pass) {
    if (pass > 50 * max_depth_)
      throw SubstitutionDepthExceeded("ledger substitution for " + to_string(leading_) + " does not terminate");
    JetExpr next;
    bool changed = false;
    for (const auto& [m, c] : cur.terms()) {
      const Factor* hit = nullptr;
      for (const auto& f : m.factors)
        if (reducible(f.sym)) {
          hit = &f;
          break;
        }
      if (!hit) {
        next.add_term(c, m);
        continue;
      }
      changed = true;
      MultiIndex k = difference(hit->sym.deriv, leading_.deriv);
      JetExpr coeff = JetExpr::term(c, m.without(hit->sym, 1));
      ledger.coefficients[k] += coeff;
      next += coeff * raw(k);
    }
    cur = std::move(next);
    if (!changed) break;
  }
  for (auto it = ledger.coefficients.begin(); it != ledger.coefficients.end();) {
    if (it->second.is_zero()) {
      it = ledger.coefficients.erase(it);
    } else {
      ++it;
    }
  }
  return cur;
}

// ---------------------------------------------------------------------------

void SideRelations::add_square(std::uint8_t param, const Rational& square) {
  if (square == 0) throw std::invalid_argument("square relation with zero value");
  squares_[param] = square;
}

void SideRelations::add_function_relation(Symbol leading, JetExpr rhs) {
  functions_.push_back(std::make_shared<Substituter>(leading, std::move(rhs)));
}

JetExpr SideRelations::reduce_params(const JetExpr& e) const {
  if (squares_.empty()) return e;
  JetExpr out;
  for (const auto& [m, c] : e.terms()) {
    Rational coef = c;
    Monomial kept;
    for (const auto& f : m.factors) {
      auto it = f.sym.kind == SymbolKind::Param ? squares_.find(f.sym.id) : squares_.end();
      if (it == squares_.end()) {
        kept = kept.times(f.sym, f.power);
        continue;
      }
      // p^k = p^(k mod 2) * square^floor(k/2)
      int k = f.power;
      int rem = ((k % 2) + 2) % 2;
      int half = (k - rem) / 2;
      Rational scale = 1;
      Rational base = half >= 0 ? it->second : 1 / it->second;
      for (int i = 0; i < std::abs(half); ++i) scale *= base;
      coef *= scale;
      if (rem) kept = kept.times(f.sym, 1);
    }
    out.add_term(coef, kept);
  }
  return out;
}

JetExpr SideRelations::reduce(const JetExpr& e) const {
  JetExpr r = e;
  for (const auto& s : functions_) r = s->apply(r);
  return reduce_params(r);
}

}  // namespace topo
