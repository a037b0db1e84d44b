#include "topo/variational.hpp"

#include <deque>
#include <set>

namespace topo {

namespace {

std::set<Symbol> jets_of(const JetExpr& e, std::uint8_t field) {
  std::set<Symbol> out;
  for (const auto& [m, c] : e.terms())
    for (const auto& f : m.factors)
      if (f.sym.kind == SymbolKind::Jet && f.sym.id == field) out.insert(f.sym);
  return out;
}

std::set<std::uint8_t> fields_of(const JetExpr& e) {
  std::set<std::uint8_t> out;
  for (const auto& [m, c] : e.terms())
    for (const auto& f : m.factors)
      if (f.sym.kind == SymbolKind::Jet) out.insert(f.sym.id);
  return out;
}

}  // namespace

JetExpr euler_u(const JetExpr& e, std::uint8_t field) {
  JetExpr r;
  for (const Symbol& s : jets_of(e, field)) {
    JetExpr d = total_derivative(partial(e, s), s.deriv);
    if (order(s.deriv) % 2) {
      r -= d;
    } else {
      r += d;
    }
  }
  return r;
}

JetExpr euler_u(const JetExpr& e) { return euler_u(e, field_u()); }

JetExpr spatial_euler(const JetExpr& e, std::uint8_t field, int time_order) {
  JetExpr r;
  for (const Symbol& s : jets_of(e, field)) {
    if (s.deriv[kTime] != time_order) continue;
    MultiIndex k = s.deriv;
    k[kTime] = 0;
    JetExpr d = total_derivative(partial(e, s), k);
    if (order(k) % 2) {
      r -= d;
    } else {
      r += d;
    }
  }
  return r;
}

JetExpr spatial_euler(const JetExpr& e, int time_order) { return spatial_euler(e, field_u(), time_order); }

int max_time_order(const JetExpr& e, std::uint8_t field) {
  int best = -1;
  for (const Symbol& s : jets_of(e, field)) best = std::max(best, static_cast<int>(s.deriv[kTime]));
  return best;
}

bool is_total_spatial_divergence(const JetExpr& e, int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be at least 1");
  for (std::uint8_t fid : fields_of(e)) {
    int top = max_time_order(e, fid);
    for (int a = 0; a <= top; ++a)
      if (!spatial_euler(e, fid, a).is_zero()) return false;
  }
  return true;
}

JetExpr divergence(const std::vector<JetExpr>& components, bool spacetime) {
  JetExpr r;
  for (std::size_t i = 0; i < components.size(); ++i)
    r += total_derivative(components[i], spacetime ? static_cast<int>(i) : static_cast<int>(i) + 1);
  return r;
}

namespace {

struct ResolvedBounds {
  int degree;
  int order;
  std::array<int, kSlots> indep_power;
};

ResolvedBounds resolve(const AnsatzBounds& b, const std::vector<JetExpr>& targets) {
  ResolvedBounds r{0, 0, {}};
  int deg = 0, ord = 0;
  for (const auto& t : targets) {
    deg = std::max(deg, t.jet_degree());
    ord = std::max(ord, t.max_jet_order());
    for (int a = 0; a < kSlots; ++a) r.indep_power[a] = std::max(r.indep_power[a], t.max_power_of_indep(a));
  }
  r.degree = b.degree >= 0 ? b.degree : deg;
  r.order = b.order >= 0 ? b.order : std::max(ord - 1, 0);
  for (int a = 0; a < kSlots; ++a) r.indep_power[a] += b.extra_indep_power;
  return r;
}

bool within(const Monomial& m, const ResolvedBounds& b) {
  if (m.jet_degree() > b.degree) return false;
  if (m.max_jet_order() > b.order) return false;
  for (const auto& f : m.factors)
    if (f.sym.kind == SymbolKind::Indep && f.power > b.indep_power[f.sym.id]) return false;
  return true;
}

// Monomials c with m among the terms of D_axis c.
std::vector<Monomial> antiderivative_candidates(const Monomial& m, int axis) {
  std::vector<Monomial> out;
  for (const auto& f : m.factors) {
    if ((f.sym.kind == SymbolKind::Jet || f.sym.kind == SymbolKind::ArbFun) && f.sym.deriv[axis] > 0) {
      Symbol lower = f.sym;
      lower.deriv = bumped(lower.deriv, axis, -1);
      out.push_back(m.without(f.sym, 1).times(lower, 1));
    }
  }
  out.push_back(m.times(Symbol::indep(axis), 1));
  return out;
}

}  // namespace

std::optional<std::vector<JetExpr>> solve_first_order(const FirstOrderSystem& system, std::size_t unknowns,
                                                      const std::vector<JetExpr>& targets, const AnsatzBounds& bounds,
                                                      const std::function<JetExpr(const JetExpr&)>& post) {
  ResolvedBounds rb = resolve(bounds, targets);
  const std::size_t neq = system.size();

  auto image_of = [&](std::size_t j, const Monomial& m) {
    std::vector<JetExpr> img(neq);
    JetExpr base = JetExpr::term(1, m);
    for (std::size_t eq = 0; eq < neq; ++eq) {
      for (const auto& ent : system[eq]) {
        if (ent.unknown != j) continue;
        JetExpr d = total_derivative(base, ent.axis);
        if (ent.sign < 0) {
          img[eq] -= d;
        } else {
          img[eq] += d;
        }
      }
      if (post) img[eq] = post(img[eq]);
    }
    return img;
  };

  std::vector<std::set<Monomial>> cand(unknowns);
  std::map<std::pair<std::size_t, Monomial>, std::vector<JetExpr>> images;
  std::set<std::pair<std::size_t, Monomial>> seen;
  std::deque<std::pair<std::size_t, Monomial>> queue;
  auto push = [&](std::size_t eq, const Monomial& m) {
    if (seen.emplace(eq, m).second) queue.emplace_back(eq, m);
  };
  for (std::size_t eq = 0; eq < targets.size(); ++eq)
    for (const auto& [m, c] : targets[eq].terms()) push(eq, m);

  constexpr std::size_t kMaxCandidates = 20000;
  std::size_t total = 0;
  while (!queue.empty()) {
    auto [eq, m] = queue.front();
    queue.pop_front();
    for (const auto& ent : system[eq]) {
      for (Monomial& c : antiderivative_candidates(m, ent.axis)) {
        if (!within(c, rb)) continue;
        if (!cand[ent.unknown].insert(c).second) continue;
        if (++total > kMaxCandidates) throw AnsatzExhausted("ansatz grew beyond the candidate limit");
        auto img = image_of(ent.unknown, c);
        for (std::size_t e2 = 0; e2 < neq; ++e2)
          for (const auto& [m2, v] : img[e2].terms()) push(e2, m2);
        images.emplace(std::make_pair(ent.unknown, c), std::move(img));
      }
    }
  }

  std::vector<std::vector<Monomial>> columns(unknowns);
  for (std::size_t j = 0; j < unknowns; ++j) columns[j].assign(cand[j].begin(), cand[j].end());
  auto res = solve_ansatz(
      columns, [&](std::size_t j, const Monomial& m) { return images.at({j, m}); }, targets);
  if (!res) return std::nullopt;
  return res->unknowns;
}

namespace {
JetExpr apply_system(const FirstOrderSystem& sys, std::size_t eq, const std::vector<JetExpr>& x) {
  JetExpr r;
  for (const auto& ent : sys[eq]) {
    JetExpr d = total_derivative(x[ent.unknown], ent.axis);
    if (ent.sign < 0) {
      r -= d;
    } else {
      r += d;
    }
  }
  return r;
}
}  // namespace

DivergenceWitness invert_divergence(const JetExpr& e, int dim, AnsatzBounds bounds, bool spacetime) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
  std::size_t n = static_cast<std::size_t>(dim) + (spacetime ? 1 : 0);
  FirstOrderSystem sys(1);
  for (std::size_t i = 0; i < n; ++i)
    sys[0].push_back({i, spacetime ? static_cast<int>(i) : static_cast<int>(i) + 1, 1});
  DivergenceWitness w;
  w.role = spacetime ? DivergenceWitness::Role::Spacetime : DivergenceWitness::Role::Spatial;
  if (e.is_zero()) {
    w.components.assign(n, JetExpr());
    return w;
  }
  auto sol = solve_first_order(sys, n, {e}, bounds);
  if (!sol)
    throw AnsatzExhausted("no divergence witness within the ansatz bounds for " + to_string(e));
  w.components = std::move(*sol);
  w.residual = apply_system(sys, 0, w.components) - e;
  if (!w.residual.is_zero()) throw std::logic_error("divergence witness failed its own check");
  return w;
}

DivergenceWitness invert_divergence(const JetExpr& e, int dim, int degree_bound, int order_bound) {
  AnsatzBounds b;
  b.degree = degree_bound;
  b.order = order_bound;
  return invert_divergence(e, dim, b);
}

namespace {
FirstOrderSystem curl_system(std::size_t dim) {
  if (dim == 2) return {{{0, 2, 1}}, {{0, 1, -1}}};
  if (dim == 3)
    return {{{2, 2, 1}, {1, 3, -1}},   // D_y A_z - D_z A_y
            {{0, 3, 1}, {2, 1, -1}},   // D_z A_x - D_x A_z
            {{1, 1, 1}, {0, 2, -1}}};  // D_x A_y - D_y A_x
  throw std::invalid_argument("curls exist in dimension 2 and 3 only");
}
}  // namespace

std::vector<JetExpr> curl(const std::vector<JetExpr>& potentials) {
  std::size_t dim = potentials.size() == 1 ? 2 : potentials.size();
  FirstOrderSystem sys = curl_system(dim);
  std::vector<JetExpr> out;
  for (std::size_t eq = 0; eq < sys.size(); ++eq) out.push_back(apply_system(sys, eq, potentials));
  return out;
}

std::optional<std::vector<JetExpr>> invert_curl(const std::vector<JetExpr>& gamma, AnsatzBounds bounds,
                                                const std::function<JetExpr(const JetExpr&)>& post) {
  FirstOrderSystem sys = curl_system(gamma.size());
  std::size_t unknowns = gamma.size() == 2 ? 1 : 3;
  bool all_zero = std::all_of(gamma.begin(), gamma.end(), [](const JetExpr& g) { return g.is_zero(); });
  if (all_zero) return std::vector<JetExpr>(unknowns);
  auto sol = solve_first_order(sys, unknowns, gamma, bounds, post);
  if (!sol) return std::nullopt;
  auto c = curl(*sol);
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    JetExpr diff = c[i] - gamma[i];
    if (post) diff = post(diff);
    if (!diff.is_zero()) throw std::logic_error("curl witness failed its own check");
  }
  return sol;
}

}  // namespace topo
