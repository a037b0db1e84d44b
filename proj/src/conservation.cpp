#include "topo/conservation.hpp"

#include <set>

namespace topo {

namespace {

JetExpr neg_dt_power(const JetExpr& e, int j) {
  JetExpr r = e;
  for (int k = 0; k < j; ++k) r = -total_derivative(r, kTime);
  return r;
}

Vec zeros(int dim) { return Vec(static_cast<std::size_t>(dim)); }

Vec& add_to(Vec& a, const Vec& b, const Rational& s = 1) {
  if (a.size() < b.size()) a.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += s * b[i];
  return a;
}

Vec map_vec(const Vec& v, const std::function<JetExpr(const JetExpr&)>& fn) {
  Vec out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(fn(e));
  return out;
}

bool all_zero(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](const JetExpr& e) { return e.is_zero(); });
}

bool is_time_function(const Symbol& s) {
  return s.kind == SymbolKind::ArbFun && SymbolRegistry::instance().function_signature(s.id) == kSigTime;
}

std::uint8_t default_fun() { return SymbolRegistry::instance().function("f", kSigTime); }

}  // namespace

std::string to_string(const Vec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += to_string(v[i]);
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// PdeSpec

JetExpr DivForm::residual() const {
  JetExpr r;
  for (const auto& l : lead) r += JetExpr(l.coeff) * JetExpr::symbol(u_jet(bumped(l.spatial, kTime)));
  for (const auto& t : rhs) r -= total_derivative(t.F, t.spatial);
  return r;
}

Vec DivForm::first_order_flux(int dim) const {
  if (lead.size() != 1 || order(lead[0].spatial) != 1) return {};
  Vec g = zeros(dim);
  for (const auto& t : rhs) {
    if (order(t.spatial) != 1) return {};
    for (int a = 1; a <= dim; ++a)
      if (t.spatial[a]) g[a - 1] -= t.F;
  }
  for (int a = 1; a <= dim; ++a)
    if (lead[0].spatial[a]) g[a - 1] += JetExpr(lead[0].coeff) * JetExpr::symbol(u_jet("t"));
  return g;
}

void PdeSpec::finalize() {
  if (lambda == 0) throw std::invalid_argument(name + ": solved-form factor must be nonzero");
  JetExpr lhs = JetExpr::symbol(leading);
  if (!relations.is_zero(G - lambda * (lhs - rhs)))
    throw std::invalid_argument(name + ": G does not match its solved form; difference " +
                                to_string(relations.reduce(G - lambda * (lhs - rhs))));
  if (div_form && !relations.is_zero(G - div_form->sign * div_form->residual()))
    throw std::invalid_argument(name + ": G does not match its divergence form; difference " +
                                to_string(relations.reduce(G - div_form->sign * div_form->residual())));
  solver = std::make_shared<Substituter>(leading, rhs);
}

JetExpr PdeSpec::on_solutions(const JetExpr& e) const { return relations.reduce(solver->apply(e)); }

JetExpr PdeSpec::on_solutions(const JetExpr& e, std::map<MultiIndex, JetExpr>& g_coefficients) const {
  SubstitutionLedger ledger;
  JetExpr r = solver->apply(e, ledger);
  for (const auto& [k, c] : ledger.coefficients) g_coefficients[k] += c * (1 / lambda);
  for (auto it = g_coefficients.begin(); it != g_coefficients.end();) {
    if (it->second.is_zero()) {
      it = g_coefficients.erase(it);
    } else {
      ++it;
    }
  }
  return relations.reduce(r);
}

// ---------------------------------------------------------------------------
// Multipliers and currents

JetExpr multiplier_residual(const PdeSpec& pde, const JetExpr& Q) { return pde.reduce(euler_u(Q * pde.G)); }

Multiplier verify_multiplier(const PdeSpec& pde, const JetExpr& Q) {
  JetExpr res = multiplier_residual(pde, Q);
  if (!res.is_zero()) {
    // Report the surviving coefficient of the lowest time-function derivative.
    throw NotAMultiplier(pde.name + ": E_u(Q G) = " + to_string(res) + " for Q = " + to_string(Q), res);
  }
  return Multiplier{Q};
}

CurrentVerdict verify_current(const PdeSpec& pde, const JetExpr& T, const Vec& Phi) {
  if (static_cast<int>(Phi.size()) != pde.dim)
    throw std::invalid_argument(pde.name + ": flux has " + std::to_string(Phi.size()) + " components, expected " +
                                std::to_string(pde.dim));
  JetExpr e = total_derivative(T, kTime) + divergence(Phi);
  CurrentVerdict v;
  v.residual = pde.on_solutions(e);
  v.ok = v.residual.is_zero();
  return v;
}

namespace {

// Splits e = sum_i fun^{(i)} c_i. Returns nullopt for i never present.
std::map<int, JetExpr> split_expr(const JetExpr& e, std::optional<std::uint8_t>& fun) {
  std::map<int, JetExpr> out;
  for (const auto& [m, c] : e.terms()) {
    const Factor* hit = nullptr;
    int count = 0;
    for (const auto& f : m.factors) {
      if (!is_time_function(f.sym)) continue;
      if (fun && f.sym.id != *fun)
        throw MixedArbFuns("current involves two arbitrary functions of time: " +
                           SymbolRegistry::instance().function_name(*fun) + " and " +
                           SymbolRegistry::instance().function_name(f.sym.id));
      fun = f.sym.id;
      hit = &f;
      count += f.power;
    }
    if (count != 1) {
      if (count == 0) {
        out[-1].add_term(c, m);
        continue;
      }
      throw NonlinearInArbFun("term " + to_string(JetExpr::term(c, m)) + " is nonlinear in the arbitrary function");
    }
    out[hit->sym.deriv[kTime]].add_term(c, m.without(hit->sym, 1));
  }
  return out;
}

}  // namespace

CurrentFamily split_by_arbitrary_function(const PdeSpec& pde, const JetExpr& T, const Vec& Phi, int min_N) {
  std::optional<std::uint8_t> fun;
  auto ts = split_expr(T, fun);
  std::vector<std::map<int, JetExpr>> ps;
  for (const auto& p : Phi) ps.push_back(split_expr(p, fun));

  CurrentFamily cur;
  cur.fun = fun;
  if (!fun) {
    cur.N = std::max(min_N, 0);
    cur.T.assign(cur.N + 1, JetExpr());
    cur.T[0] = T;
    cur.Phi.assign(cur.N + 2, zeros(pde.dim));
    cur.Phi[0] = Phi;
  } else {
    auto free_part = [](const std::map<int, JetExpr>& m) { return m.count(-1) && !m.at(-1).is_zero(); };
    bool affine = free_part(ts);
    for (const auto& p : ps) affine = affine || free_part(p);
    if (affine) throw NonlinearInArbFun("current has terms free of the arbitrary function (affine, not linear)");
    int maxT = ts.empty() ? -1 : ts.rbegin()->first;
    int maxP = -1;
    for (const auto& p : ps)
      if (!p.empty()) maxP = std::max(maxP, p.rbegin()->first);
    cur.N = std::max({maxT, maxP - 1, min_N, 0});
    cur.T.assign(cur.N + 1, JetExpr());
    cur.Phi.assign(cur.N + 2, zeros(pde.dim));
    for (const auto& [i, c] : ts) cur.T[i] = c;
    for (std::size_t a = 0; a < ps.size(); ++a)
      for (const auto& [i, c] : ps[a]) cur.Phi[i][a] = c;
  }
  auto res = split_residuals(pde, cur);
  for (std::size_t k = 0; k < res.size(); ++k)
    if (!res[k].is_zero())
      throw NotConserved(pde.name + ": split relation for derivative order " + std::to_string(k) +
                             " fails with residual " + to_string(res[k]),
                         res[k]);
  return cur;
}

std::vector<JetExpr> split_residuals(const PdeSpec& pde, const CurrentFamily& cur) {
  std::vector<JetExpr> out;
  for (int k = 0; k <= cur.N + 1; ++k) {
    JetExpr e = divergence(cur.Phi[k]);
    if (k <= cur.N) e += total_derivative(cur.T[k], kTime);
    if (k >= 1) e += cur.T[k - 1];
    out.push_back(pde.on_solutions(e));
  }
  return out;
}

JetExpr assemble(const std::vector<JetExpr>& coeffs, std::uint8_t fun) {
  JetExpr r;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    MultiIndex d{};
    d[kTime] = static_cast<std::uint8_t>(i);
    r += coeffs[i] * JetExpr::symbol(Symbol::fun(fun, d));
  }
  return r;
}

Vec assemble(const std::vector<Vec>& coeffs, std::uint8_t fun, int dim) {
  Vec r = zeros(dim);
  for (int a = 0; a < dim; ++a) {
    std::vector<JetExpr> c;
    for (const auto& v : coeffs) c.push_back(v[a]);
    r[a] = assemble(c, fun);
  }
  return r;
}

std::vector<Vec> trivializing_potentials(const CurrentFamily& cur) {
  std::vector<Vec> psi;
  std::size_t dim = cur.Phi.empty() ? 0 : cur.Phi[0].size();
  for (int i = 0; i <= cur.N; ++i) {
    Vec p(dim);
    for (int j = 0; j <= cur.N - i; ++j) add_to(p, map_vec(cur.Phi[i + j + 1], [&](const JetExpr& e) {
                                                return neg_dt_power(e, j);
                                              }),
                                                -1);
    psi.push_back(std::move(p));
  }
  return psi;
}

// ---------------------------------------------------------------------------
// Spatial flux and certificates

std::string Nontriviality::describe() const {
  switch (kind) {
    case Kind::UtCertificate: return "non-trivial (u_t certificate)";
    case Kind::SourceSink1D: return "non-trivial (nonzero one-dimensional flux)";
    case Kind::UpToOrder: return "non-trivial up to order " + std::to_string(order);
    case Kind::Trivial: return "trivial";
  }
  return "";
}

namespace {

bool ut_certificate(const Vec& reduced) {
  const Symbol ut = u_jet("t");
  bool seen = false;
  for (const auto& g : reduced) {
    for (const auto& [m, c] : g.terms()) {
      for (const auto& f : m.factors) {
        if (f.sym.kind != SymbolKind::Jet || f.sym.deriv[kTime] == 0) continue;
        if (f.sym != ut) return false;
        // u_t must appear linearly with a constant coefficient.
        if (f.power != 1 || static_cast<long>(m.factors.size()) != 1 + std::count_if(m.factors.begin(), m.factors.end(),
                                                                  [](const Factor& x) {
                                                                    return x.sym.kind == SymbolKind::Param;
                                                                  }))
          return false;
        seen = true;
      }
    }
  }
  return seen;
}

}  // namespace

Nontriviality certify_nontrivial(const PdeSpec& pde, const Vec& Gamma, int order_bound) {
  Vec red = map_vec(Gamma, [&](const JetExpr& e) { return pde.on_solutions(e); });
  Nontriviality n;
  if (all_zero(red)) {
    n.kind = Nontriviality::Kind::Trivial;
    return n;
  }
  if (pde.dim == 1) {
    n.kind = Nontriviality::Kind::SourceSink1D;
    return n;
  }
  if (ut_certificate(red)) {
    n.kind = Nontriviality::Kind::UtCertificate;
    return n;
  }
  int ord = 0;
  for (const auto& g : red) ord = std::max(ord, g.max_jet_order());
  AnsatzBounds b;
  b.order = order_bound >= 0 ? order_bound : ord;
  n.order = b.order;
  try {
    auto w = invert_curl(red, b, [&](const JetExpr& e) { return pde.on_solutions(e); });
    n.kind = w ? Nontriviality::Kind::Trivial : Nontriviality::Kind::UpToOrder;
  } catch (const AnsatzExhausted&) {
    n.kind = Nontriviality::Kind::UpToOrder;
  }
  return n;
}

FluxVector reduce_to_spatial_flux(const PdeSpec& pde, const CurrentFamily& cur, int certificate_order) {
  FluxVector fv;
  fv.Gamma = zeros(pde.dim);
  for (int j = 0; j <= cur.N + 1; ++j)
    add_to(fv.Gamma, map_vec(cur.Phi[j], [&](const JetExpr& e) { return neg_dt_power(e, j); }));
  JetExpr d = pde.on_solutions(divergence(fv.Gamma));
  if (!d.is_zero()) throw NotConserved(pde.name + ": Div Gamma does not vanish on solutions: " + to_string(d), d);
  fv.certificate = certify_nontrivial(pde, fv.Gamma, certificate_order);
  return fv;
}

bool TheoremChecks::all_zero() const {
  for (const auto& e : dens_triv)
    if (!e.is_zero()) return false;
  for (const auto& v : telescoping)
    if (!topo::all_zero(v)) return false;
  return topo::all_zero(flux_triv) && div_gamma.is_zero();
}

TheoremChecks theorem_checks(const PdeSpec& pde, const CurrentFamily& cur) {
  TheoremChecks c;
  auto psi = trivializing_potentials(cur);
  for (int i = 0; i <= cur.N; ++i) c.dens_triv.push_back(pde.on_solutions(cur.T[i] - divergence(psi[i])));
  for (int i = 1; i <= cur.N; ++i) {
    Vec t = map_vec(psi[i], [](const JetExpr& e) { return total_derivative(e, kTime); });
    add_to(t, psi[i - 1]);
    add_to(t, cur.Phi[i]);
    c.telescoping.push_back(map_vec(t, [&](const JetExpr& e) { return pde.reduce(e); }));
  }
  Vec gamma = zeros(pde.dim);
  for (int j = 0; j <= cur.N + 1; ++j)
    add_to(gamma, map_vec(cur.Phi[j], [&](const JetExpr& e) { return neg_dt_power(e, j); }));
  std::uint8_t fun = cur.fun ? *cur.fun : default_fun();
  Vec Phi = assemble(cur.Phi, fun, pde.dim);
  Vec Psi = assemble(psi, fun, pde.dim);
  JetExpr f = JetExpr::symbol(Symbol::fun(fun));
  c.flux_triv.resize(pde.dim);
  for (int a = 0; a < pde.dim; ++a)
    c.flux_triv[a] = pde.on_solutions(Phi[a] + total_derivative(Psi[a], kTime) - f * gamma[a]);
  c.div_gamma = pde.on_solutions(divergence(gamma));
  return c;
}

// ---------------------------------------------------------------------------
// Divergence identities

JetExpr DivergenceIdentity::R_expr(const PdeSpec& pde) const {
  JetExpr r;
  for (const auto& [k, c] : R) r += c * total_derivative(pde.G, k);
  return r;
}

JetExpr DivergenceIdentity::defect(const PdeSpec& pde) const {
  return pde.reduce(T - divergence(Psi) - R_expr(pde));
}

DivergenceIdentity divergence_identity(const PdeSpec& pde, const CurrentFamily& cur, int i) {
  if (i < 0 || i > cur.N) throw std::out_of_range("identity index outside 0..N");
  auto psi = trivializing_potentials(cur);
  DivergenceIdentity id;
  id.T = cur.T[i];
  id.Psi = psi[i];
  JetExpr rest = pde.on_solutions(id.T - divergence(id.Psi), id.R);
  if (!rest.is_zero())
    throw NotConserved(pde.name + ": density is not a divergence on solutions: " + to_string(rest), rest);
  for (auto it = id.R.begin(); it != id.R.end();) {
    it->second = pde.reduce(it->second);
    it = it->second.is_zero() ? id.R.erase(it) : std::next(it);
  }
  JetExpr d = id.defect(pde);
  if (!d.is_zero()) throw std::logic_error("divergence identity failed its own check: " + to_string(d));
  return id;
}

std::optional<Vec> equal_modulo_curl(const PdeSpec& pde, const Vec& a, const Vec& b, int order_bound) {
  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = pde.on_solutions(a[i] - b[i]);
  if (all_zero(d)) return Vec{};
  if (pde.dim == 1) return std::nullopt;
  AnsatzBounds bounds;
  if (order_bound >= 0) bounds.order = order_bound;
  else {
    int ord = 0;
    for (const auto& e : d) ord = std::max(ord, e.max_jet_order());
    bounds.order = ord;
  }
  try {
    return invert_curl(d, bounds, [&](const JetExpr& e) { return pde.on_solutions(e); });
  } catch (const AnsatzExhausted&) {
    return std::nullopt;
  }
}

}  // namespace topo
