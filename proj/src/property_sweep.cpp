#include "topo/property_sweep.hpp"

#include "topo/variational.hpp"

namespace topo {

namespace {

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

MultiIndex random_index(std::mt19937_64& rng, int dim, int max_order) {
  MultiIndex m{};
  int o = static_cast<int>(draw(rng, max_order + 1));
  for (int k = 0; k < o; ++k) m[draw(rng, dim + 1)]++;
  return m;
}

bool has_jet(const JetExpr& e) {
  return e.contains([](const Symbol& s) { return s.kind == SymbolKind::Jet; });
}

}  // namespace

JetExpr random_polynomial(std::mt19937_64& rng, int dim, int max_order, int max_degree, int max_terms) {
  JetExpr e;
  int terms = 1 + static_cast<int>(draw(rng, max_terms));
  for (int i = 0; i < terms; ++i) {
    int c = static_cast<int>(draw(rng, 6));
    c = c < 3 ? c - 3 : c - 2;
    JetExpr m(c);
    int degree = 1 + static_cast<int>(draw(rng, max_degree));
    for (int k = 0; k < degree; ++k) m *= JetExpr::symbol(u_jet(random_index(rng, dim, max_order)));
    if (draw(rng, 4) == 0) m *= JetExpr::symbol(Symbol::indep(1 + static_cast<int>(draw(rng, dim))));
    e += m;
  }
  if (e.is_zero()) e = JetExpr::symbol(u_jet());
  return e;
}

SweepReport property_sweep(const SweepOptions& opts) {
  SweepReport rep;
  std::mt19937_64 rng(opts.seed);
  auto record = [&](const std::string& prop, bool ok, const JetExpr& e, const std::string& detail) {
    rep.checked[prop]++;
    if (ok)
      rep.passed[prop]++;
    else
      rep.failures.push_back({prop, to_string(e), detail});
  };
  for (int n = 0; n < opts.count; ++n) {
    int dim = 1 + static_cast<int>(draw(rng, opts.max_dim));
    JetExpr e = random_polynomial(rng, dim, opts.max_order, opts.max_degree, opts.max_terms);
    rep.expressions++;

    bool commute = true;
    std::string where;
    for (int a = 0; a <= dim && commute; ++a)
      for (int b = a + 1; b <= dim && commute; ++b) {
        JetExpr d = total_derivative(total_derivative(e, a), b) - total_derivative(total_derivative(e, b), a);
        if (!d.is_zero()) {
          commute = false;
          where = std::string("D_") + axis_letter(a) + " D_" + axis_letter(b) + " differs by " + to_string(d);
        }
      }
    record("D-commutativity", commute, e, where);

    // Vector fields with e as one component and random partners of one
    // order less so that the divergence stays within the order bound.
    std::vector<JetExpr> phi;
    int lower = std::max(0, opts.max_order - 1);
    for (int a = 0; a < dim; ++a)
      phi.push_back(a == static_cast<int>(draw(rng, dim)) && e.max_jet_order() <= lower
                        ? e
                        : random_polynomial(rng, dim, lower, opts.max_degree, opts.max_terms));
    JetExpr div = divergence(phi);
    JetExpr eu = euler_u(div);
    record("euler-of-divergence", eu.is_zero(), div, eu.is_zero() ? "" : "E_u = " + to_string(eu));
    std::vector<JetExpr> st{random_polynomial(rng, dim, lower, opts.max_degree, opts.max_terms)};
    st.insert(st.end(), phi.begin(), phi.end());
    JetExpr sdiv = divergence(st, true);
    JetExpr seu = euler_u(sdiv);
    record("euler-of-divergence", seu.is_zero(), sdiv, seu.is_zero() ? "" : "E_u = " + to_string(seu));

    if (!has_jet(div) || div.is_zero()) continue;
    std::string detail;
    bool ok = false;
    try {
      DivergenceWitness w = invert_divergence(div, dim);
      JetExpr back = divergence(w.components);
      ok = w.residual.is_zero() && back == div;
      if (!ok) detail = "residual " + to_string(w.residual) + ", Div of witness " + to_string(back);
    } catch (const std::exception& ex) {
      detail = ex.what();
    }
    record("divergence-round-trip", ok, div, detail);
  }
  return rep;
}

}  // namespace topo
