#include "topo/potential_systems.hpp"

namespace topo {

namespace {

JetExpr field(const char* name, const char* letters = nullptr) {
  std::uint8_t id = SymbolRegistry::instance().field(name);
  MultiIndex d = letters ? multi_index_from_letters(letters) : MultiIndex{};
  return JetExpr::symbol(Symbol::jet(id, d));
}

bool involves_fields(const JetExpr& e) {
  return e.contains([](const Symbol& s) { return s.kind == SymbolKind::Jet; });
}

}  // namespace

Vec potential_fields(int dim) {
  if (dim == 2) return {field("w")};
  if (dim == 3) return {field("wx"), field("wy"), field("wz")};
  throw UnsupportedDimension("potential systems exist in dimension 2 and 3 only; dimension " + std::to_string(dim) +
                             " has no curl");
}

PotentialSystem build_potential_system(const Vec& gamma) {
  int dim = static_cast<int>(gamma.size());
  PotentialSystem ps;
  ps.dim = dim;
  Vec pot = potential_fields(dim);
  for (const auto& p : pot) ps.potentials.push_back(p.terms().begin()->first.factors[0].sym.id);
  Vec c = curl(pot);
  for (int a = 0; a < dim; ++a) ps.equations.push_back({gamma[a], c[a]});
  ps.gauge.dim = dim;
  ps.gauge.description = dim == 2 ? "w -> w + chi(t), chi an arbitrary function of t"
                                  : "w -> w + grad chi(t,x,y,z), chi an arbitrary function of all variables";
  return ps;
}

PotentialSystem build_potential_system(const FluxVector& gamma) { return build_potential_system(gamma.Gamma); }

bool check_gauge_invariance(const PotentialSystem& ps, const Vec& shift) {
  std::size_t expected = ps.dim == 2 ? 1 : 3;
  if (shift.size() != expected)
    throw SignatureMismatch("gauge shift needs " + std::to_string(expected) + " component(s), got " +
                            std::to_string(shift.size()));
  for (const auto& s : shift)
    if (involves_fields(s)) throw SignatureMismatch("gauge shift may not involve u or the potentials: " + to_string(s));
  auto rule = [&](const Symbol& s) -> std::optional<JetExpr> {
    if (s.kind != SymbolKind::Jet) return std::nullopt;
    for (std::size_t i = 0; i < ps.potentials.size(); ++i)
      if (s.id == ps.potentials[i]) return JetExpr::symbol(s) + total_derivative(shift[i], s.deriv);
    return std::nullopt;
  };
  for (std::size_t i = 0; i < ps.equations.size(); ++i) {
    JetExpr r = equation_residual(ps, i);
    if (!(substitute(r, rule) == r)) return false;
  }
  return true;
}

JetExpr div_of_curl_side(const PotentialSystem& ps) {
  Vec rhs;
  for (const auto& e : ps.equations) rhs.push_back(e.rhs);
  return divergence(rhs);
}

JetExpr cross_eliminate(const PotentialSystem& ps) {
  Vec r;
  for (std::size_t i = 0; i < ps.equations.size(); ++i) r.push_back(equation_residual(ps, i));
  return divergence(r);
}

JetExpr equation_residual(const PotentialSystem& ps, std::size_t i) {
  return ps.equations.at(i).lhs - ps.equations.at(i).rhs;
}

std::string to_string(const PotentialSystem& ps) {
  std::string s;
  for (const auto& e : ps.equations) s += to_string(e.lhs) + " = " + to_string(e.rhs) + "\n";
  s += "gauge: " + ps.gauge.description + "\n";
  return s;
}

}  // namespace topo
