// topo: verify, reduce and simulate conservation laws of the catalog PDEs.
//
// Exit codes: 0 verified, 1 residual or failed check, 2 usage or catalog
// error, 3 numerical constraint violation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "topo/initial_data.hpp"
#include "topo/pde_zoo.hpp"
#include "topo/property_sweep.hpp"
#include "topo/simulate.hpp"

using namespace topo;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::string pde;
  std::string object;
  std::vector<std::string> params;
  std::string out;
  int order_bound = -1;
};

std::string joined_params(const std::vector<std::string>& p) {
  std::string s;
  for (const auto& x : p) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::string resolve_name(const std::string& name) {
  auto names = catalog_names();
  for (const auto& n : names)
    if (n == name) return n;
  std::string hit;
  for (const auto& n : names)
    if (n.rfind(name, 0) == 0) {
      if (!hit.empty()) throw UnknownEntry("'" + name + "' is ambiguous: " + hit + ", " + n);
      hit = n;
    }
  if (hit.empty()) throw UnknownEntry("no catalog entry '" + name + "'");
  return hit;
}

CatalogEntry load_entry(const Common& c) {
  if (c.pde.empty()) throw UsageError("--pde is required");
  return instantiate(resolve_name(c.pde), parse_param_bindings(joined_params(c.params)));
}

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

/// Inline text or the contents of @file.
std::string object_text(const std::string& obj) {
  if (!obj.empty() && obj[0] == '@') {
    std::ifstream in(obj.substr(1));
    if (!in) throw UsageError("cannot read " + obj.substr(1));
    std::stringstream ss;
    ss << in.rdbuf();
    return trim(ss.str());
  }
  return trim(obj);
}

/// "(a, b, c)" split at top-level commas; a bare expression is one component.
std::vector<std::string> components(const std::string& s) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') return {s};
  int depth = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (depth == 0) return {s};  // outer parens do not span the text
  }
  std::vector<std::string> out;
  std::string cur;
  depth = 0;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char ch = s[i];
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

Vec parse_vec(const CatalogEntry& e, const std::vector<std::string>& comps) {
  Vec v;
  for (const auto& s : comps) v.push_back(e.parse(s));
  return v;
}

/// (T, Phi) of an ad-hoc current: dim + 1 components, or dim components of
/// a spatial flux with T = 0.
std::pair<JetExpr, Vec> adhoc_current(const CatalogEntry& e, const std::vector<std::string>& comps) {
  Vec v = parse_vec(e, comps);
  if (static_cast<int>(v.size()) == e.dim + 1) return {v[0], Vec(v.begin() + 1, v.end())};
  if (static_cast<int>(v.size()) == e.dim) return {JetExpr(), v};
  throw UsageError("an ad-hoc current needs " + std::to_string(e.dim + 1) + " components (T, Phi) or " +
                   std::to_string(e.dim) + " (Phi)");
}

template <class Items>
auto find_item(const Items& items, const std::string& id) -> decltype(&items.front()) {
  for (const auto& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

void print_repair(std::ostream& os, const std::optional<RepairRecord>& r) {
  if (!r) return;
  os << "printed:";
  for (const auto& p : r->printed) os << " [" << p << "]";
  os << "\ncorrected:";
  for (const auto& p : r->corrected) os << " [" << p << "]";
  os << "\n";
  for (const auto& ed : r->edits)
    os << "repair: " << kind_name(ed.kind) << (ed.component >= 0 ? " in component " + std::to_string(ed.component) : "")
       << ": " << ed.description << "\n";
  if (!r->note.empty()) os << "note: " << r->note << "\n";
}

void print_identity(std::ostream& os, const std::string& label, const DivergenceIdentity& id, const PdeSpec& pde) {
  os << label << " T: " << to_string(id.T) << "\n";
  os << label << " Psi: " << to_string(id.Psi) << "\n";
  os << label << " R(G): " << to_string(id.R_expr(pde)) << "\n";
  for (const auto& [k, c] : id.R) os << label << " R[" << (letters_of(k).empty() ? "1" : "D_" + letters_of(k)) << "]: " << to_string(c) << "\n";
  os << label << " defect: " << to_string(id.defect(pde)) << "\n";
}

int emit(const std::string& text, const std::string& out, int code) {
  std::cout << text;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) {
      std::cerr << "error: cannot write " << out << "\n";
      return 2;
    }
    f << text;
  }
  return code;
}

int cmd_verify(const Common& c) {
  CatalogEntry e = load_entry(c);
  if (c.object.empty()) throw UsageError("--object is required");
  std::ostringstream os;
  os << "entry: " << e.name << "\nobject: " << c.object << "\n";
  bool ok = false;
  if (auto m = find_item(e.multipliers, c.object)) {
    JetExpr res = multiplier_residual(e.pde, m->Q);
    ok = res.is_zero();
    os << "kind: multiplier\nQ: " << to_string(m->Q) << "\n";
    print_repair(os, m->repair);
    os << "residual: " << to_string(res) << "\n";
  } else if (auto cu = find_item(e.currents, c.object)) {
    CurrentVerdict v = verify_current(e.pde, cu->T, cu->Phi);
    ok = v.ok;
    os << "kind: current\nT: " << to_string(cu->T) << "\nPhi: " << to_string(cu->Phi) << "\n";
    print_repair(os, cu->repair);
    os << "residual: " << to_string(v.residual) << "\n";
  } else if (auto id = find_item(e.identities, c.object)) {
    DivergenceIdentity di{id->scale * id->T, id->Psi, id->R};
    JetExpr d = di.defect(e.pde);
    ok = d.is_zero();
    os << "kind: identity\n";
    print_identity(os, "identity", di, e.pde);
    print_repair(os, id->repair);
    os << "residual: " << to_string(d) << "\n";
  } else if (auto ch = find_item(e.charges, c.object)) {
    for (const auto& s : e.statuses)
      if (s.kind == "charge" && s.id == ch->id) {
        ok = s.ok;
        os << "kind: charge\ndetail: " << s.detail << "\n";
      }
    os << "Gamma: " << to_string(ch->Gamma) << "\n";
    print_repair(os, ch->repair);
  } else {
    auto comps = components(object_text(c.object));
    if (comps.size() == 1) {
      JetExpr Q = e.parse(comps[0]);
      JetExpr res = multiplier_residual(e.pde, Q);
      ok = res.is_zero();
      os << "kind: ad-hoc multiplier\nQ: " << to_string(Q) << "\nresidual: " << to_string(res) << "\n";
    } else {
      auto [T, Phi] = adhoc_current(e, comps);
      CurrentVerdict v = verify_current(e.pde, T, Phi);
      ok = v.ok;
      os << "kind: ad-hoc current\nT: " << to_string(T) << "\nPhi: " << to_string(Phi)
         << "\nresidual: " << to_string(v.residual) << "\n";
    }
  }
  os << "verdict: " << (ok ? "verified" : "residual nonzero") << "\n";
  return emit(os.str(), c.out, ok ? 0 : 1);
}

int cmd_reduce(const Common& c) {
  CatalogEntry e = load_entry(c);
  if (c.object.empty()) throw UsageError("--object is required");
  std::ostringstream os;
  os << "entry: " << e.name << "\nobject: " << c.object << "\n";
  CurrentFamily fam;
  std::optional<FluxVector> flux;
  std::vector<DivergenceIdentity> ids;
  const CurrentItem* item = find_item(e.currents, c.object);
  if (item) {
    fam = item->family;
    if (c.order_bound < 0) {
      flux = item->flux;
      ids = item->identities;
    }
  } else {
    auto [T, Phi] = adhoc_current(e, components(object_text(c.object)));
    try {
      fam = split_by_arbitrary_function(e.pde, T, Phi);
    } catch (const NotConserved& ex) {
      os << "residual: " << to_string(ex.residual) << "\nverdict: not conserved\n";
      return emit(os.str(), c.out, 1);
    }
  }
  if (!flux) {
    flux = reduce_to_spatial_flux(e.pde, fam, c.order_bound);
    for (int i = 0; i <= fam.N; ++i) ids.push_back(divergence_identity(e.pde, fam, i));
  }
  os << "N: " << fam.N << "\nGamma: " << to_string(flux->Gamma) << "\ncertificate: " << flux->certificate.describe()
     << "\n";
  for (std::size_t i = 0; i < ids.size(); ++i) print_identity(os, "identity " + std::to_string(i), ids[i], e.pde);
  if (item)
    for (const auto& pi : e.identities)
      if (pi.current == item->id)
        os << "catalog identity: " << pi.id << " (index " << pi.index << ", "
           << (pi.matches_computed ? "reproduced" : "not reproduced") << ", factor " << to_string(pi.kappa) << ")\n";
  return emit(os.str(), c.out, 0);
}

int cmd_potential(const Common& c) {
  CatalogEntry e = load_entry(c);
  if (c.object.empty()) throw UsageError("--object is required");
  std::ostringstream os;
  os << "entry: " << e.name << "\nobject: " << c.object << "\n";
  std::string current;
  Vec gamma;
  if (auto ch = find_item(e.charges, c.object)) {
    current = ch->current;
    gamma = ch->Gamma;
  } else if (auto cu = find_item(e.currents, c.object)) {
    current = cu->id;
    gamma = cu->flux.Gamma;
  } else {
    gamma = parse_vec(e, components(object_text(c.object)));
  }
  const PotentialSystemItem* ps = nullptr;
  for (const auto& p : e.potential_systems)
    if (!current.empty() && p.current == current) ps = &p;
  if (ps) {
    os << "system: " << ps->id << "\n";
    for (const auto& [l, r] : ps->printed) os << "printed: " << l << " = " << r << "\n";
    os << to_string(ps->built);
    os << "cross elimination zero: " << (ps->cross_elimination_zero ? "yes" : "no") << "\n";
    os << "gauge invariant: " << (ps->gauge_invariant ? "yes" : "no") << "\n";
  } else {
    PotentialSystem built = build_potential_system(gamma);
    os << to_string(built);
    JetExpr x = e.pde.on_solutions(cross_eliminate(built));
    os << "cross elimination zero: " << (x.is_zero() ? "yes" : "no") << "\n";
  }
  return emit(os.str(), c.out, 0);
}

int cmd_simulate(const std::string& manifest, const std::string& out, std::optional<std::uint64_t> seed) {
  if (manifest.empty()) throw UsageError("--manifest is required");
  RunManifest m = load_manifest(manifest);
  if (seed) m.seed = *seed;
  if (!out.empty()) m.out = out;
  SimulationResult r = run_simulation(m);
  std::string text = render_report(r);
  if (m.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(m.out);
    if (!f) throw UsageError("cannot write " + m.out);
    f << text;
    std::cout << "report: " << m.out << "\nverdict: " << r.report.value("verdict", "") << "\n";
  }
  return r.exit_code;
}

int cmd_catalog_list(const std::string& out) {
  std::ostringstream os;
  for (const auto& n : catalog_names()) {
    CatalogEntry e = instantiate(n);
    os << n << "  dim " << e.dim << "  " << e.title << "\n";
  }
  return emit(os.str(), out, 0);
}

int cmd_catalog_show(const Common& c) {
  CatalogEntry e = load_entry(c);
  std::ostringstream os;
  os << "entry: " << e.name << "\ntitle: " << e.title << "\ndim: " << e.dim << "\nG: " << to_string(e.pde.G) << "\n";
  if (!e.alternatives.empty()) os << "alternatives: " << e.alternatives << "\n";
  for (const auto& p : e.params) os << "param: " << p << "\n";
  for (const auto& k : e.constraints) os << "constraint: " << k.text() << "\n";
  for (const auto& [k, v] : e.defaults) os << "default: " << k << " = " << v << "\n";
  for (const auto& a : e.active_cases) os << "case: " << a << "\n";
  bool all = true;
  for (const auto& s : e.statuses) {
    os << s.kind << " " << s.id << ": " << (s.ok ? "ok" : "FAILED") << (s.detail.empty() ? "" : " (" + s.detail + ")")
       << (s.repair ? " [repaired]" : "") << "\n";
    all = all && s.ok;
  }
  return emit(os.str(), c.out, all ? 0 : 1);
}

int cmd_sweep(std::uint64_t seed, int count, const std::string& out) {
  SweepOptions o;
  o.seed = seed;
  o.count = count;
  SweepReport r = property_sweep(o);
  std::ostringstream os;
  os << "seed: " << seed << "\nexpressions: " << r.expressions << "\n";
  for (const auto& [k, v] : r.checked) os << k << ": " << r.passed[k] << "/" << v << "\n";
  for (const auto& f : r.failures) os << "failure: " << f.property << ": " << f.expression << ": " << f.detail << "\n";
  return emit(os.str(), out, r.ok() ? 0 : 1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conservation laws with arbitrary functions of time: verification, spatial-flux reduction, "
               "potential systems and periodic simulations of catalog PDEs"};
  app.require_subcommand(1);

  Common c;
  auto add_common = [&](CLI::App* s, bool object) {
    s->add_option("--pde,pde", c.pde, "Catalog entry (a unique prefix is enough)");
    if (object) s->add_option("--object,object", c.object, "Catalog id, inline expression or @file");
    s->add_option("--params", c.params, "Parameter binding k=v (repeatable)");
    s->add_option("--out", c.out, "Also write the report to this file");
  };
  auto* verify = app.add_subcommand("verify", "Verify a multiplier, current, identity or charge");
  add_common(verify, true);
  auto* reduce = app.add_subcommand("reduce", "Spatial flux and divergence identities of a current");
  add_common(reduce, true);
  reduce->add_option("--order-bound", c.order_bound, "Jet order bound of the non-triviality certificate");
  auto* potential = app.add_subcommand("potential", "Potential system of a charge or current");
  add_common(potential, true);

  std::string manifest, sim_out;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation manifest");
  simulate->add_option("--manifest,manifest", manifest, "Manifest JSON file")->required();
  simulate->add_option("--out", sim_out, "Report file (overrides the manifest)");
  auto* seed_opt = simulate->add_option("--seed", seed, "Seed recorded in the report");

  auto* catalog = app.add_subcommand("catalog", "List or show catalog entries");
  catalog->require_subcommand(1);
  auto* list = catalog->add_subcommand("list", "Names, dimensions and titles");
  std::string list_out;
  list->add_option("--out", list_out, "Also write the listing to this file");
  auto* show = catalog->add_subcommand("show", "Objects of an entry and their verification status");
  add_common(show, false);

  std::uint64_t sweep_seed = SweepOptions{}.seed;
  int sweep_count = SweepOptions{}.count;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Seeded property sweep over random polynomial expressions");
  sweep->add_option("--seed", sweep_seed, "Random seed");
  sweep->add_option("--count", sweep_count, "Number of expressions");
  sweep->add_option("--out", sweep_out, "Also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  try {
    if (*verify) return cmd_verify(c);
    if (*reduce) return cmd_reduce(c);
    if (*potential) return cmd_potential(c);
    if (*simulate)
      return cmd_simulate(manifest, sim_out, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    if (*list) return cmd_catalog_list(list_out);
    if (*show) return cmd_catalog_show(c);
    if (*sweep) return cmd_sweep(sweep_seed, sweep_count, sweep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
