#include "topo/pde_zoo.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace topo {

using nlohmann::json;

std::string Condition::text() const {
  switch (kind) {
    case Kind::Equal: return param + " = " + value;
    case Kind::Square: return param + "^2 = " + value;
    case Kind::NonZero: return param + " != 0";
  }
  return "";
}

namespace {

std::string strip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t a = 0;
  while (a < s.size() && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  return s.substr(a);
}

}  // namespace

Condition parse_condition(const std::string& s) {
  Condition c;
  std::size_t ne = s.find("!=");
  if (ne != std::string::npos) {
    c.kind = Condition::Kind::NonZero;
    c.param = strip(s.substr(0, ne));
    c.value = "0";
    return c;
  }
  std::size_t eq = s.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("condition without '=': " + s);
  std::string lhs = strip(s.substr(0, eq));
  c.value = strip(s.substr(eq + 1));
  if (lhs.size() > 2 && lhs.substr(lhs.size() - 2) == "^2") {
    c.kind = Condition::Kind::Square;
    c.param = strip(lhs.substr(0, lhs.size() - 2));
  } else {
    c.param = lhs;
  }
  if (c.param.empty() || c.value.empty()) throw std::invalid_argument("malformed condition: " + s);
  return c;
}

ParamBindings parse_param_bindings(const std::string& s) {
  ParamBindings out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = strip(item);
    if (item.empty()) continue;
    Condition c = parse_condition(item);
    if (c.kind == Condition::Kind::NonZero) throw std::invalid_argument("parameter binding needs '=': " + item);
    out.push_back({c.param, c.kind == Condition::Kind::Square, c.value});
  }
  return out;
}

std::string default_catalog_directory() {
#ifdef TOPO_CATALOG_DIR
  return TOPO_CATALOG_DIR;
#else
  return "catalog";
#endif
}

namespace {

std::string dir_of(const LoadOptions& o) { return o.directory.empty() ? default_catalog_directory() : o.directory; }

json read_entry(const std::string& name, const LoadOptions& opts) {
  std::filesystem::path p = std::filesystem::path(dir_of(opts)) / (name + ".json");
  std::ifstream in(p);
  if (!in) throw UnknownEntry("no catalog entry named '" + name + "' in " + dir_of(opts));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CatalogCorrupt(name, std::string("unreadable catalog file: ") + e.what());
  }
}

unsigned signature_of(const std::string& letters) {
  unsigned m = 0;
  for (char c : letters) {
    switch (c) {
      case 't': m |= 1u; break;
      case 'x': m |= 2u; break;
      case 'y': m |= 4u; break;
      case 'z': m |= 8u; break;
      default: throw std::invalid_argument("bad function signature '" + letters + "'");
    }
  }
  return m;
}

MultiIndex index_of(const std::string& letters) {
  return letters.empty() ? MultiIndex{} : multi_index_from_letters(letters);
}

std::string get_string(const json& j, const char* key, const std::string& fallback = "") {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<std::string>();
}

std::optional<JetExpr> divide_exact(const JetExpr& e, const JetExpr& divisor) {
  if (divisor.size() != 1) return std::nullopt;
  const auto& [dm, dc] = *divisor.terms().begin();
  JetExpr out;
  for (const auto& [m, c] : e.terms()) {
    Monomial q = m;
    for (const auto& f : dm.factors) {
      if (f.sym.kind != SymbolKind::Param && q.power_of(f.sym) < f.power) return std::nullopt;
      q = q.without(f.sym, f.power);
    }
    out.add_term(c / dc, q);
  }
  return out;
}

bool is_param_monomial(const JetExpr& e) {
  return e.size() == 1 && e.terms().begin()->first.params_only();
}

// k with a = k*b (a parameter monomial), tested with `zero`.
template <class Zero>
std::optional<JetExpr> constant_ratio(const JetExpr& a, const JetExpr& b, Zero zero) {
  if (b.is_zero() || a.is_zero()) return std::nullopt;
  const auto& [m0, c0] = *b.terms().begin();
  JetExpr lead = JetExpr::term(c0, m0);
  for (const auto& [m, c] : a.terms()) {
    auto q = divide_exact(JetExpr::term(c, m), lead);
    if (q && is_param_monomial(*q) && zero(a - *q * b)) return q;
  }
  return std::nullopt;
}

// Everything needed to turn printed strings into expressions of one
// instantiation.
struct Context {
  ParseContext ctx;
  std::map<std::uint8_t, JetExpr> values;        // bound parameters
  std::map<std::uint8_t, JetExpr> separated;     // function id -> product form
  SideRelations relations;

  JetExpr bind(const JetExpr& e) const {
    JetExpr r = e;
    for (int pass = 0; pass < 6; ++pass) {
      bool touched = false;
      r = substitute(r, [&](const Symbol& s) -> std::optional<JetExpr> {
        if (s.kind == SymbolKind::Param) {
          auto it = values.find(s.id);
          if (it == values.end()) return std::nullopt;
          touched = true;
          return it->second;
        }
        if (s.kind == SymbolKind::ArbFun) {
          MultiIndex base{};
          auto it = separated.find(s.id);
          if (it == separated.end()) return std::nullopt;
          touched = true;
          (void)base;
          return total_derivative(it->second, s.deriv);
        }
        return std::nullopt;
      });
      if (!touched) break;
    }
    return relations.reduce(r);
  }

  JetExpr parse(const std::string& s) const { return bind(parse_expr(s, ctx)); }
};

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

// Negates every component (used for identity potentials).
ObjectEdit negate_range(std::size_t lo, std::size_t hi, std::string what) {
  return [=](const std::vector<std::string>& c) -> std::optional<RepairCandidate> {
    if (hi > c.size() || lo >= hi) return std::nullopt;
    RepairCandidate r{c, {}};
    for (std::size_t i = lo; i < hi; ++i) r.components[i] = "-(" + c[i] + ")";
    r.edits.push_back({RepairEdit::Kind::Negate, -1, what});
    return r;
  };
}

// Drops a stray "*f" factor of an arbitrary time function from components
// [lo, hi).
ObjectEdit strip_function_factor(std::size_t lo, std::size_t hi, std::vector<std::string> names) {
  return [=](const std::vector<std::string>& c) -> std::optional<RepairCandidate> {
    for (std::size_t i = lo; i < hi && i < c.size(); ++i) {
      for (const auto& n : names) {
        std::string pat = "*" + n;
        std::size_t p = c[i].find(pat);
        while (p != std::string::npos) {
          std::size_t after = p + pat.size();
          bool ends = after == c[i].size() || !(std::isalnum(static_cast<unsigned char>(c[i][after])) ||
                                                c[i][after] == '_' || c[i][after] == '\'');
          if (ends) {
            RepairCandidate r{c, {}};
            r.components[i].erase(p, pat.size());
            r.edits.push_back({RepairEdit::Kind::Custom, static_cast<int>(i),
                               "stray factor " + n + " dropped from '" + c[i] + "'"});
            return r;
          }
          p = c[i].find(pat, p + 1);
        }
      }
    }
    return std::nullopt;
  };
}

class Builder {
 public:
  Builder(json j, ParamBindings bindings, LoadOptions opts)
      : j_(std::move(j)), bindings_(std::move(bindings)), opts_(std::move(opts)) {}

  CatalogEntry build();

 private:
  void setup_context();
  void apply_bindings();
  bool holds(const Condition& c) const;
  bool active(const json& obj) const;
  void fail(const std::string& object, const std::string& what, const std::string& residual = "");
  void status(const std::string& kind, const std::string& id, bool ok, const std::string& detail,
              const std::optional<RepairRecord>& repair = std::nullopt);
  std::optional<RepairRecord> resolve(const std::string& object, const json& obj,
                                      const std::vector<std::string>& printed, const RepairCheck& check,
                                      const RepairOptions& ropts, const std::vector<TargetRepairSpec>& targets,
                                      std::vector<std::string>& final_components, bool& ok);

  void do_multipliers();
  void do_currents();
  void do_identities();
  void do_charges();
  void do_potential_systems();

  json j_;
  ParamBindings bindings_;
  LoadOptions opts_;
  Context cx_;
  CatalogEntry e_;
};

void Builder::fail(const std::string& object, const std::string& what, const std::string& residual) {
  if (opts_.strict) throw CatalogCorrupt(e_.name + "/" + object, what, residual);
}

void Builder::status(const std::string& kind, const std::string& id, bool ok, const std::string& detail,
                     const std::optional<RepairRecord>& repair) {
  e_.statuses.push_back({kind, id, ok, detail, repair});
}

void Builder::setup_context() {
  e_.name = j_.at("name").get<std::string>();
  e_.title = get_string(j_, "title");
  e_.alternatives = get_string(j_, "alternatives");
  e_.dim = j_.at("dim").get<int>();
  cx_.ctx.dim = e_.dim;
  cx_.ctx.fields = {"u", "w", "wx", "wy", "wz"};
  cx_.ctx.functions.clear();
  if (j_.contains("functions")) {
    for (auto& [k, v] : j_["functions"].items()) {
      unsigned sig = signature_of(v.get<std::string>());
      cx_.ctx.functions[k] = sig;
      SymbolRegistry::instance().function(k, sig);
    }
  } else {
    cx_.ctx.functions["f"] = kSigTime;
  }
  if (e_.dim >= 2) cx_.ctx.functions["chi"] = kSigTime;
  for (const auto& p : j_.value("params", std::vector<std::string>{})) e_.params.push_back(p);
  cx_.ctx.params = e_.params;
  for (const auto& c : j_.value("constraints", std::vector<std::string>{})) e_.constraints.push_back(parse_condition(c));
  if (j_.contains("cases"))
    for (auto& [k, v] : j_["cases"].items())
      for (const auto& c : v) e_.cases[k].push_back(parse_condition(c.get<std::string>()));
  if (j_.contains("defaults"))
    for (auto& [k, v] : j_["defaults"].items()) e_.defaults[k] = v.get<std::string>();
}

void Builder::apply_bindings() {
  auto& reg = SymbolRegistry::instance();
  auto param_id = [&](const std::string& n) {
    if (std::find(e_.params.begin(), e_.params.end(), n) == e_.params.end())
      throw ConstraintViolation("entry '" + e_.name + "' has no parameter '" + n + "'");
    return reg.param(n);
  };
  for (const auto& b : bindings_) {
    std::uint8_t id = param_id(b.name);
    JetExpr v = parse_expr(b.value, cx_.ctx);
    if (b.squared) {
      if (!v.is_constant()) throw ConstraintViolation("square of " + b.name + " must be a rational constant");
      cx_.relations.add_square(id, v.constant_value());
    } else {
      cx_.values[id] = v;
    }
  }
  // Entry constraints.
  for (const auto& c : e_.constraints) {
    std::uint8_t id = param_id(c.param);
    bool bound = cx_.values.count(id) > 0;
    switch (c.kind) {
      case Condition::Kind::Square: {
        JetExpr v = parse_expr(c.value, cx_.ctx);
        if (bound) {
          if (!cx_.bind(cx_.values[id].pow(2) - v).is_zero())
            throw ConstraintViolation(e_.name + ": " + c.param + " = " + to_string(cx_.values[id]) + " violates " +
                                      c.text());
        } else if (cx_.relations.squares().count(id)) {
          if (cx_.relations.squares().at(id) != v.constant_value())
            throw ConstraintViolation(e_.name + ": square binding of " + c.param + " violates " + c.text());
        } else {
          cx_.relations.add_square(id, v.constant_value());
        }
        break;
      }
      case Condition::Kind::NonZero:
        if (bound && cx_.bind(cx_.values[id]).is_zero())
          throw ConstraintViolation(e_.name + ": " + c.param + " must be nonzero");
        break;
      case Condition::Kind::Equal: {
        JetExpr v = parse_expr(c.value, cx_.ctx);
        if (bound) {
          if (!cx_.bind(cx_.values[id] - v).is_zero())
            throw ConstraintViolation(e_.name + ": binding violates " + c.text());
        } else {
          cx_.values[id] = v;
        }
        break;
      }
    }
  }
  if (j_.contains("separate"))
    for (auto& [k, v] : j_["separate"].items()) {
      std::uint8_t fid = reg.function(k, cx_.ctx.functions.at(k));
      cx_.separated[fid] = parse_expr(v.get<std::string>(), cx_.ctx);
      e_.separated[k] = v.get<std::string>();
    }
  if (j_.contains("relations"))
    for (const auto& r : j_["relations"]) {
      JetExpr lead = parse_expr(r.at("leading").get<std::string>(), cx_.ctx);
      if (lead.size() != 1) throw CatalogCorrupt(e_.name, "relation leading term must be a single symbol");
      const Monomial& m = lead.terms().begin()->first;
      cx_.relations.add_function_relation(m.factors.at(0).sym, parse_expr(r.at("rhs").get<std::string>(), cx_.ctx));
    }
  e_.bindings = bindings_;
}

bool Builder::holds(const Condition& c) const {
  std::uint8_t id = SymbolRegistry::instance().param(c.param);
  JetExpr p = cx_.bind(JetExpr::symbol(Symbol::param(id)));
  JetExpr v = cx_.bind(parse_expr(c.value, cx_.ctx));
  switch (c.kind) {
    case Condition::Kind::Square: return cx_.bind(p.pow(2) - v).is_zero();
    case Condition::Kind::NonZero: return !p.is_zero();
    case Condition::Kind::Equal: return cx_.bind(p - v).is_zero();
  }
  return false;
}

bool Builder::active(const json& obj) const {
  std::string c = get_string(obj, "case", "generic");
  return std::find(e_.active_cases.begin(), e_.active_cases.end(), c) != e_.active_cases.end();
}

std::optional<RepairRecord> Builder::resolve(const std::string& object, const json& obj,
                                             const std::vector<std::string>& printed, const RepairCheck& check,
                                             const RepairOptions& ropts, const std::vector<TargetRepairSpec>& targets,
                                             std::vector<std::string>& final_components, bool& ok) {
  final_components = printed;
  ok = true;
  auto passes = [&](const std::vector<std::string>& c) {
    if (std::any_of(c.begin(), c.end(), has_gap)) return false;
    try {
      return check(c);
    } catch (const std::exception&) {
      return false;
    }
  };
  if (passes(printed)) return std::nullopt;
  std::optional<RepairCandidate> found;
  for (const auto& t : targets) {
    auto cand = search_repair_to_target(printed, t);
    if (cand && passes(cand->components) && (!found || cand->edits.size() < found->edits.size())) found = cand;
  }
  if (!found) found = search_repair(printed, check, ropts);
  if (!found && obj.contains("repair") && obj["repair"].contains("replacement")) {
    auto rep = obj["repair"]["replacement"].get<std::vector<std::string>>();
    if (rep.size() == printed.size() && passes(rep))
      found = RepairCandidate{rep, {{RepairEdit::Kind::Manual, -1, "replaced by a hand-derived form"}}};
  }
  if (!found) {
    ok = false;
    fail(object, "fails verification and no repair within the edit budget was found");
    return std::nullopt;
  }
  RepairRecord rec;
  rec.printed = printed;
  rec.corrected = found->components;
  rec.edits = found->edits;
  if (obj.contains("repair")) {
    rec.recorded = true;
    rec.note = get_string(obj["repair"], "note");
    auto want = obj["repair"].value("edits", std::vector<std::string>{});
    std::vector<std::string> got;
    for (const auto& e : rec.edits) got.push_back(kind_name(e.kind));
    if (want != got) {
      ok = false;
      fail(object, "recorded repair (" + join(want, ", ") + ") differs from the search result (" + join(got, ", ") + ")");
    } else if (obj["repair"].contains("corrected") &&
               obj["repair"]["corrected"].get<std::vector<std::string>>() != rec.corrected) {
      ok = false;
      fail(object, "recorded corrected text differs from the search result");
    }
  } else {
    fail(object, "needs an unrecorded repair: " + [&] {
      std::string s;
      for (const auto& e : rec.edits) s += "[" + kind_name(e.kind) + "] " + e.description + "; ";
      return s;
    }());
  }
  final_components = rec.corrected;
  return rec;
}

void Builder::do_multipliers() {
  for (const auto& m : j_.value("multipliers", json::array())) {
    if (!active(m)) continue;
    MultiplierItem it;
    it.id = m.at("id");
    it.label = get_string(m, "label");
    it.case_name = get_string(m, "case", "generic");
    it.printed = m.at("Q");
    auto check = [&](const std::vector<std::string>& c) {
      return multiplier_residual(e_.pde, cx_.parse(c[0])).is_zero();
    };
    std::vector<std::string> comps;
    bool ok;
    it.repair = resolve("multiplier " + it.id, m, {it.printed}, check, {}, {}, comps, ok);
    std::string detail;
    if (ok) {
      it.Q = cx_.parse(comps[0]);
      detail = "E_u(Q G) = 0";
    } else {
      detail = "E_u(Q G) = " + [&] {
        try {
          return to_string(multiplier_residual(e_.pde, cx_.parse(comps[0])));
        } catch (const std::exception& ex) {
          return std::string(ex.what());
        }
      }();
    }
    status("multiplier", it.id, ok, detail, it.repair);
    e_.multipliers.push_back(std::move(it));
  }
}

void Builder::do_currents() {
  for (const auto& c : j_.value("currents", json::array())) {
    if (!active(c)) continue;
    CurrentItem it;
    it.id = c.at("id");
    it.label = get_string(c, "label");
    it.case_name = get_string(c, "case", "generic");
    it.multiplier = get_string(c, "multiplier");
    it.min_N = c.value("min_N", 0);
    it.printed.push_back(c.at("T"));
    bool omitted = !c.contains("Phi") || c["Phi"].is_null();
    if (!omitted)
      for (const auto& p : c["Phi"]) it.printed.push_back(p.get<std::string>());
    const MultiplierItem* mult = nullptr;
    for (const auto& m : e_.multipliers)
      if (m.id == it.multiplier) mult = &m;
    std::vector<std::string> comps;
    bool ok = true;
    std::string detail;
    const std::string obj = "current " + it.id;
    if (omitted) {
      if (!mult) {
        fail(obj, "fluxes omitted and no multiplier to reconstruct them from");
        status("current", it.id, false, "no multiplier");
        continue;
      }
      JetExpr Q = mult->Q;
      // The density fixes the characteristic only up to sign.
      int sign = 1;
      auto check = [&](const std::vector<std::string>& s) {
        JetExpr dt = total_derivative(cx_.parse(s[0]), kTime);
        for (int sg : {1, -1})
          if (is_total_spatial_divergence(e_.pde.reduce(sg * Q * e_.pde.G - dt), e_.dim)) {
            sign = sg;
            return true;
          }
        return false;
      };
      it.repair = resolve(obj, c, it.printed, check, {}, {}, comps, ok);
      if (ok) {
        check(comps);
        it.T = cx_.parse(comps[0]);
        JetExpr e = e_.pde.reduce(sign * Q * e_.pde.G - total_derivative(it.T, kTime));
        try {
          it.Phi = invert_divergence(e, e_.dim).components;
          it.reconstructed = true;
        } catch (const std::exception& ex) {
          ok = false;
          fail(obj, std::string("flux reconstruction failed: ") + ex.what());
          detail = ex.what();
        }
      } else {
        detail = "Q G - D_t T is not a spatial divergence";
      }
    } else {
      auto check = [&](const std::vector<std::string>& s) {
        Vec phi;
        for (std::size_t i = 1; i < s.size(); ++i) phi.push_back(cx_.parse(s[i]));
        return verify_current(e_.pde, cx_.parse(s[0]), phi).ok;
      };
      RepairOptions ro;
      ro.parse = [&](const std::string& x) { return parse_expr(x, cx_.ctx); };
      it.repair = resolve(obj, c, it.printed, check, ro, {}, comps, ok);
      if (ok) {
        it.T = cx_.parse(comps[0]);
        for (std::size_t i = 1; i < comps.size(); ++i) it.Phi.push_back(cx_.parse(comps[i]));
      } else {
        detail = "residual nonzero";
      }
    }
    if (ok) {
      auto v = verify_current(e_.pde, it.T, it.Phi);
      if (!v.ok) {
        ok = false;
        detail = "residual " + to_string(v.residual);
        fail(obj, "current does not vanish on solutions", to_string(v.residual));
      }
    }
    if (ok) {
      // Characteristic of the current against its multiplier.
      std::map<MultiIndex, JetExpr> g;
      e_.pde.on_solutions(total_derivative(it.T, kTime) + divergence(it.Phi), g);
      JetExpr q;
      for (const auto& [k, coef] : g) {
        JetExpr t = coef;
        for (int a = 0; a < kSlots; ++a)
          for (int n = 0; n < k[a]; ++n) t = -total_derivative(t, a);
        q += t;
      }
      if (mult) {
        JetExpr qs = e_.pde.on_solutions(q);
        JetExpr Qs = e_.pde.on_solutions(mult->Q);
        if (!Qs.is_zero() && !qs.is_zero()) {
          const auto& [m0, c0] = *Qs.terms().begin();
          for (const auto& [m, c] : qs.terms()) {
            auto k = divide_exact(JetExpr::term(c, m), JetExpr::term(c0, m0));
            if (k && is_param_monomial(*k)) {
              it.characteristic_factor = *k;
              break;
            }
          }
        }
        it.characteristic_defect = e_.pde.on_solutions(qs - it.characteristic_factor * Qs);
        if (!it.characteristic_defect.is_zero()) {
          ok = false;
          detail = "characteristic differs from multiplier " + it.multiplier + " by " +
                   to_string(it.characteristic_defect);
          fail(obj, detail);
        }
      }
    }
    if (ok) {
      try {
        it.family = split_by_arbitrary_function(e_.pde, it.T, it.Phi, it.min_N);
        it.checks = theorem_checks(e_.pde, it.family);
        it.flux = reduce_to_spatial_flux(e_.pde, it.family);
        for (int i = 0; i <= it.family.N; ++i) it.identities.push_back(divergence_identity(e_.pde, it.family, i));
        if (!it.checks.all_zero()) {
          ok = false;
          detail = "reduction identities fail";
          fail(obj, detail);
        } else {
          detail = std::string(it.reconstructed ? "fluxes reconstructed; " : "") + "N = " + std::to_string(it.family.N) +
                   "; " + it.flux.certificate.describe();
          if (mult && !(it.characteristic_factor == JetExpr(1)))
            detail += "; characteristic is " + to_string(it.characteristic_factor) + " times the multiplier";
        }
      } catch (const std::exception& ex) {
        ok = false;
        detail = ex.what();
        fail(obj, ex.what());
      }
    }
    status("current", it.id, ok, detail, it.repair);
    e_.currents.push_back(std::move(it));
  }
}

void Builder::do_identities() {
  for (const auto& d : j_.value("identities", json::array())) {
    if (!active(d)) continue;
    IdentityItem it;
    it.id = d.at("id");
    it.label = get_string(d, "label");
    it.case_name = get_string(d, "case", "generic");
    it.current = d.at("current");
    it.index = d.value("index", 0);
    it.note = get_string(d, "note");
    std::vector<std::string> printed{get_string(d, "scale", "1"), d.at("T").get<std::string>()};
    std::size_t npsi = d.at("Psi").size();
    for (const auto& p : d["Psi"]) printed.push_back(p);
    std::vector<MultiIndex> rk;
    for (const auto& r : d.at("R")) {
      rk.push_back(index_of(r.at("d").get<std::string>()));
      printed.push_back(r.at("c").get<std::string>());
    }
    auto assemble = [&](const std::vector<std::string>& s, IdentityItem& out) {
      out.scale = cx_.parse(s[0]);
      out.T = cx_.parse(s[1]);
      out.Psi.clear();
      for (std::size_t i = 0; i < npsi; ++i) out.Psi.push_back(cx_.parse(s[2 + i]));
      out.R.clear();
      for (std::size_t i = 0; i < rk.size(); ++i) out.R[rk[i]] += cx_.parse(s[2 + npsi + i]);
    };
    auto defect = [&](const IdentityItem& x) {
      JetExpr r = x.scale * x.T - divergence(x.Psi);
      for (const auto& [k, c] : x.R) r -= c * total_derivative(e_.pde.G, k);
      return e_.pde.reduce(r);
    };
    auto check = [&](const std::vector<std::string>& s) {
      IdentityItem x;
      assemble(s, x);
      return defect(x).is_zero();
    };
    RepairOptions ro;
    ro.max_edits = 2;
    ro.object_edits.push_back(negate_range(2, 2 + npsi, "potential vector negated"));
    std::vector<std::string> funs;
    for (const auto& [n, sig] : cx_.ctx.functions)
      if (sig == kSigTime && n != "chi") funs.push_back(n);
    ro.object_edits.push_back(strip_function_factor(2 + npsi, printed.size(), funs));
    std::vector<std::string> comps;
    bool ok;
    const std::string obj = "identity " + it.id;
    it.repair = resolve(obj, d, printed, check, ro, {}, comps, ok);
    std::string detail;
    if (ok) {
      assemble(comps, it);
      detail = "exact off solutions";
      const CurrentItem* cur = nullptr;
      for (const auto& c : e_.currents)
        if (c.id == it.current) cur = &c;
      if (!cur || it.index >= static_cast<int>(cur->identities.size())) {
        ok = false;
        detail = "referenced current or index unavailable";
        fail(obj, detail);
      } else {
        const DivergenceIdentity& comp = cur->identities[it.index];
        JetExpr lhs = e_.pde.reduce(it.scale * it.T);
        // kappa from matching a term of the computed density.
        std::optional<JetExpr> kappa;
        if (!comp.T.is_zero()) {
          const auto& [m0, c0] = *comp.T.terms().begin();
          for (const auto& [m, c] : lhs.terms()) {
            auto q = divide_exact(JetExpr::term(c, m), JetExpr::term(c0, m0));
            if (!q || !is_param_monomial(*q)) continue;
            if (e_.pde.reduce(lhs - *q * comp.T).is_zero()) {
              kappa = *q;
              break;
            }
          }
        }
        if (!kappa && lhs.is_zero() && e_.pde.reduce(comp.T).is_zero()) {
          detail += "; both densities vanish for these parameters";
        } else if (!kappa) {
          ok = false;
          detail = "density is not a constant multiple of the computed T_" + std::to_string(it.index);
          fail(obj, detail);
        } else {
          it.kappa = *kappa;
          bool match = true;
          std::set<MultiIndex> keys;
          for (const auto& [k, c] : it.R) keys.insert(k);
          for (const auto& [k, c] : comp.R) keys.insert(k);
          for (const auto& k : keys) {
            JetExpr a = it.R.count(k) ? it.R.at(k) : JetExpr();
            JetExpr b = comp.R.count(k) ? comp.R.at(k) : JetExpr();
            if (!e_.pde.on_solutions(a - it.kappa * b).is_zero()) match = false;
          }
          it.matches_computed = match;
          if (!match) {
            ok = false;
            detail = "R(G) differs from the computed identity";
            fail(obj, detail);
          } else {
            detail += "; matches computed identity with factor " + to_string(it.kappa);
          }
        }
      }
    } else {
      detail = "identity defect nonzero";
    }
    status("identity", it.id, ok, detail, it.repair);
    e_.identities.push_back(std::move(it));
  }
}

void Builder::do_charges() {
  for (const auto& q : j_.value("charges", json::array())) {
    if (!active(q)) continue;
    ChargeItem it;
    it.id = q.at("id");
    it.label = get_string(q, "label");
    it.case_name = get_string(q, "case", "generic");
    it.current = q.at("current");
    it.kind = q.at("kind");
    const CurrentItem* cur = nullptr;
    for (const auto& c : e_.currents)
      if (c.id == it.current) cur = &c;
    const std::string obj = "charge " + it.id;
    if (!cur || cur->flux.Gamma.empty()) {
      fail(obj, "referenced current unavailable");
      status("charge", it.id, false, "referenced current unavailable");
      continue;
    }
    const Vec& gamma = cur->flux.Gamma;
    if (it.kind == "flux") {
      for (const auto& g : q.at("Gamma")) it.printed.push_back(g);
    } else if (it.kind == "loop") {
      it.printed = {q.at("dx"), q.at("dy")};
    } else if (it.kind == "xy") {
      it.printed = {q.at("X"), q.at("Y")};
    } else if (it.kind == "balance") {
      it.printed = {q.at("rate").at("dx"), q.at("rate").at("dy"), q.at("flux").at("dx"), q.at("flux").at("dy")};
    } else {
      throw CatalogCorrupt(e_.name + "/" + obj, "unknown charge kind " + it.kind);
    }
    auto to_gamma = [&](const std::vector<std::string>& s) -> Vec {
      if (it.kind == "flux") {
        Vec g;
        for (const auto& x : s) g.push_back(cx_.parse(x));
        return g;
      }
      if (it.kind == "loop") return {cx_.parse(s[1]), -cx_.parse(s[0])};
      if (it.kind == "xy") return {-cx_.parse(s[0]), -cx_.parse(s[1])};
      JetExpr P = total_derivative(cx_.parse(s[0]), kTime) - cx_.parse(s[2]);
      JetExpr Q = total_derivative(cx_.parse(s[1]), kTime) - cx_.parse(s[3]);
      return {Q, -P};
    };
    int found_sign = 0;
    auto check = [&](const std::vector<std::string>& s) {
      Vec g = to_gamma(s);
      if (g.size() != gamma.size()) return false;
      for (int sg : {1, -1}) {
        Vec sgv;
        for (const auto& x : g) sgv.push_back(sg * x);
        if (auto w = equal_modulo_curl(e_.pde, sgv, gamma)) {
          found_sign = sg;
          it.curl_potentials = w;
          return true;
        }
      }
      return false;
    };
    std::vector<TargetRepairSpec> specs;
    if (it.kind != "balance") {
      for (int sg : {1, -1}) {
        TargetRepairSpec ts;
        ts.parse = [&](const std::string& s) { return cx_.parse(s); };
        ts.target = [&, sg](std::size_t i) -> JetExpr {
          if (it.kind == "flux") return sg * gamma[i];
          if (it.kind == "loop") return i == 0 ? -sg * gamma[1] : sg * gamma[0];
          return -sg * gamma[i];
        };
        ts.equal = [&, t = ts.target](std::size_t i, const JetExpr& e) {
          return e_.pde.on_solutions(e - t(i)).is_zero();
        };
        ts.max_edits_per_component = 2;
        specs.push_back(ts);
      }
    }
    std::vector<std::string> comps;
    bool ok = false;
    RepairOptions ro;
    ro.max_edits = 1;
    auto rec = resolve(obj, q, it.printed, check, ro, specs, comps, ok);
    std::string detail;
    if (ok) {
      check(comps);
      it.sign = found_sign;
      it.Gamma = to_gamma(comps);
      detail = std::string("equals ") + (it.sign > 0 ? "+" : "-") + "Gamma" +
               (it.curl_potentials && !it.curl_potentials->empty() ? " modulo a curl" : "") + " on solutions";
    } else {
      detail = "not equivalent to the computed flux";
    }
    it.repair = rec;
    status("charge", it.id, ok, detail, it.repair);
    e_.charges.push_back(std::move(it));
  }
}

void Builder::do_potential_systems() {
  for (const auto& p : j_.value("potential_systems", json::array())) {
    if (!active(p)) continue;
    PotentialSystemItem it;
    it.id = p.at("id");
    it.label = get_string(p, "label");
    it.case_name = get_string(p, "case", "generic");
    it.current = p.at("current");
    const std::string obj = "potential system " + it.id;
    const CurrentItem* cur = nullptr;
    for (const auto& c : e_.currents)
      if (c.id == it.current) cur = &c;
    if (!cur || cur->flux.Gamma.empty()) {
      fail(obj, "referenced current unavailable");
      status("potential_system", it.id, false, "referenced current unavailable");
      continue;
    }
    if (p.contains("from_charge")) {
      const ChargeItem* ch = nullptr;
      for (const auto& c : e_.charges)
        if (c.id == p["from_charge"].get<std::string>()) ch = &c;
      if (!ch || ch->kind != "xy") {
        fail(obj, "from_charge needs an (X, Y) charge");
        status("potential_system", it.id, false, "bad charge reference");
        continue;
      }
      const auto& src = ch->repair ? ch->repair->corrected : ch->printed;
      it.printed = {{src[0], "w_y"}, {src[1], "-w_x"}};
    } else {
      for (const auto& eq : p.at("equations")) it.printed.emplace_back(eq.at(0), eq.at(1));
    }
    it.built = build_potential_system(cur->flux);
    bool ok = true;
    std::string detail;
    if (it.printed.size() != it.built.equations.size()) {
      ok = false;
      detail = "equation count differs from the dimension";
      fail(obj, detail);
    }
    std::vector<std::string> lhs;
    for (const auto& [l, r] : it.printed) lhs.push_back(l);
    if (ok) {
      for (std::size_t i = 0; i < it.printed.size(); ++i) {
        auto k = constant_ratio(cx_.parse(it.printed[i].second), it.built.equations[i].rhs,
                                [&](const JetExpr& d) { return cx_.bind(d).is_zero(); });
        if (!k) {
          ok = false;
          detail = "curl side of equation " + std::to_string(i + 1) + " is not a constant multiple of the built one";
          fail(obj, detail);
          break;
        }
        it.factors.push_back(*k);
      }
    }
    if (ok) {
      auto check = [&](const std::vector<std::string>& s) {
        for (std::size_t i = 0; i < s.size(); ++i)
          if (!e_.pde.on_solutions(cx_.parse(s[i]) - it.factors[i] * it.built.equations[i].lhs).is_zero()) return false;
        return true;
      };
      TargetRepairSpec ts;
      ts.parse = [&](const std::string& s) { return cx_.parse(s); };
      ts.target = [&](std::size_t i) { return it.factors[i] * it.built.equations[i].lhs; };
      ts.equal = [&](std::size_t i, const JetExpr& e) {
        return e_.pde.on_solutions(e - it.factors[i] * it.built.equations[i].lhs).is_zero();
      };
      std::vector<std::string> comps;
      if (p.contains("from_charge")) {
        // Corrections already live with the charge.
        ok = check(lhs);
        if (!ok) fail(obj, "equations differ from the built system");
      } else {
        it.repair = resolve(obj, p, lhs, check, {}, {ts}, comps, ok);
      }
    }
    auto& reg = SymbolRegistry::instance();
    it.div_curl_zero = div_of_curl_side(it.built).is_zero();
    it.cross_elimination_zero = e_.pde.on_solutions(cross_eliminate(it.built)).is_zero();
    if (it.built.dim == 2) {
      JetExpr chi = JetExpr::symbol(Symbol::fun(reg.function("chi", kSigTime)));
      it.gauge_invariant = check_gauge_invariance(it.built, {chi});
      JetExpr xchi = JetExpr::symbol(Symbol::indep(1)) * chi;
      it.non_gauge_rejected = !check_gauge_invariance(it.built, {xchi});
    } else {
      JetExpr chi = JetExpr::symbol(Symbol::fun(reg.function("chi", kSigAll)));
      Vec grad{total_derivative(chi, 1), total_derivative(chi, 2), total_derivative(chi, 3)};
      it.gauge_invariant = check_gauge_invariance(it.built, grad);
      it.non_gauge_rejected = !check_gauge_invariance(it.built, {chi, JetExpr(), JetExpr()});
    }
    if (!(it.div_curl_zero && it.cross_elimination_zero && it.gauge_invariant && it.non_gauge_rejected)) {
      ok = false;
      detail = "built system fails its structural checks";
      fail(obj, detail);
    }
    if (ok) detail = "matches the built system; Div curl = 0; cross-elimination gives Div Gamma = 0 on solutions";
    status("potential_system", it.id, ok, detail, it.repair);
    e_.potential_systems.push_back(std::move(it));
  }
}

CatalogEntry Builder::build() {
  setup_context();
  apply_bindings();
  // PDE.
  PdeSpec& p = e_.pde;
  p.name = e_.name;
  p.dim = e_.dim;
  p.ctx = cx_.ctx;
  p.relations = cx_.relations;
  p.G = cx_.parse(j_.at("G"));
  const json& s = j_.at("solved");
  JetExpr lead = cx_.parse(s.at("leading"));
  if (lead.size() != 1) throw CatalogCorrupt(e_.name, "leading derivative must be a single jet");
  p.leading = lead.terms().begin()->first.factors.at(0).sym;
  p.rhs = cx_.parse(s.at("rhs"));
  p.lambda = cx_.parse(get_string(s, "factor", "1")).constant_value();
  if (j_.contains("div_form")) {
    DivForm d;
    const json& dj = j_["div_form"];
    d.sign = dj.value("sign", 1);
    for (const auto& l : dj.at("lead"))
      d.lead.push_back({cx_.parse(l.at("coeff")).constant_value(), index_of(l.at("d"))});
    for (const auto& t : dj.at("terms")) d.rhs.push_back({index_of(t.at("d")), cx_.parse(t.at("F"))});
    p.div_form = d;
  }
  try {
    p.finalize();
  } catch (const std::invalid_argument& ex) {
    throw CatalogCorrupt(e_.name, ex.what());
  }
  e_.active_cases = {"generic"};
  for (const auto& [name, conds] : e_.cases)
    if (std::all_of(conds.begin(), conds.end(), [&](const Condition& c) { return holds(c); }))
      e_.active_cases.push_back(name);

  do_multipliers();
  do_currents();
  do_identities();
  do_charges();
  do_potential_systems();
  return e_;
}

}  // namespace

template <class T>
static const T& find_item(const std::vector<T>& v, const std::string& id, const char* what) {
  for (const auto& x : v)
    if (x.id == id) return x;
  throw UnknownEntry(std::string("no ") + what + " '" + id + "'");
}

const CurrentItem& CatalogEntry::current(const std::string& id) const { return find_item(currents, id, "current"); }
const MultiplierItem& CatalogEntry::multiplier(const std::string& id) const {
  return find_item(multipliers, id, "multiplier");
}
const ChargeItem& CatalogEntry::charge(const std::string& id) const { return find_item(charges, id, "charge"); }
const IdentityItem& CatalogEntry::identity(const std::string& id) const {
  return find_item(identities, id, "identity");
}
const PotentialSystemItem& CatalogEntry::potential_system(const std::string& id) const {
  return find_item(potential_systems, id, "potential system");
}

JetExpr CatalogEntry::parse(const std::string& s) const {
  // Re-derive the binding map from the stored PDE context.
  JetExpr e = parse_expr(s, pde.ctx);
  auto& reg = SymbolRegistry::instance();
  std::map<std::uint8_t, JetExpr> products;
  for (const auto& [name, form] : separated)
    products[reg.function(name, pde.ctx.functions.at(name))] = parse_expr(form, pde.ctx);
  for (int pass = 0; pass < 6; ++pass) {
    bool touched = false;
    e = substitute(e, [&](const Symbol& sym) -> std::optional<JetExpr> {
      if (sym.kind == SymbolKind::ArbFun) {
        auto it = products.find(sym.id);
        if (it == products.end()) return std::nullopt;
        touched = true;
        return total_derivative(it->second, sym.deriv);
      }
      if (sym.kind != SymbolKind::Param) return std::nullopt;
      for (const auto& b : bindings)
        if (!b.squared && reg.param(b.name) == sym.id) {
          touched = true;
          return parse_expr(b.value, pde.ctx);
        }
      return std::nullopt;
    });
    if (!touched) break;
  }
  return pde.reduce(e);
}

std::vector<RepairRecord> CatalogEntry::repairs() const {
  std::vector<RepairRecord> out;
  for (const auto& s : statuses)
    if (s.repair) out.push_back(*s.repair);
  return out;
}

std::vector<std::string> catalog_names(const LoadOptions& opts) {
  std::vector<std::string> out;
  std::filesystem::path d(dir_of(opts));
  if (!std::filesystem::is_directory(d)) throw CatalogCorrupt(d.string(), "catalog directory missing");
  for (const auto& f : std::filesystem::directory_iterator(d))
    if (f.path().extension() == ".json") out.push_back(f.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

CatalogEntry instantiate(const std::string& name, const ParamBindings& params, const LoadOptions& opts) {
  json j = read_entry(name, opts);
  try {
    return Builder(std::move(j), params, opts).build();
  } catch (const json::exception& e) {
    throw CatalogCorrupt(name, std::string("malformed catalog entry: ") + e.what());
  } catch (const ParseError& e) {
    throw CatalogCorrupt(name, std::string("unparseable expression: ") + e.what());
  }
}

ParamBindings case_bindings(const std::string& entry, const std::string& case_name, const LoadOptions& opts) {
  json j = read_entry(entry, opts);
  if (!j.contains("cases") || !j["cases"].contains(case_name))
    throw UnknownEntry("entry '" + entry + "' has no case '" + case_name + "'");
  ParamBindings b;
  for (const auto& c : j["cases"][case_name]) {
    Condition cond = parse_condition(c.get<std::string>());
    if (cond.kind == Condition::Kind::NonZero) continue;
    b.push_back({cond.param, cond.kind == Condition::Kind::Square, cond.value});
  }
  return b;
}

std::vector<CatalogEntry> load_catalog(const LoadOptions& opts) {
  std::vector<CatalogEntry> out;
  for (const auto& name : catalog_names(opts)) {
    CatalogEntry e = instantiate(name, {}, opts);
    for (const auto& [cname, conds] : e.cases) e.case_variants.push_back(instantiate(name, case_bindings(name, cname, opts), opts));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace topo
