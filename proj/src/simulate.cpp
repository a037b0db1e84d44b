#include "topo/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "topo/initial_data.hpp"

namespace topo {

using ojson = nlohmann::ordered_json;

namespace {

double number_or_formula(const ojson& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_initial_data(v.get<std::string>(), 0)({});
  throw ManifestError("expected a number or a formula, got " + v.dump());
}

EvolveOptions::Kernel kernel_of(const std::string& s) {
  if (s == "auto") return EvolveOptions::Kernel::Auto;
  if (s == "reject") return EvolveOptions::Kernel::Reject;
  if (s == "pin") return EvolveOptions::Kernel::Pin;
  throw ManifestError("kernel must be auto, reject or pin, got '" + s + "'");
}

std::string describe(const CurveSpec& c) {
  std::ostringstream os;
  os.precision(17);
  os << "polyline";
  for (const auto& v : c.vertices) os << " (" << v[0] << ", " << v[1] << ")";
  return os.str();
}

std::string describe(const BoxSpec& b) {
  std::ostringstream os;
  os.precision(17);
  os << "box [" << b.lo[0] << ", " << b.hi[0] << "] x [" << b.lo[1] << ", " << b.hi[1] << "] x [" << b.lo[2]
     << ", " << b.hi[2] << "]";
  return os.str();
}

/// Derivative at nodes[i] of the Lagrange interpolant through up to five
/// neighbouring nodes.
double lagrange_derivative(const std::vector<double>& t, const std::vector<double>& y, std::size_t i) {
  const std::size_t m = std::min<std::size_t>(5, t.size());
  if (m < 2) return 0;
  std::size_t lo = i >= 2 ? i - 2 : 0;
  lo = std::min(lo, t.size() - m);
  double d = 0;
  for (std::size_t j = lo; j < lo + m; ++j) {
    double w;
    if (j == i) {
      w = 0;
      for (std::size_t k = lo; k < lo + m; ++k)
        if (k != i) w += 1 / (t[i] - t[k]);
    } else {
      double num = 1, den = 1;
      for (std::size_t k = lo; k < lo + m; ++k) {
        if (k == j) continue;
        den *= t[j] - t[k];
        if (k != i) num *= t[i] - t[k];
      }
      w = num / den;
    }
    d += w * y[j];
  }
  return d;
}

std::size_t nearest(const std::vector<double>& t, double x) {
  auto it = std::lower_bound(t.begin(), t.end(), x);
  std::size_t i = static_cast<std::size_t>(it - t.begin());
  if (i == t.size()) return t.size() - 1;
  if (i > 0 && std::abs(t[i - 1] - x) < std::abs(t[i] - x)) return i - 1;
  return i;
}

ojson series_json(const SeriesCheck& s) {
  ojson j;
  j["name"] = s.name;
  j["values"] = s.values;
  if (!s.coarse.empty()) j["coarse"] = s.coarse;
  j["tolerances"] = s.tolerances;
  j["ok"] = s.ok;
  return j;
}

ojson evolution_json(const EvolveReport& r) {
  ojson j;
  j["dt"] = r.dt;
  j["steps"] = r.steps;
  j["stability_limit"] = r.stability_limit;
  j["dealiasing"] = r.dealiasing;
  j["kernel_policy"] = r.kernel_policy;
  j["initial_kernel"] = r.initial_kernel;
  j["pinned_kernel"] = r.pinned_kernel;
  j["notes"] = r.notes;
  return j;
}

ojson source_sink_json(const SourceSinkReport& s) {
  ojson j;
  j["times"] = s.times;
  j["w"] = s.w;
  j["deviation"] = s.deviation;
  j["max_deviation"] = s.max_deviation;
  return j;
}

struct Run {
  Trajectory traj;
  std::vector<double> step_t;
  std::vector<std::vector<double>> rate;  // per curve
};

}  // namespace

RunManifest RunManifest::from_json(const ojson& j) {
  if (!j.is_object()) throw ManifestError("manifest must be a JSON object");
  RunManifest m;
  static const std::vector<std::string> keys{"command", "pde",    "params",    "catalog_version", "grid",
                                             "u0",      "t_end",  "dt",        "sample_interval", "kernel",
                                             "gamma",   "balance", "curves",   "boxes",           "functions",
                                             "refine",  "domain", "seed",      "out"};
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ManifestError("unknown manifest key '" + k + "'");
  try {
    m.command = j.value("command", std::string("simulate"));
    if (m.command != "simulate") throw ManifestError("manifest command must be 'simulate'");
    m.pde = j.at("pde").get<std::string>();
    if (j.contains("params")) {
      const auto& p = j.at("params");
      if (p.is_string()) {
        m.params = p.get<std::string>();
      } else {
        std::string s;
        for (const auto& [k, v] : p.items()) {
          if (!s.empty()) s += ",";
          s += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
        }
        m.params = s;
      }
    }
    m.catalog_version = j.value("catalog_version", std::string());
    const auto& g = j.at("grid");
    m.n = g.at("n").get<std::vector<int>>();
    if (g.contains("period"))
      for (const auto& v : g.at("period")) m.period.push_back(number_or_formula(v));
    else
      m.period.assign(m.n.size(), 2 * M_PI);
    m.u0 = j.at("u0").get<std::string>();
    m.t_end = j.at("t_end").get<double>();
    m.dt = j.value("dt", 0.0);
    m.sample_interval = j.value("sample_interval", 0.0);
    m.kernel = j.value("kernel", std::string("auto"));
    kernel_of(m.kernel);
    m.gamma = j.value("gamma", std::string());
    m.balance = j.value("balance", std::string());
    for (const auto& c : j.value("curves", ojson::array())) {
      if (c.contains("rectangle")) {
        auto r = c.at("rectangle").get<std::vector<double>>();
        if (r.size() != 4) throw ManifestError("rectangle needs x0, y0, x1, y1");
        m.curves.push_back(CurveSpec::rectangle(r[0], r[1], r[2], r[3]));
      } else if (c.contains("polyline")) {
        CurveSpec cs;
        for (const auto& v : c.at("polyline")) cs.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        m.curves.push_back(cs);
      } else {
        throw ManifestError("curve needs 'rectangle' or 'polyline'");
      }
    }
    for (const auto& b : j.value("boxes", ojson::array())) {
      BoxSpec bs;
      auto lo = b.at("lo").get<std::vector<double>>();
      auto hi = b.at("hi").get<std::vector<double>>();
      if (lo.size() != 3 || hi.size() != 3) throw ManifestError("box corners need three coordinates");
      std::copy(lo.begin(), lo.end(), bs.lo.begin());
      std::copy(hi.begin(), hi.end(), bs.hi.begin());
      m.boxes.push_back(bs);
    }
    const ojson funs = j.value("functions", ojson::object());
    for (const auto& [k, v] : funs.items()) m.functions[k] = v.get<std::string>();
    m.refine = j.value("refine", true);
    m.domain = j.value("domain", std::string("periodic"));
    if (m.domain != "periodic" && m.domain != "decay") throw ManifestError("domain must be periodic or decay");
    m.seed = j.value("seed", std::uint64_t{0});
    m.out = j.value("out", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  } catch (const InitialDataError& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

ojson RunManifest::to_json() const {
  ojson j;
  j["command"] = command;
  j["pde"] = pde;
  j["params"] = params;
  j["catalog_version"] = catalog_version;
  j["grid"] = {{"n", n}, {"period", period}};
  j["u0"] = u0;
  j["t_end"] = t_end;
  j["dt"] = dt;
  j["sample_interval"] = sample_interval;
  j["kernel"] = kernel;
  j["gamma"] = gamma;
  j["balance"] = balance;
  ojson cs = ojson::array();
  for (const auto& c : curves) {
    ojson p = ojson::array();
    for (const auto& v : c.vertices) p.push_back({v[0], v[1]});
    cs.push_back({{"polyline", p}});
  }
  j["curves"] = cs;
  ojson bs = ojson::array();
  for (const auto& b : boxes) bs.push_back({{"lo", b.lo}, {"hi", b.hi}});
  j["boxes"] = bs;
  j["functions"] = functions;
  j["refine"] = refine;
  j["domain"] = domain;
  j["seed"] = seed;
  j["out"] = out;
  return j;
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read manifest " + path);
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("manifest " + path + " is not valid JSON: " + e.what());
  }
  return RunManifest::from_json(j);
}

std::string catalog_version(const LoadOptions& opts) {
  namespace fs = std::filesystem;
  const std::string dir = opts.directory.empty() ? default_catalog_directory() : opts.directory;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  for (const auto& f : files) {
    for (char c : f.filename().string()) mix(static_cast<unsigned char>(c));
    mix(0);
    std::ifstream in(f, std::ios::binary);
    char c;
    while (in.get(c)) mix(static_cast<unsigned char>(c));
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

SimulationResult run_simulation(const RunManifest& m, const LoadOptions& opts) {
  SimulationResult res;
  const std::string version = catalog_version(opts);
  if (!m.catalog_version.empty() && m.catalog_version != version)
    throw ManifestError("catalog version " + version + " does not match the manifest's " + m.catalog_version);
  CatalogEntry entry = instantiate(m.pde, parse_param_bindings(m.params), opts);
  const int dim = entry.dim;
  if (static_cast<int>(m.n.size()) != dim || static_cast<int>(m.period.size()) != dim)
    throw ManifestError("grid needs " + std::to_string(dim) + " sizes and periods for " + entry.name);
  if (m.t_end < 0) throw ManifestError("t_end must be nonnegative");
  if (!m.curves.empty() && dim != 2) throw ManifestError("curves need a 2D equation");
  if (!m.boxes.empty() && dim != 3) throw ManifestError("boxes need a 3D equation");

  FunBindings funs;
  funs["f"] = builtin_time_function("one");
  for (const auto& [k, v] : m.functions) {
    try {
      funs[k] = builtin_time_function(v);
    } catch (const std::exception& e) {
      throw ManifestError(e.what());
    }
  }
  const ParamValues params = numeric_parameters(entry);

  Vec gamma;
  if (!m.gamma.empty()) {
    bool found = false;
    for (const auto& c : entry.currents)
      if (c.id == m.gamma) {
        gamma = c.flux.Gamma;
        found = true;
      }
    for (const auto& c : entry.charges)
      if (!found && c.id == m.gamma) {
        gamma = c.Gamma;
        found = true;
      }
    if (!found) throw UnknownEntry(entry.name + " has no current or charge '" + m.gamma + "'");
    if (gamma.empty()) throw ManifestError(m.gamma + " has no verified flux vector");
  }
  if ((!m.curves.empty() || !m.boxes.empty()) && gamma.empty() && m.balance.empty())
    throw ManifestError("curves and boxes need 'gamma' or 'balance'");
  JetExpr rate_a, rate_b, flux_a, flux_b;
  if (!m.balance.empty()) {
    const ChargeItem& c = entry.charge(m.balance);
    if (c.kind != "balance") throw ManifestError(m.balance + " is not a balance charge");
    if (m.curves.empty()) throw ManifestError("balance checks need curves");
    const auto& s = c.repair ? c.repair->corrected : c.printed;
    rate_a = entry.parse(s[0]);
    rate_b = entry.parse(s[1]);
    flux_a = entry.parse(s[2]);
    flux_b = entry.parse(s[3]);
  }

  SpatialFunction u0f;
  try {
    u0f = parse_initial_data(m.u0, dim);
  } catch (const InitialDataError& e) {
    throw ManifestError(std::string("u0: ") + e.what());
  }
  GridField fine0 = sample_field(m.n, m.period, u0f);
  try {
    fine0.validate();
  } catch (const std::invalid_argument& e) {
    throw ManifestError(e.what());
  }
  bool refine = m.refine;
  std::vector<int> nc;
  for (int k : m.n) {
    nc.push_back(k / 2);
    if (k % 2 != 0 || k / 2 < 16) refine = false;
  }

  ojson rep;
  rep["command"] = "simulate";
  rep["manifest"] = m.to_json();
  rep["catalog_version"] = version;
  rep["entry"] = entry.name;
  ojson pv = ojson::object();
  for (const auto& [k, v] : params) pv[k] = v;
  rep["parameter_values"] = pv;
  rep["scope"] =
      "finite periodic cell; the run exhibits the integral-constraint mechanism and is not evidence for decaying "
      "data on the whole plane";
  rep["tolerance_rule"] = "10 * (|fine - coarse| + 64 * eps * magnitude), coarse on half the points per axis";
  rep["resolutions"] = refine ? ojson{m.n, nc} : ojson{m.n};

  const JetExpr u_sym = JetExpr::symbol(u_jet());
  {
    QuadratureResult q = cell_integral(u_sym, FieldState{&fine0, nullptr}, funs, params);
    rep["initial_mass"] = q.value;
  }

  EvolveOptions eo;
  eo.t_end = m.t_end;
  eo.dt = m.dt;
  eo.sample_interval = m.sample_interval;
  eo.kernel = kernel_of(m.kernel);

  auto run = [&](const GridField& u0, Run& out) {
    EvolveOptions o = eo;
    if (!m.balance.empty()) {
      out.rate.assign(m.curves.size(), {});
      o.observer = [&](const GridField& u, const GridField& ut) {
        out.step_t.push_back(u.t);
        for (std::size_t c = 0; c < m.curves.size(); ++c)
          out.rate[c].push_back(line_integral(rate_a, rate_b, FieldState{&u, &ut}, m.curves[c], funs, params).value);
      };
    }
    out.traj = evolve(entry, u0, o);
  };

  Run fine, coarse;
  try {
    run(fine0, fine);
    if (refine) run(sample_field(nc, m.period, u0f), coarse);
  } catch (const NonIntegrableSymbol& e) {
    res.exit_code = 3;
    rep["verdict"] = "constraint violation";
    rep["constraint_violation"] = {{"what", e.what()}, {"kernel_content", e.content}};
    rep["exit_code"] = 3;
    res.report = rep;
    return res;
  } catch (const CflViolation& e) {
    res.exit_code = 1;
    rep["verdict"] = "unstable time step";
    rep["cfl_violation"] = {{"what", e.what()}, {"dt", e.dt}, {"dt_max", e.dt_max}};
    rep["exit_code"] = 1;
    res.report = rep;
    return res;
  }
  res.evolution = fine.traj.report;
  rep["evolution"] = evolution_json(fine.traj.report);
  if (refine) rep["coarse_evolution"] = evolution_json(coarse.traj.report);

  const auto& U = fine.traj.u;
  if (refine && coarse.traj.u.size() != U.size()) throw std::logic_error("fine and coarse sample times differ");
  for (const auto& g : U) res.times.push_back(g.t);
  rep["times"] = res.times;

  auto state = [&](const Run& r, std::size_t k) {
    return FieldState{&r.traj.u[k], r.traj.u_t.size() == r.traj.u.size() ? &r.traj.u_t[k] : nullptr};
  };
  auto fill = [&](SeriesCheck& s, const std::function<QuadratureResult(const Run&, std::size_t)>& q) {
    for (std::size_t k = 0; k < U.size(); ++k) {
      QuadratureResult f = q(fine, k);
      QuadratureResult c = refine ? q(coarse, k) : f;
      s.values.push_back(f.value);
      if (refine) s.coarse.push_back(c.value);
      s.tolerances.push_back(operational_tolerance(f, c));
    }
  };
  auto bounded = [](SeriesCheck& s) {
    s.ok = true;
    for (std::size_t k = 0; k < s.values.size(); ++k)
      if (!(std::abs(s.values[k]) <= s.tolerances[k])) s.ok = false;
  };

  res.mass.name = "integral of u over the cell";
  fill(res.mass, [&](const Run& r, std::size_t k) { return cell_integral(u_sym, state(r, k), funs, params); });
  res.mass_constrained = fine.traj.report.kernel_policy == "reject";
  if (res.mass_constrained)
    bounded(res.mass);
  ojson mj = series_json(res.mass);
  mj["constrained"] = res.mass_constrained;
  rep["mass"] = mj;

  bool all_ok = !res.mass_constrained || res.mass.ok;

  if (!gamma.empty()) {
    for (std::size_t c = 0; c < m.curves.size(); ++c) {
      SeriesCheck s;
      s.name = "loop integral on " + describe(m.curves[c]);
      fill(s, [&](const Run& r, std::size_t k) {
        return loop_integral(gamma, state(r, k), m.curves[c], funs, params);
      });
      bounded(s);
      all_ok = all_ok && s.ok;
      res.charges.push_back(s);
    }
    for (std::size_t a = 0; a < res.charges.size(); ++a)
      for (std::size_t b = a + 1; b < res.charges.size(); ++b) {
        SeriesCheck s;
        s.name = "curve " + std::to_string(a) + " minus curve " + std::to_string(b);
        const auto &A = res.charges[a], &B = res.charges[b];
        for (std::size_t k = 0; k < A.values.size(); ++k) {
          s.values.push_back(A.values[k] - B.values[k]);
          if (refine) s.coarse.push_back(A.coarse[k] - B.coarse[k]);
          s.tolerances.push_back(std::max(A.tolerances[k], B.tolerances[k]));
        }
        bounded(s);
        all_ok = all_ok && s.ok;
        res.deformations.push_back(s);
      }
    for (std::size_t b = 0; b < m.boxes.size(); ++b) {
      SeriesCheck s;
      s.name = "surface integral on " + describe(m.boxes[b]);
      fill(s, [&](const Run& r, std::size_t k) {
        return surface_integral(gamma, state(r, k), m.boxes[b], funs, params);
      });
      bounded(s);
      all_ok = all_ok && s.ok;
      res.surfaces.push_back(s);
    }
  }

  if (!m.balance.empty()) {
    for (std::size_t c = 0; c < m.curves.size(); ++c) {
      SeriesCheck s;
      s.name = "d/dt of the rate integral minus the flux integral on " + describe(m.curves[c]);
      fill(s, [&](const Run& r, std::size_t k) {
        const double t = r.traj.u[k].t;
        const double dr = lagrange_derivative(r.step_t, r.rate[c], nearest(r.step_t, t));
        QuadratureResult f = line_integral(flux_a, flux_b, state(r, k), m.curves[c], funs, params);
        f.value = dr - f.value;
        f.magnitude += std::abs(dr);
        return f;
      });
      bounded(s);
      all_ok = all_ok && s.ok;
      res.balances.push_back(s);
    }
  }

  auto arr = [](const std::vector<SeriesCheck>& v) {
    ojson a = ojson::array();
    for (const auto& s : v) a.push_back(series_json(s));
    return a;
  };
  rep["charges"] = arr(res.charges);
  rep["deformations"] = arr(res.deformations);
  rep["balances"] = arr(res.balances);
  rep["surfaces"] = arr(res.surfaces);

  if (dim == 1) {
    try {
      source_sink_flux(entry);
      res.source_sink = extract_source_sink(entry, fine.traj, params);
      rep["source_sink"] = source_sink_json(*res.source_sink);
      if (refine) {
        res.source_sink_coarse = extract_source_sink(entry, coarse.traj, params);
        rep["source_sink_coarse"] = source_sink_json(*res.source_sink_coarse);
      }
    } catch (const std::invalid_argument&) {
    }
  }

  ojson cons = ojson::array();
  const DomainMode mode = m.domain == "decay" ? DomainMode::Decay : DomainMode::Periodic;
  for (const auto& id : entry.identities) {
    ojson cj;
    cj["identity"] = id.id;
    try {
      DivergenceIdentity di{id.scale * id.T, id.Psi, id.R};
      ConstraintCheck cc = check_constraint(di, fine0, mode, funs, params);
      cj["value"] = cc.value;
      cj["tolerance"] = cc.tolerance;
      cj["satisfied"] = cc.satisfied;
      cj["verdict"] = cc.verdict;
    } catch (const std::exception& e) {
      cj["error"] = e.what();
    }
    cons.push_back(cj);
  }
  rep["constraints"] = cons;

  res.exit_code = all_ok ? 0 : 1;
  rep["verdict"] = all_ok ? "ok" : "check failed";
  rep["exit_code"] = res.exit_code;
  res.report = rep;
  return res;
}

std::string render_report(const SimulationResult& r) { return r.report.dump(2) + "\n"; }

}  // namespace topo
