#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "topo/property_sweep.hpp"
#include "topo/simulate.hpp"
#include "topo/variational.hpp"

using namespace topo;
using ojson = nlohmann::ordered_json;

namespace {

ojson kp_manifest(const std::string& u0) {
  ojson j;
  j["pde"] = "kp";
  j["params"] = "sigma=1";
  j["grid"] = {{"n", {32, 32}}, {"period", {"2*pi", "2*pi"}}};
  j["u0"] = u0;
  j["t_end"] = 0.1;
  j["sample_interval"] = 0.05;
  j["gamma"] = "current-1";
  j["balance"] = "charge-1";
  j["curves"] = {{{"rectangle", {1, 1, 5, 5}}}, {{"rectangle", {2, 2, 4, 4.5}}}};
  return j;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string file = std::string(TOPO_TEST_DIR) + "/cli_output.txt";
  int st = std::system((std::string(TOPO_CLI_PATH) + " " + args + " > " + file + " 2>&1").c_str());
  if (output) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("manifest parsing") {
  RunManifest m = RunManifest::from_json(kp_manifest("sin(x)*sin(y)"));
  CHECK(m.pde == "kp");
  CHECK(m.n == std::vector<int>{32, 32});
  CHECK(m.period[1] == doctest::Approx(2 * M_PI));
  CHECK(m.curves.size() == 2);
  CHECK(m.curves[0].orientation() == 1);
  ojson bad = kp_manifest("0");
  bad["colour"] = "red";
  CHECK_THROWS_AS(RunManifest::from_json(bad), ManifestError);
  ojson k = kp_manifest("0");
  k["kernel"] = "ignore";
  CHECK_THROWS_AS(RunManifest::from_json(k), ManifestError);
  ojson params = kp_manifest("0");
  params["params"] = {{"sigma", 1}};
  CHECK(RunManifest::from_json(params).params == "sigma=1");
  CHECK(catalog_version().size() == 16);
  CHECK(catalog_version() == catalog_version());
}

TEST_CASE("zero data gives an all-zero report") {
  SimulationResult r = run_simulation(RunManifest::from_json(kp_manifest("0")));
  CHECK(r.exit_code == 0);
  REQUIRE(r.times.size() == 3);
  for (double v : r.mass.values) CHECK(v == 0);
  REQUIRE(r.charges.size() == 2);
  for (const auto& c : r.charges)
    for (double v : c.values) CHECK(v == 0);
  REQUIRE(r.balances.size() == 2);
  for (const auto& b : r.balances)
    for (double v : b.values) CHECK(v == 0);
}

TEST_CASE("mean-zero KP data conserves the loop charge") {
  SimulationResult r = run_simulation(RunManifest::from_json(kp_manifest("0.2*sin(x)*cos(y) + 0.1*sin(2*x + y)")));
  CHECK(r.exit_code == 0);
  CHECK(r.mass_constrained);
  CHECK(r.mass.ok);
  for (const auto& c : r.charges) CHECK(c.ok);
  for (const auto& d : r.deformations) CHECK(d.ok);
  for (const auto& b : r.balances) CHECK(b.ok);
  CHECK(r.report["scope"].get<std::string>().find("periodic") != std::string::npos);
}

TEST_CASE("nonzero mean is a constraint violation") {
  SimulationResult r = run_simulation(RunManifest::from_json(kp_manifest("0.1 + sin(x)*sin(y)")));
  CHECK(r.exit_code == 3);
  CHECK(r.report.contains("constraint_violation"));
  CHECK(r.report["initial_mass"].get<double>() == doctest::Approx(0.1 * 4 * M_PI * M_PI));
}

TEST_CASE("fixed step above the stability limit") {
  ojson j = kp_manifest("0.2*sin(x)*cos(y)");
  j["dt"] = 0.05;
  SimulationResult r = run_simulation(RunManifest::from_json(j));
  CHECK(r.exit_code == 1);
  CHECK(r.report.contains("cfl_violation"));
}

TEST_CASE("input errors") {
  ojson j = kp_manifest("0");
  j["pde"] = "burgers";
  CHECK_THROWS_AS(run_simulation(RunManifest::from_json(j)), UnknownEntry);
  j = kp_manifest("0");
  j["grid"]["n"] = {32};
  CHECK_THROWS_AS(run_simulation(RunManifest::from_json(j)), ManifestError);
  j = kp_manifest("0");
  j["catalog_version"] = "0000000000000000";
  CHECK_THROWS_AS(run_simulation(RunManifest::from_json(j)), ManifestError);
  j = kp_manifest("sin(q)");
  CHECK_THROWS_AS(run_simulation(RunManifest::from_json(j)), ManifestError);
}

TEST_CASE("identical manifests give identical reports") {
  RunManifest m = RunManifest::from_json(kp_manifest("0.2*sin(x)*cos(y)"));
  m.seed = 7;
  CHECK(render_report(run_simulation(m)) == render_report(run_simulation(m)));
}

TEST_CASE("1D run reports the source/sink series") {
  ojson j;
  j["pde"] = "kdv_lagrangian";
  j["grid"] = {{"n", {64}}};
  j["u0"] = "0.1*sin(x)";
  j["t_end"] = 0.2;
  j["sample_interval"] = 0.05;
  SimulationResult r = run_simulation(RunManifest::from_json(j));
  CHECK(r.exit_code == 0);
  REQUIRE(r.source_sink.has_value());
  CHECK(r.source_sink->times.size() == 5);
  CHECK(r.source_sink_coarse.has_value());
  CHECK_FALSE(r.mass_constrained);
}

TEST_CASE("property sweep is reproducible") {
  SweepOptions o;
  o.count = 20;
  SweepReport a = property_sweep(o), b = property_sweep(o);
  CHECK(a.ok());
  CHECK(a.checked == b.checked);
  std::mt19937_64 r1(3), r2(3);
  CHECK(random_polynomial(r1, 2, 4, 3, 4) == random_polynomial(r2, 2, 4, 3, 4));
  std::mt19937_64 r3(11);
  for (int i = 0; i < 50; ++i) {
    JetExpr e = random_polynomial(r3, 2, 4, 3, 4);
    CHECK(e.max_jet_order() <= 4);
    CHECK(e.jet_degree() <= 3);
  }
}

TEST_CASE("euler operator detects non-divergences") {
  ParseContext cx;
  cx.dim = 2;
  CHECK_FALSE(euler_u(parse_expr("u*u_x + u_y^2", cx)).is_zero());
  CHECK(euler_u(divergence({parse_expr("u*u_y", cx), parse_expr("x*u^2", cx)})).is_zero());
}

TEST_CASE("cli exit codes") {
  std::string out;
  CHECK(run_cli("verify kp current-1", &out) == 0);
  CHECK(out.find("residual: 0") != std::string::npos);
  CHECK(run_cli("verify kdv_lagrangian multiplier-f") == 0);
  CHECK(run_cli("verify --pde kp --object \"(u,0)\"", &out) == 1);
  CHECK(out.find("residual: u_x") != std::string::npos);
  CHECK(run_cli("verify kp current-9") == 2);
  CHECK(run_cli("verify burgers current-1") == 2);
  CHECK(run_cli("verify kp current-1 --params sigma=2") == 2);
  CHECK(run_cli("potential kdv charge-1", &out) == 2);
  CHECK(out.find("dimension") != std::string::npos);
  CHECK(run_cli("potential kp charge-1", &out) == 0);
  CHECK(out.find("potsys-1") != std::string::npos);
  CHECK(run_cli("reduce kp current-3", &out) == 0);
  CHECK(out.find("catalog identity: identity-1") != std::string::npos);
  CHECK(run_cli("reduce kdv_lagrangian current-1", &out) == 0);
  CHECK(out.find("Gamma: (1/2*u_x^2 + u_xxx + u_t)") != std::string::npos);
  CHECK(run_cli("reduce kp \"(0, u_y, -u_x)\"", &out) == 0);
  CHECK(out.find("Gamma: (u_y, -u_x)") != std::string::npos);
  CHECK(run_cli("catalog list", &out) == 0);
  CHECK(out.find("vorticity") != std::string::npos);
  CHECK(run_cli("catalog show kp") == 0);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("simulate --manifest /nonexistent.json") == 2);
  const std::string obj = std::string(TOPO_TEST_DIR) + "/object.txt";
  std::ofstream(obj) << "(0, f*(u_t + u*u_x + u_xxx), f*sigma*u_y)\n";
  CHECK(run_cli("verify kp @" + obj) == 0);
}
