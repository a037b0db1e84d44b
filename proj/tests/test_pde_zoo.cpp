#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "topo/pde_zoo.hpp"

using namespace topo;

namespace {

bool has_multiplier(const CatalogEntry& e, const std::string& id) {
  for (const auto& m : e.multipliers)
    if (m.id == id) return true;
  return false;
}

bool all_ok(const CatalogEntry& e) {
  for (const auto& s : e.statuses)
    if (!s.ok) return false;
  return true;
}

}  // namespace

TEST_CASE("conditions and bindings") {
  auto c = parse_condition("sigma^2 = 1");
  CHECK(c.kind == Condition::Kind::Square);
  CHECK(c.param == "sigma");
  CHECK(parse_condition("alpha != 0").kind == Condition::Kind::NonZero);
  auto b = parse_param_bindings("alpha^2=2,beta=0");
  REQUIRE(b.size() == 2);
  CHECK(b[0].squared);
  CHECK(b[1].value == "0");
}

TEST_CASE("catalog names") {
  auto names = catalog_names();
  CHECK(names.size() == 6);
  CHECK(std::find(names.begin(), names.end(), "kp") != names.end());
}

TEST_CASE("kdv entry") {
  auto e = instantiate("kdv_lagrangian");
  CHECK(e.dim == 1);
  CHECK(e.multipliers.size() == 1);
  CHECK(e.currents.size() == 1);
  CHECK(all_ok(e));
}

TEST_CASE("kp entry") {
  auto e = instantiate("kp");
  CHECK(e.multipliers.size() == 4);
  CHECK(e.currents.size() == 4);
  CHECK(e.identities.size() == 2);
  CHECK(e.potential_systems.size() == 4);
  CHECK(all_ok(e));
  const auto& c1 = e.current("current-1");
  CHECK(c1.checks.all_zero());
  CHECK_FALSE(c1.repair);
  const auto& id1 = e.identity("identity-1");
  CHECK(id1.matches_computed);
  REQUIRE(id1.repair);
  CHECK(id1.repair->recorded);
  CHECK_THROWS_AS(e.current("current-9"), UnknownEntry);
}

TEST_CASE("kp constraint") {
  CHECK_THROWS_AS(instantiate("kp", parse_param_bindings("sigma=2")), ConstraintViolation);
  CHECK_NOTHROW(instantiate("kp", parse_param_bindings("sigma=-1")));
}

TEST_CASE("umkp cases") {
  auto generic = instantiate("umkp");
  CHECK_FALSE(has_multiplier(generic, "multiplier-2"));
  auto q2 = instantiate("umkp", case_bindings("umkp", "q2_case"));
  CHECK(has_multiplier(q2, "multiplier-2"));
  auto integ = instantiate("umkp", case_bindings("umkp", "integrable"));
  CHECK(has_multiplier(integ, "multiplier-3"));
  CHECK(has_multiplier(integ, "multiplier-4"));
  CHECK(all_ok(integ));
  auto degenerate = instantiate("umkp", parse_param_bindings("alpha=0,beta=0"));
  CHECK(all_ok(degenerate));
}

TEST_CASE("unknown entry") { CHECK_THROWS_AS(instantiate("burgers"), UnknownEntry); }

TEST_CASE("recorded repair mismatch is corrupt") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "topo_catalog_test";
  fs::create_directories(dir);
  nlohmann::json j;
  {
    std::ifstream in(default_catalog_directory() + "/kp.json");
    in >> j;
  }
  for (auto& id : j["identities"])
    if (id["id"] == "identity-1") id.erase("repair");
  {
    std::ofstream out(dir / "kp.json");
    out << j.dump(2);
  }
  LoadOptions opts;
  opts.directory = dir.string();
  CHECK_THROWS_AS(instantiate("kp", {}, opts), CatalogCorrupt);
  opts.strict = false;
  auto e = instantiate("kp", {}, opts);
  CHECK_FALSE(e.identity("identity-1").repair->recorded);
  fs::remove_all(dir);
}
