#include <doctest.h>

#include "topo/conservation.hpp"

using namespace topo;

namespace {

PdeSpec kdv() {
  PdeSpec p;
  p.name = "kdv";
  p.dim = 1;
  p.ctx.dim = 1;
  p.G = p.parse("u_tx + u_x*u_xx + u_xxxx");
  p.leading = u_jet("tx");
  p.rhs = p.parse("-u_x*u_xx - u_xxxx");
  p.finalize();
  return p;
}

PdeSpec kp() {
  PdeSpec p;
  p.name = "kp";
  p.dim = 2;
  p.ctx.dim = 2;
  p.ctx.params = {"sigma"};
  p.relations.add_square(SymbolRegistry::instance().param("sigma"), 1);
  p.G = p.parse("u_tx + u_x^2 + u*u_xx + u_xxxx + sigma*u_yy");
  p.leading = u_jet("tx");
  p.rhs = p.parse("-u_x^2 - u*u_xx - u_xxxx - sigma*u_yy");
  p.finalize();
  return p;
}

Vec parse_vec(const PdeSpec& p, std::initializer_list<const char*> parts) {
  Vec v;
  for (const char* s : parts) v.push_back(p.parse(s));
  return v;
}

}  // namespace

TEST_CASE("multipliers") {
  auto k = kdv();
  CHECK_NOTHROW(verify_multiplier(k, k.parse("f")));
  CHECK_THROWS_AS(verify_multiplier(k, k.parse("u")), NotAMultiplier);
  try {
    verify_multiplier(k, k.parse("u"));
  } catch (const NotAMultiplier& e) {
    CHECK_FALSE(e.residual.is_zero());
  }
  auto p = kp();
  CHECK_NOTHROW(verify_multiplier(p, p.parse("x*f - 1/2*sigma*y^2*f_t")));
  CHECK_NOTHROW(verify_multiplier(p, p.parse("x*y*f - 1/6*sigma*y^3*f_t")));
  CHECK_NOTHROW(verify_multiplier(p, p.parse("y*f")));
  CHECK_THROWS_AS(verify_multiplier(p, p.parse("x*f")), NotAMultiplier);
}

TEST_CASE("currents") {
  auto k = kdv();
  auto v = verify_current(k, k.parse("0"), parse_vec(k, {"(u_t + 1/2*u_x^2 + u_xxx)*f"}));
  CHECK(v.ok);
  auto bad = verify_current(k, k.parse("u"), parse_vec(k, {"0"}));
  CHECK_FALSE(bad.ok);
  CHECK(bad.residual == k.parse("u_t"));
  auto p = kp();
  CHECK(verify_current(p, 0, parse_vec(p, {"f*(u_t + u*u_x + u_xxx)", "f*sigma*u_y"})).ok);
  CHECK(verify_current(p, 0, parse_vec(p, {"f*y*(u_t + u*u_x + u_xxx)", "f*sigma*(y*u_y - u)"})).ok);
  CHECK_THROWS_AS(verify_current(p, 0, parse_vec(p, {"0"})), std::invalid_argument);
}

TEST_CASE("kp third current: split, potentials, flux and identity") {
  auto p = kp();
  JetExpr T = p.parse("f*u");
  Vec Phi = parse_vec(p, {"f*(1/2*u^2 + u_xx - x*(u_t + u*u_x + u_xxx)) + f_t*1/2*sigma*y^2*(u_t + u*u_x + u_xxx)",
                          "-f*sigma*x*u_y + f_t*(-y*u + 1/2*y^2*u_y)"});
  REQUIRE(verify_current(p, T, Phi).ok);
  auto cur = split_by_arbitrary_function(p, T, Phi);
  CHECK(cur.N == 0);
  CHECK(cur.T[0] == p.parse("u"));
  auto psi = trivializing_potentials(cur);
  REQUIRE(psi.size() == 1);
  CHECK(psi[0][0] == -cur.Phi[1][0]);
  CHECK(psi[0][1] == -cur.Phi[1][1]);
  CHECK(theorem_checks(p, cur).all_zero());

  auto id = divergence_identity(p, cur, 0);
  CHECK(id.defect(p).is_zero());
  CHECK(p.reduce(id.R_expr(p) - p.parse("1/2*sigma*y^2") * p.G).is_zero());

  auto fv = reduce_to_spatial_flux(p, cur);
  CHECK(fv.certificate.kind == Nontriviality::Kind::UpToOrder);
  CHECK(fv.certificate.order >= 4);
  // Corrected printed flux: the grouped run is D_t(u_t + u*u_x + u_xxx).
  Vec printed = parse_vec(p, {"1/2*u^2 + u_xx - x*(u_t + u*u_x + u_xxx) - 1/2*sigma*y^2*(u_tt + u_t*u_x + u*u_tx + u_txxx)",
                              "y*u_t - sigma*x*u_y - 1/2*y^2*u_ty"});
  CHECK(equal_modulo_curl(p, fv.Gamma, printed).has_value());

  auto larger = split_by_arbitrary_function(p, T, Phi, 1);
  CHECK(larger.N == 1);
  CHECK(theorem_checks(p, larger).all_zero());
}

TEST_CASE("split errors") {
  auto p = kp();
  p.ctx.functions["g"] = kSigTime;
  CHECK_THROWS_AS(split_by_arbitrary_function(p, p.parse("f^2*u"), parse_vec(p, {"0", "0"})), NonlinearInArbFun);
  CHECK_THROWS_AS(split_by_arbitrary_function(p, p.parse("f*u + g*u"), parse_vec(p, {"0", "0"})), MixedArbFuns);
  CHECK_THROWS_AS(split_by_arbitrary_function(p, p.parse("f*u"), parse_vec(p, {"0", "0"})), NotConserved);
  auto none = split_by_arbitrary_function(p, 0, parse_vec(p, {"u_t + u*u_x + u_xxx", "sigma*u_y"}));
  CHECK(none.N == 0);
  CHECK_FALSE(none.fun.has_value());
  auto fv = reduce_to_spatial_flux(p, none);
  CHECK(fv.Gamma[0] == p.parse("u_t + u*u_x + u_xxx"));
}
