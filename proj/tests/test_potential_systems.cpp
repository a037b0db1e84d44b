#include <doctest.h>

#include "topo/potential_systems.hpp"

using namespace topo;

namespace {

ParseContext ctx(int dim) {
  ParseContext c;
  c.dim = dim;
  c.functions = {{"f", kSigTime}, {"chi", dim == 2 ? kSigTime : kSigAll}};
  return c;
}

JetExpr P(const char* s, int dim = 2) { return parse_expr(s, ctx(dim)); }

}  // namespace

TEST_CASE("2D system from KP flux") {
  auto ps = build_potential_system(Vec{P("u_t + u*u_x + u_xxx"), P("u_y")});
  REQUIRE(ps.equations.size() == 2);
  Vec w = potential_fields(2);
  CHECK(ps.equations[0].rhs == total_derivative(w[0], multi_index_from_letters("y")));
  CHECK(ps.equations[1].rhs == -total_derivative(w[0], multi_index_from_letters("x")));
  CHECK(div_of_curl_side(ps).is_zero());
  CHECK(cross_eliminate(ps) == P("u_tx + u_x^2 + u*u_xx + u_xxxx + u_yy"));
}

TEST_CASE("2D gauge") {
  auto ps = build_potential_system(Vec{P("u_t + u*u_x"), P("u_y")});
  CHECK(check_gauge_invariance(ps, {P("chi")}));
  CHECK_FALSE(check_gauge_invariance(ps, {P("x*chi")}));
  CHECK_FALSE(check_gauge_invariance(ps, {P("y")}));
  CHECK_THROWS_AS(check_gauge_invariance(ps, {P("u")}), SignatureMismatch);
  CHECK_THROWS_AS(check_gauge_invariance(ps, {P("chi"), P("chi")}), SignatureMismatch);
}

TEST_CASE("3D curl system and gauge") {
  auto ps = build_potential_system(Vec{P("u_t", 3), P("u_y", 3), P("u_z", 3)});
  CHECK(ps.equations.size() == 3);
  CHECK(div_of_curl_side(ps).is_zero());
  CHECK(cross_eliminate(ps) == P("u_tx + u_yy + u_zz", 3));
  Vec grad{P("chi_x", 3), P("chi_y", 3), P("chi_z", 3)};
  CHECK(check_gauge_invariance(ps, grad));
  CHECK_FALSE(check_gauge_invariance(ps, {P("chi", 3), P("0", 3), P("0", 3)}));
  CHECK_THROWS_AS(check_gauge_invariance(ps, {P("chi", 3)}), SignatureMismatch);
}

TEST_CASE("no curl in 1D") {
  CHECK_THROWS_AS(build_potential_system(Vec{P("u_t", 1)}), UnsupportedDimension);
  CHECK_THROWS_AS(potential_fields(4), UnsupportedDimension);
}
