#include <doctest.h>

#include "topo/variational.hpp"

using namespace topo;

namespace {
JetExpr P(const char* s, int dim = 1) { return parse_expr(s, dim); }
}  // namespace

TEST_CASE("euler operator") {
  CHECK(euler_u(P("u_x^2")) == P("-2*u_xx"));
  CHECK(euler_u(total_derivative(P("u*u_xx"), 1)).is_zero());
  CHECK(euler_u(P("f*(u_tx + u_x*u_xx + u_xxxx)")).is_zero());
  CHECK(euler_u(P("u^2/2")) == P("u"));
  CHECK(euler_u(P("u*u_t")).is_zero());
  CHECK(euler_u(P("u*u_tx")) == P("2*u_tx"));
}

TEST_CASE("spatial euler operator") {
  CHECK(spatial_euler(total_derivative(P("u_x^2"), 1)).is_zero());
  CHECK(spatial_euler(P("u_t"), 0).is_zero());
  CHECK(spatial_euler(P("u_t"), 1) == P("1"));
  CHECK(spatial_euler(P("u_x^2 + u_y^2 + u*u_yy", 2)) == P("-2*u_xx", 2));
}

TEST_CASE("total spatial divergence") {
  CHECK(is_total_spatial_divergence(P("u_x*u_xx"), 1));
  CHECK_FALSE(is_total_spatial_divergence(P("u_x^2"), 1));
  CHECK(is_total_spatial_divergence(P("u_t*u_tx + x*u_tx + u_t"), 1));
  CHECK_FALSE(is_total_spatial_divergence(P("u_t"), 1));
}

TEST_CASE("invert divergence") {
  auto w = invert_divergence(P("u_x*u_xx"), 1);
  CHECK(w.components[0] == P("u_x^2/2"));
  CHECK(w.residual.is_zero());
  w = invert_divergence(P("u*u_x + u_xxx"), 1);
  CHECK(w.components[0] == P("u^2/2 + u_xx"));
  ParseContext ctx;
  ctx.dim = 2;
  ctx.params = {"sigma"};
  JetExpr e = parse_expr("sigma*u_y", ctx);
  w = invert_divergence(e, 2);
  CHECK(divergence(w.components) == e);
  CHECK(w.components[1] == parse_expr("sigma*u", ctx));
  CHECK(w.components[0].is_zero());
  w = invert_divergence(P("u + x*u_x"), 1);
  CHECK(w.components[0] == P("x*u"));
  CHECK_THROWS_AS(invert_divergence(P("u_x^2"), 1), AnsatzExhausted);
}

TEST_CASE("curl inversion") {
  JetExpr w = P("u*u_x + y*u_t", 2);
  auto g = curl({w});
  auto back = invert_curl(g);
  REQUIRE(back);
  CHECK(curl(*back) == g);
  std::vector<JetExpr> A{P("u_y", 3), P("x*u", 3), P("u_z^2", 3)};
  auto g3 = curl(A);
  CHECK(divergence(g3).is_zero());
  auto b3 = invert_curl(g3);
  REQUIRE(b3);
  CHECK(curl(*b3) == g3);
  CHECK_FALSE(invert_curl({P("u", 2), JetExpr()}));
}
