#include <doctest.h>

#include "topo/jet_expr.hpp"
#include "topo/substitution.hpp"

using namespace topo;

namespace {
JetExpr P(const char* s, int dim = 1) { return parse_expr(s, dim); }
}  // namespace

TEST_CASE("parse canonical sums") {
  CHECK(P("u_t + u_x*u_xx + u_xxxx").size() == 3);
  CHECK(P("0").is_zero());
  CHECK(P("(1/2)*u_x^2 - (1/2)*u_x^2").is_zero());
  CHECK(P("u_xt") == P("u_tx"));
  CHECK(P("u_xxy", 2) == P("u_yxx", 2));
  CHECK(P("2*u - u*2") == JetExpr());
  CHECK(P("0.25*u") == P("u/4"));
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(P("u_t +"), ParseError);
  CHECK_THROWS_AS(P("u_y", 1), ParseError);
  CHECK_THROWS_AS(P("v_x"), ParseError);
  CHECK_THROWS_AS(P("f_x"), ParseError);
  CHECK_THROWS_AS(P("u/u_x"), ParseError);
  CHECK_THROWS_AS(P("2 u"), ParseError);
  try {
    P("u + $");
  } catch (const ParseError& e) {
    CHECK(e.offset == 4);
    CHECK(e.kind == ParseError::Kind::Syntax);
  }
  try {
    P("f_x");
  } catch (const ParseError& e) {
    CHECK(e.kind == ParseError::Kind::OutsideSignature);
  }
}

TEST_CASE("printing round trips") {
  ParseContext ctx;
  ctx.dim = 2;
  ctx.params = {"sigma", "alpha"};
  for (const char* s : {"u_t + u_x*u_xx + u_xxxx", "-(1/2)*sigma*y^2*u_ty + x*f'' - 3", "u_x/alpha + alpha^2*f'''*u",
                        "t^3*u_xy^2"}) {
    JetExpr e = parse_expr(s, ctx);
    CHECK(parse_expr(to_string(e), ctx) == e);
  }
}

TEST_CASE("total derivative examples") {
  CHECK(total_derivative(P("u*u_x"), 1) == P("u_x^2 + u*u_xx"));
  CHECK(total_derivative(P("(1/2)*u^2 + u_xx"), 1) == P("u*u_x + u_xxx"));
  CHECK(total_derivative(P("f*u_x"), 0) == P("f'*u_x + f*u_tx"));
  CHECK(total_derivative(P("x^2*u + t"), 1) == P("2*x*u + x^2*u_x"));
  CHECK(total_derivative(P("x*f"), 1) == P("f"));
  CHECK(total_derivative(P("7"), 0).is_zero());
}

TEST_CASE("arbitrary function of y and z") {
  ParseContext ctx;
  ctx.dim = 3;
  ctx.functions["phi"] = 0b1100;
  CHECK(total_derivative(parse_expr("phi*u", ctx), 1) == parse_expr("phi*u_x", ctx));
  CHECK(total_derivative(parse_expr("phi*u", ctx), 2) == parse_expr("phi_y*u + phi*u_y", ctx));
  CHECK(total_derivative(parse_expr("phi", ctx), 0).is_zero());
  CHECK_THROWS_AS(parse_expr("phi_x", ctx), ParseError);
}

TEST_CASE("substitution on solutions") {
  Substituter kdv(u_jet("tx"), P("-u_x*u_xx - u_xxxx"));
  CHECK(kdv.apply(P("u_tx")) == P("-u_x*u_xx - u_xxxx"));
  CHECK(kdv.apply(P("u_x^2")) == P("u_x^2"));
  CHECK(kdv.apply(P("u_txx")) == total_derivative(P("-u_x*u_xx - u_xxxx"), 1));
  JetExpr e = P("u_ttx*u + u_txx^2 + u_t");
  JetExpr once = kdv.apply(e);
  CHECK(kdv.is_reduced(once));
  CHECK(kdv.apply(once) == once);
  CHECK_THROWS(Substituter(u_jet("tx"), P("u_txx")));
}

TEST_CASE("ledger reproduces the substitution") {
  Substituter kdv(u_jet("tx"), P("-u_x*u_xx - u_xxxx"));
  JetExpr G = P("u_tx + u_x*u_xx + u_xxxx");
  JetExpr e = P("x*u_ttx*u + u_txx^2 + u_t*u_tx");
  SubstitutionLedger ledger;
  JetExpr r = kdv.apply(e, ledger);
  CHECK(r == kdv.apply(e));
  CHECK(e - r - ledger.expand(G) == JetExpr());
}

TEST_CASE("side relations") {
  ParseContext ctx;
  ctx.dim = 2;
  ctx.params = {"sigma"};
  SideRelations rel;
  rel.add_square(*SymbolRegistry::instance().find_param("sigma"), 1);
  CHECK(rel.reduce(parse_expr("sigma^2*u - u", ctx)).is_zero());
  CHECK(rel.reduce(parse_expr("sigma^3", ctx)) == parse_expr("sigma", ctx));
  CHECK(rel.reduce(parse_expr("1/sigma", ctx)) == parse_expr("sigma", ctx));
}

TEST_CASE("evaluation") {
  SymbolValues v{{u_jet("x"), 3.0}};
  CHECK(eval_at(P("u_x^2"), v) == doctest::Approx(9));
  JetExpr e = P("f'*u_x");
  std::uint8_t f = SymbolRegistry::instance().function("f", kSigTime);
  SymbolValues w{{u_jet("x"), 2.0}, {Symbol::fun(f, multi_index_from_letters("t")), 5.0}};
  CHECK(eval_at(e, w) == doctest::Approx(10));
  CHECK_THROWS_AS(eval_at(e, v), MissingBinding);
}
