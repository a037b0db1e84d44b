#include <doctest.h>

#include "topo/repair.hpp"

using namespace topo;

namespace {

ParseContext ctx2() {
  ParseContext c;
  c.dim = 2;
  return c;
}

RepairCheck equals(std::vector<std::string> target) {
  return [target](const std::vector<std::string>& comps) {
    if (comps.size() != target.size()) return false;
    for (std::size_t i = 0; i < comps.size(); ++i)
      if (!(parse_expr(comps[i], ctx2()) == parse_expr(target[i], ctx2()))) return false;
    return true;
  };
}

}  // namespace

TEST_CASE("kind names") {
  CHECK(kind_name(RepairEdit::Kind::GapFill) == "gap-fill");
  CHECK(kind_name(RepairEdit::Kind::TermMove) == "term-move");
  CHECK(kind_name(RepairEdit::Kind::VariableSwap) == "variable-swap");
}

TEST_CASE("printed form passes without edits") {
  auto r = search_repair({"u_x + u_y"}, equals({"u_y + u_x"}));
  REQUIRE(r);
  CHECK(r->edits.empty());
}

TEST_CASE("gap fill") {
  CHECK(has_gap("u_x ? u_xx"));
  CHECK_FALSE(has_gap("u_x - u_xx"));
  auto r = search_repair({"u_x ? u_xx"}, equals({"u_x - u_xx"}));
  REQUIRE(r);
  REQUIRE(r->edits.size() == 1);
  CHECK(r->edits[0].kind == RepairEdit::Kind::GapFill);
}

TEST_CASE("sign flip and parenthesis") {
  auto r = search_repair({"u_x + y*(u_y + u)"}, equals({"u_x + y*(u_y - u)"}));
  REQUIRE(r);
  CHECK(r->edits.size() == 1);
  CHECK(r->edits[0].kind == RepairEdit::Kind::SignFlip);
  auto p = search_repair({"y*(u_y + u"}, equals({"y*(u_y + u)"}));
  REQUIRE(p);
  CHECK(p->edits[0].kind == RepairEdit::Kind::Paren);
}

TEST_CASE("variable swap") {
  auto r = search_repair({"x*u_y + u"}, equals({"y*u_y + u"}));
  REQUIRE(r);
  REQUIRE(r->edits.size() == 1);
  CHECK(r->edits[0].kind == RepairEdit::Kind::VariableSwap);
}

TEST_CASE("term move between components") {
  RepairOptions opts;
  opts.max_edits = 1;
  opts.parse = [](const std::string& s) { return parse_expr(s, ctx2()); };
  auto r = search_repair({"u_x + x*(u + u_y)", "u"}, equals({"u_x + x*u", "u + x*u_y"}), opts);
  REQUIRE(r);
  REQUIRE(r->edits.size() == 1);
  CHECK(r->edits[0].kind == RepairEdit::Kind::TermMove);
}

TEST_CASE("budget exhausted") {
  RepairOptions opts;
  opts.max_edits = 1;
  CHECK_FALSE(search_repair({"u_x + u_y + u"}, equals({"u_x - u_y - u"}), opts));
}

TEST_CASE("group replacement against a target") {
  TargetRepairSpec spec;
  spec.parse = [](const std::string& s) { return parse_expr(s, ctx2()); };
  spec.target = [](std::size_t) { return parse_expr("y*(u_t + u*u_x + u_xxx)", ctx2()); };
  spec.equal = [](std::size_t, const JetExpr& e) { return e == parse_expr("y*(u_t + u*u_x + u_xxx)", ctx2()); };
  auto r = search_repair_to_target({"y*(u_t + u_x + u_xxx)"}, spec);
  REQUIRE(r);
  REQUIRE(r->edits.size() == 1);
  CHECK((r->edits[0].kind == RepairEdit::Kind::GroupReplace || r->edits[0].kind == RepairEdit::Kind::TermReplace));
  CHECK(spec.equal(0, spec.parse(r->components[0])));
}
