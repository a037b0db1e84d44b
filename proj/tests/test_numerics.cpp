#include <doctest.h>

#include <cmath>
#include <numbers>

#include "topo/initial_data.hpp"
#include "topo/numerics.hpp"

using namespace topo;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

GridField field1(int n, double (*f)(double)) {
  return sample_field({n}, {kTwoPi}, [f](const std::vector<double>& x) { return f(x[0]); });
}

GridField field2(int n, const std::string& src) {
  return sample_field({n, n}, {kTwoPi, kTwoPi}, parse_initial_data(src, 2));
}

JetExpr P(const char* s, int dim = 1) {
  ParseContext c;
  c.dim = dim;
  return parse_expr(s, c);
}

double max_err(const std::vector<double>& a, const GridField& g, const std::function<double(double)>& f) {
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - f(i * g.spacing(0))));
  return e;
}

}  // namespace

TEST_CASE("grid validation") {
  GridField g({8}, {1.0});
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  GridField h({16, 16}, {1.0, 0.0});
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  GridField k({16}, {1.0});
  k.data.pop_back();
  CHECK_THROWS_AS(k.validate(), std::invalid_argument);
}

TEST_CASE("spectral evaluation") {
  auto u = field1(256, [](double x) { return std::sin(x); });
  CHECK(max_err(evaluate_on_grid(P("u_x"), u), u, [](double x) { return std::cos(x); }) <= 1e-10);
  CHECK(evaluate_on_grid(P("u"), u) == u.data);
  auto v = evaluate_on_grid(P("u*u_x + u_xxx"), u);
  CHECK(max_err(v, u, [](double x) { return std::sin(x) * std::cos(x) - std::cos(x); }) <= 1e-9);
  auto w = evaluate_on_grid(P("x*u"), u);
  CHECK(w[10] == doctest::Approx(10 * u.spacing(0) * u.data[10]));
}

TEST_CASE("evaluation errors") {
  auto u = field1(64, [](double x) { return std::sin(x); });
  CHECK_THROWS_AS(evaluate_on_grid(P("f*u"), u), UnboundArbFun);
  FunBindings fb{{"f", builtin_time_function("sin")}};
  u.t = 0.5;
  auto v = evaluate_on_grid(P("f_t*u"), u, fb);
  CHECK(v[5] == doctest::Approx(std::cos(0.5) * u.data[5]));
  CHECK_THROWS_AS(evaluate_on_grid(P("u_tt"), u), DerivativeOrderTooHigh);
  CHECK_THROWS_AS(evaluate_on_grid(P("u_t"), u), DerivativeOrderTooHigh);
  CHECK_THROWS_AS(evaluate_on_grid(P("u_xxxxxxx"), u), DerivativeOrderTooHigh);
  CHECK_THROWS_AS(builtin_time_function("cos"), UnboundArbFun);
}

TEST_CASE("initial data formulas") {
  auto f = parse_initial_data("0.5*sin(x)^2 - cos(2*y)/4 + pi", 2);
  CHECK(f({1.0, 2.0}) == doctest::Approx(0.5 * std::pow(std::sin(1.0), 2) - std::cos(4.0) / 4 + std::numbers::pi));
  CHECK(parse_initial_data("sech(x)^2", 1)({0.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(parse_initial_data("sin(y)", 1), InitialDataError);
  CHECK_THROWS_AS(parse_initial_data("foo(x)", 1), InitialDataError);
  CHECK_THROWS_AS(parse_initial_data("(x", 1), InitialDataError);
}

TEST_CASE("zero data stays zero") {
  auto e = instantiate("kdv_lagrangian");
  GridField u0({64}, {kTwoPi});
  EvolveOptions o;
  o.t_end = 0.01;
  o.dt = 1e-4;
  auto tr = evolve(e, u0, o);
  REQUIRE(tr.u.size() == 2);
  for (double v : tr.u.back().data) CHECK(v == 0.0);
  CHECK(tr.u.back().t == doctest::Approx(0.01));
}

TEST_CASE("kdv potential: traveling wave check against linear dispersion") {
  // Small amplitude: u_t ~ -u_xxx, so sin(x) moves as sin(x + t).
  auto e = instantiate("kdv_lagrangian");
  auto u0 = sample_field({64}, {kTwoPi}, [](const std::vector<double>& x) { return 1e-6 * std::sin(x[0]); });
  EvolveOptions o;
  o.t_end = 0.2;
  auto tr = evolve(e, u0, o);
  const auto& u = tr.u.back();
  double err = 0;
  for (std::size_t i = 0; i < u.size(); ++i)
    err = std::max(err, std::abs(u.data[i] - 1e-6 * std::sin(i * u.spacing(0) + 0.2)));
  CHECK(err < 1e-11);
  CHECK(tr.report.kernel_policy == "pin");
}

TEST_CASE("cfl") {
  auto e = instantiate("kdv_lagrangian");
  auto u0 = field1(64, [](double x) { return 0.1 * std::sin(x); });
  EvolveOptions o;
  o.t_end = 0.01;
  o.dt = 0.01;
  CHECK_THROWS_AS(evolve(e, u0, o), CflViolation);
}

TEST_CASE("kp: kernel content is rejected") {
  auto e = instantiate("kp");
  EvolveOptions o;
  o.t_end = 0.001;
  CHECK_THROWS_AS(evolve(e, field2(32, "0.1 + 0.1*sin(x)*sin(y)"), o), NonIntegrableSymbol);
  CHECK_THROWS_AS(evolve(e, field2(32, "0.1*sin(x)*sin(y) + 0.1*cos(y)"), o), NonIntegrableSymbol);
  auto tr = evolve(e, field2(32, "0.1*sin(x)*sin(y)"), o);
  CHECK(tr.report.steps > 0);
}

TEST_CASE("vorticity pins the mean") {
  auto e = instantiate("vorticity");
  EvolveOptions o;
  o.t_end = 0.01;
  auto tr = evolve(e, field2(32, "1 + sin(x)*cos(y)"), o);
  CHECK(tr.report.kernel_policy == "pin");
  CHECK(tr.report.initial_kernel == doctest::Approx(1.0));
  CHECK(tr.report.pinned_kernel == 0.0);
  // A single Fourier mode is a steady inviscid solution.
  for (std::size_t i = 0; i < tr.u.back().size(); ++i)
    CHECK(tr.u.back().data[i] == doctest::Approx(tr.u.front().data[i]).epsilon(1e-9));
}

TEST_CASE("loop integral of a curl field vanishes") {
  auto u = field2(256, "sin(x)*cos(y)");
  Vec gamma{P("u_y", 2), -P("u_x", 2)};
  FieldState fs{&u, nullptr};
  for (auto c : {CurveSpec::rectangle(0.3, 0.4, 2.9, 5.1), CurveSpec::rectangle(1.0, 1.0, 1.5, 4.0)}) {
    auto r = loop_integral(gamma, fs, c);
    CHECK(std::abs(r.value) <= 1e-8);
    CHECK(r.magnitude > 0.1);
  }
  CurveSpec open{{{0.5, 0.5}, {1.0, 0.5}, {1.0, 1.0}, {0.5, 1.0}}};
  CHECK_THROWS_AS(loop_integral(gamma, fs, open), CurveNotClosed);
  CHECK(CurveSpec::rectangle(0, 0, 1, 1).orientation() == 1);
}

TEST_CASE("line integral of u dy against the exact value") {
  auto u = field2(256, "sin(x)*cos(y)");
  FieldState fs{&u, nullptr};
  // Around [a,b]x[c,d]: integral of u dy = (sin b - sin a)(sin d - sin c).
  double a = 0.5, b = 2.0, c = 1.0, d = 3.0;
  auto r = line_integral(JetExpr(0), P("u", 2), fs, CurveSpec::rectangle(a, c, b, d));
  CHECK(r.value == doctest::Approx((std::sin(b) - std::sin(a)) * (std::sin(d) - std::sin(c))).epsilon(1e-8));
}

TEST_CASE("surface integral of a curl vanishes") {
  Vec curl{P("u_xy - u_zz", 3), P("u_yz - u_xx", 3), P("u_xz - u_yy", 3)};
  BoxSpec box{{0.4, 0.7, 1.1}, {3.0, 4.2, 5.0}};
  auto coarse = sample_field({32, 32, 32}, {kTwoPi, kTwoPi, kTwoPi}, parse_initial_data("sin(x)*cos(y)*sin(z)", 3));
  auto u = sample_field({64, 64, 64}, {kTwoPi, kTwoPi, kTwoPi}, parse_initial_data("sin(x)*cos(y)*sin(z)", 3));
  FieldState fs{&u, nullptr};
  double rc = surface_integral(curl, FieldState{&coarse, nullptr}, box).value;
  auto r = surface_integral(curl, fs, box);
  CHECK(std::abs(r.value) <= 1e-6);
  CHECK(std::abs(r.value) < std::abs(rc) / 4);
  // Outward flux of (u_x, 0, 0) equals the volume integral of u_xx.
  Vec g{P("u_x", 3), JetExpr(0), JetExpr(0)};
  auto s = surface_integral(g, fs, box);
  CHECK(std::abs(s.value) > 1e-3);
}

TEST_CASE("constraint integrals") {
  auto u = field2(64, "sin(x)*sin(y)");
  CHECK(check_constraint(P("u", 2), u, DomainMode::Periodic).satisfied);
  auto yu = check_constraint(P("y*u", 2), u, DomainMode::Periodic);
  CHECK(std::abs(yu.value) < 1e-12);
  CHECK(yu.satisfied);
  auto s = check_constraint(P("y*u", 2), field2(64, "sin(y)"), DomainMode::Periodic);
  CHECK(s.value == doctest::Approx(-4 * std::numbers::pi * std::numbers::pi).epsilon(1e-2));
  CHECK_FALSE(s.satisfied);
  CHECK(s.verdict == "violated");
  auto nv = check_constraint(P("u_xx*u_xy", 2), u, DomainMode::Periodic);
  CHECK(nv.satisfied);
  auto m = check_constraint(P("u", 2), field2(64, "0.2 + sin(x)"), DomainMode::Decay);
  CHECK(m.value == doctest::Approx(0.2 * kTwoPi * kTwoPi));
  CHECK_FALSE(m.satisfied);
}

TEST_CASE("source/sink extraction") {
  auto e = instantiate("kdv_lagrangian");
  CHECK(source_sink_flux(e) == P("-1/2*u_x^2 - u_xxx"));
  Trajectory z;
  for (int i = 0; i < 6; ++i) {
    GridField g({32}, {kTwoPi}, 0.1 * i);
    for (double& v : g.data) v = 3.0 * g.t;
    z.u.push_back(g);
  }
  auto r = extract_source_sink(e, z);
  REQUIRE(r.w.size() == 2);
  CHECK(r.w[0] == doctest::Approx(3.0));
  CHECK(r.max_deviation < 1e-12);
  CHECK_THROWS_AS(extract_source_sink(instantiate("kp"), z), std::invalid_argument);
}
