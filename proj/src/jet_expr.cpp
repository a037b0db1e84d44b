#include "topo/jet_expr.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <set>
#include <sstream>

namespace topo {

// ---------------------------------------------------------------------------
// Multi-indices
// ---------------------------------------------------------------------------

int order(const MultiIndex& m) {
  int s = 0;
  for (auto v : m) s += v;
  return s;
}

int spatial_order(const MultiIndex& m) { return order(m) - m[kTime]; }

MultiIndex bumped(MultiIndex m, int axis, int by) {
  m[axis] = static_cast<std::uint8_t>(m[axis] + by);
  return m;
}

bool divides(const MultiIndex& a, const MultiIndex& b) {
  for (int i = 0; i < kSlots; ++i)
    if (a[i] > b[i]) return false;
  return true;
}

MultiIndex difference(const MultiIndex& b, const MultiIndex& a) {
  MultiIndex r{};
  for (int i = 0; i < kSlots; ++i) r[i] = static_cast<std::uint8_t>(b[i] - a[i]);
  return r;
}

char axis_letter(int axis) { return "txyz"[axis]; }

MultiIndex multi_index_from_letters(std::string_view letters) {
  MultiIndex m{};
  for (char c : letters) {
    switch (c) {
      case 't': ++m[0]; break;
      case 'x': ++m[1]; break;
      case 'y': ++m[2]; break;
      case 'z': ++m[3]; break;
      default: throw std::invalid_argument(std::string("not an axis letter: ") + c);
    }
  }
  return m;
}

std::string letters_of(const MultiIndex& m) {
  std::string s;
  for (int a = 0; a < kSlots; ++a) s.append(m[a], axis_letter(a));
  return s;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct SymbolRegistry::Impl {
  mutable std::mutex mu;
  std::vector<std::string> fields;
  std::vector<std::pair<std::string, unsigned>> functions;
  std::vector<std::string> params;
};

SymbolRegistry::SymbolRegistry() : impl_(new Impl) {
  for (const char* f : {"u", "w", "wx", "wy", "wz"}) field(f);
  function("f", kSigTime);
  function("g", kSigTime);
  function("chi", kSigTime);
  function("phi", 0b1100);
  function("chi", kSigAll);
  for (const char* p : {"alpha", "beta", "gamma", "sigma", "mu"}) param(p);
}

SymbolRegistry& SymbolRegistry::instance() {
  static SymbolRegistry reg;
  return reg;
}

namespace {
template <class Vec, class Key>
std::uint8_t intern(Vec& v, const Key& key) {
  auto it = std::find(v.begin(), v.end(), key);
  if (it != v.end()) return static_cast<std::uint8_t>(it - v.begin());
  if (v.size() >= 255) throw std::length_error("symbol registry full");
  v.push_back(key);
  return static_cast<std::uint8_t>(v.size() - 1);
}
}  // namespace

std::uint8_t SymbolRegistry::field(std::string_view name) {
  std::lock_guard lk(impl_->mu);
  return intern(impl_->fields, std::string(name));
}

std::uint8_t SymbolRegistry::function(std::string_view name, unsigned signature) {
  std::lock_guard lk(impl_->mu);
  return intern(impl_->functions, std::make_pair(std::string(name), signature));
}

std::uint8_t SymbolRegistry::param(std::string_view name) {
  std::lock_guard lk(impl_->mu);
  return intern(impl_->params, std::string(name));
}

std::string SymbolRegistry::field_name(std::uint8_t id) const {
  std::lock_guard lk(impl_->mu);
  return impl_->fields.at(id);
}

std::string SymbolRegistry::function_name(std::uint8_t id) const {
  std::lock_guard lk(impl_->mu);
  return impl_->functions.at(id).first;
}

unsigned SymbolRegistry::function_signature(std::uint8_t id) const {
  std::lock_guard lk(impl_->mu);
  return impl_->functions.at(id).second;
}

std::string SymbolRegistry::param_name(std::uint8_t id) const {
  std::lock_guard lk(impl_->mu);
  return impl_->params.at(id);
}

std::optional<std::uint8_t> SymbolRegistry::find_field(std::string_view name) const {
  std::lock_guard lk(impl_->mu);
  auto it = std::find(impl_->fields.begin(), impl_->fields.end(), name);
  if (it == impl_->fields.end()) return std::nullopt;
  return static_cast<std::uint8_t>(it - impl_->fields.begin());
}

std::optional<std::uint8_t> SymbolRegistry::find_param(std::string_view name) const {
  std::lock_guard lk(impl_->mu);
  auto it = std::find(impl_->params.begin(), impl_->params.end(), name);
  if (it == impl_->params.end()) return std::nullopt;
  return static_cast<std::uint8_t>(it - impl_->params.begin());
}

std::uint8_t field_u() {
  static const std::uint8_t id = SymbolRegistry::instance().field("u");
  return id;
}

Symbol u_jet(const MultiIndex& d) { return Symbol::jet(field_u(), d); }
Symbol u_jet(std::string_view letters) { return u_jet(multi_index_from_letters(letters)); }

std::string to_string(const Symbol& s) {
  auto& reg = SymbolRegistry::instance();
  switch (s.kind) {
    case SymbolKind::Param: return reg.param_name(s.id);
    case SymbolKind::Indep: return std::string(1, axis_letter(s.id));
    case SymbolKind::Jet: {
      std::string n = reg.field_name(s.id);
      if (order(s.deriv) > 0) n += "_" + letters_of(s.deriv);
      return n;
    }
    case SymbolKind::ArbFun: {
      std::string n = reg.function_name(s.id);
      if (reg.function_signature(s.id) == kSigTime) {
        n.append(s.deriv[kTime], '\'');
      } else if (order(s.deriv) > 0) {
        n += "_" + letters_of(s.deriv);
      }
      return n;
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

int Monomial::power_of(const Symbol& s) const {
  for (const auto& f : factors)
    if (f.sym == s) return f.power;
  return 0;
}

int Monomial::jet_degree() const {
  int d = 0;
  for (const auto& f : factors)
    if (f.sym.kind == SymbolKind::Jet) d += f.power;
  return d;
}

int Monomial::max_jet_order() const {
  int o = -1;
  for (const auto& f : factors)
    if (f.sym.kind == SymbolKind::Jet) o = std::max(o, order(f.sym.deriv));
  return o;
}

bool Monomial::params_only() const {
  return std::all_of(factors.begin(), factors.end(),
                     [](const Factor& f) { return f.sym.kind == SymbolKind::Param; });
}

Monomial Monomial::times(const Monomial& other) const {
  Monomial r;
  r.factors.reserve(factors.size() + other.factors.size());
  auto a = factors.begin(), ae = factors.end();
  auto b = other.factors.begin(), be = other.factors.end();
  while (a != ae || b != be) {
    if (b == be || (a != ae && a->sym < b->sym)) {
      r.factors.push_back(*a++);
    } else if (a == ae || b->sym < a->sym) {
      r.factors.push_back(*b++);
    } else {
      int p = a->power + b->power;
      if (p != 0) r.factors.push_back({a->sym, p});
      ++a;
      ++b;
    }
  }
  return r;
}

Monomial Monomial::times(const Symbol& s, int power) const {
  Monomial single;
  single.factors.push_back({s, power});
  return times(single);
}

Monomial Monomial::without(const Symbol& s, int by) const { return times(s, -by); }

// ---------------------------------------------------------------------------
// JetExpr
// ---------------------------------------------------------------------------

JetExpr::JetExpr(const Rational& c) {
  if (c != 0) terms_.emplace(Monomial{}, c);
}

JetExpr JetExpr::symbol(const Symbol& s, int power) {
  JetExpr e;
  Monomial m;
  if (power != 0) m.factors.push_back({s, power});
  e.terms_.emplace(std::move(m), Rational(1));
  return e;
}

JetExpr JetExpr::term(const Rational& c, Monomial m) {
  JetExpr e;
  if (c != 0) e.terms_.emplace(std::move(m), c);
  return e;
}

Rational JetExpr::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? Rational(0) : it->second;
}

bool JetExpr::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
}

Rational JetExpr::constant_value() const { return coefficient(Monomial{}); }

void JetExpr::add_term(const Rational& c, const Monomial& m) {
  if (c == 0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

JetExpr& JetExpr::operator+=(const JetExpr& o) {
  for (const auto& [m, c] : o.terms_) add_term(c, m);
  return *this;
}

JetExpr& JetExpr::operator-=(const JetExpr& o) {
  for (const auto& [m, c] : o.terms_) add_term(-c, m);
  return *this;
}

JetExpr& JetExpr::operator*=(const Rational& c) {
  if (c == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& kv : terms_) kv.second *= c;
  return *this;
}

JetExpr operator*(const JetExpr& a, const JetExpr& b) {
  JetExpr r;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) r.add_term(ca * cb, ma.times(mb));
  return r;
}

JetExpr& JetExpr::operator*=(const JetExpr& o) {
  *this = *this * o;
  return *this;
}

JetExpr operator-(JetExpr a) {
  for (auto& kv : a.terms_) kv.second = -kv.second;
  return a;
}

JetExpr JetExpr::pow(int k) const {
  if (k < 0) throw std::invalid_argument("negative power of a jet expression");
  JetExpr r(1);
  JetExpr base = *this;
  while (k > 0) {
    if (k & 1) r *= base;
    k >>= 1;
    if (k) base = base * base;
  }
  return r;
}

int JetExpr::jet_degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.jet_degree());
  return d;
}

int JetExpr::max_jet_order() const {
  int o = -1;
  for (const auto& [m, c] : terms_) o = std::max(o, m.max_jet_order());
  return o;
}

int JetExpr::max_power_of_indep(int axis) const {
  int p = 0;
  for (const auto& [m, c] : terms_) p = std::max(p, m.power_of(Symbol::indep(axis)));
  return p;
}

bool JetExpr::contains(const std::function<bool(const Symbol&)>& pred) const {
  for (const auto& [m, c] : terms_)
    for (const auto& f : m.factors)
      if (pred(f.sym)) return true;
  return false;
}

std::vector<Symbol> JetExpr::symbols() const {
  std::set<Symbol> s;
  for (const auto& [m, c] : terms_)
    for (const auto& f : m.factors) s.insert(f.sym);
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {
std::string monomial_string(const Monomial& m) {
  std::string out;
  for (const auto& f : m.factors) {
    if (!out.empty()) out += "*";
    out += to_string(f.sym);
    if (f.power != 1) out += "^" + std::to_string(f.power);
  }
  return out;
}
}  // namespace

std::string to_string(const JetExpr& e) {
  if (e.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : e.terms()) {
    Rational a = abs(c);
    bool neg = c < 0;
    if (first) {
      if (neg) out += "-";
    } else {
      out += neg ? " - " : " + ";
    }
    first = false;
    if (m.empty()) {
      out += a.get_str();
    } else if (a == 1) {
      out += monomial_string(m);
    } else {
      out += a.get_str() + "*" + monomial_string(m);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Differentiation and substitution
// ---------------------------------------------------------------------------

namespace {
// D_axis of a single symbol: nullopt means zero, an empty-power factor means 1.
enum class DKind { Zero, One, Symbol };
DKind d_symbol(const Symbol& s, int axis, Symbol& out) {
  switch (s.kind) {
    case SymbolKind::Param: return DKind::Zero;
    case SymbolKind::Indep: return s.id == axis ? DKind::One : DKind::Zero;
    case SymbolKind::Jet:
      out = s;
      out.deriv = bumped(s.deriv, axis);
      return DKind::Symbol;
    case SymbolKind::ArbFun: {
      unsigned sig = SymbolRegistry::instance().function_signature(s.id);
      if (!(sig & (1u << axis))) return DKind::Zero;
      out = s;
      out.deriv = bumped(s.deriv, axis);
      return DKind::Symbol;
    }
  }
  return DKind::Zero;
}
}  // namespace

JetExpr total_derivative(const JetExpr& e, int axis) {
  JetExpr r;
  for (const auto& [m, c] : e.terms()) {
    for (const auto& f : m.factors) {
      Symbol ds;
      DKind k = d_symbol(f.sym, axis, ds);
      if (k == DKind::Zero) continue;
      Monomial rest = m.without(f.sym, 1);
      Rational coef = c * f.power;
      if (k == DKind::One) {
        r.add_term(coef, rest);
      } else {
        r.add_term(coef, rest.times(ds, 1));
      }
    }
  }
  return r;
}

JetExpr total_derivative(const JetExpr& e, const MultiIndex& k) {
  JetExpr r = e;
  for (int a = 0; a < kSlots; ++a)
    for (int i = 0; i < k[a]; ++i) r = total_derivative(r, a);
  return r;
}

JetExpr partial(const JetExpr& e, const Symbol& s) {
  JetExpr r;
  for (const auto& [m, c] : e.terms()) {
    int p = m.power_of(s);
    if (p == 0) continue;
    r.add_term(c * p, m.without(s, 1));
  }
  return r;
}

JetExpr substitute(const JetExpr& e, const std::function<std::optional<JetExpr>(const Symbol&)>& rule) {
  JetExpr r;
  for (const auto& [m, c] : e.terms()) {
    JetExpr prod(c);
    Monomial kept;
    for (const auto& f : m.factors) {
      auto rep = rule(f.sym);
      if (!rep) {
        kept = kept.times(f.sym, f.power);
        continue;
      }
      if (f.power > 0) {
        prod *= rep->pow(f.power);
      } else {
        if (rep->size() != 1)
          throw std::domain_error("cannot invert a multi-term replacement for " + to_string(f.sym));
        const auto& [rm, rc] = *rep->terms().begin();
        if (!rm.params_only())
          throw std::domain_error("negative power replacement must be a parameter monomial");
        Monomial inv;
        for (const auto& g : rm.factors) inv.factors.push_back({g.sym, -g.power});
        prod *= JetExpr::term(1 / Rational(rc), inv).pow(-f.power);
      }
    }
    r += prod * JetExpr::term(1, kept);
  }
  return r;
}

JetExpr coefficient_of(const JetExpr& e, const Symbol& s, int power) {
  JetExpr r;
  for (const auto& [m, c] : e.terms())
    if (m.power_of(s) == power) r.add_term(c, m.without(s, power));
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

MissingBinding::MissingBinding(const Symbol& s)
    : std::runtime_error("missing binding for " + to_string(s)), symbol(s) {}

double eval_at(const JetExpr& e, const std::function<std::optional<double>(const Symbol&)>& lookup) {
  double sum = 0.0;
  for (const auto& [m, c] : e.terms()) {
    double v = c.get_d();
    for (const auto& f : m.factors) {
      auto x = lookup(f.sym);
      if (!x) throw MissingBinding(f.sym);
      v *= std::pow(*x, f.power);
    }
    sum += v;
  }
  return sum;
}

double eval_at(const JetExpr& e, const SymbolValues& values) {
  return eval_at(e, [&](const Symbol& s) -> std::optional<double> {
    auto it = values.find(s);
    if (it == values.end()) return std::nullopt;
    return it->second;
  });
}

}  // namespace topo
