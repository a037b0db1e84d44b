// Recursive-descent parser for the jet expression grammar:
//
//   expr    := [+|-] term { (+|-) term }
//   term    := power { (*|/) power }
//   power   := primary [ ^ [-] integer ]
//   primary := number | ( expr ) | name [ _ letters ] { ' }
//
// Division and negative powers are accepted only when the divisor is a
// constant or a single parameter monomial, so results stay polynomial in jets.

#include <cctype>

#include "topo/jet_expr.hpp"

namespace topo {

ParseError::ParseError(Kind k, std::size_t off, const std::string& what)
    : std::runtime_error(what + " (at byte " + std::to_string(off) + ")"), kind(k), offset(off) {}

namespace {

class Parser {
 public:
  Parser(std::string_view src, const ParseContext& ctx) : src_(src), ctx_(ctx) {}

  JetExpr parse() {
    JetExpr e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, ParseError::Kind k = ParseError::Kind::Syntax) const {
    throw ParseError(k, pos_, msg);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  JetExpr expr() {
    JetExpr acc;
    bool neg = false;
    if (accept('-')) {
      neg = true;
    } else {
      accept('+');
    }
    JetExpr t = term();
    acc = neg ? -t : t;
    for (;;) {
      if (accept('+')) {
        acc += term();
      } else if (accept('-')) {
        acc -= term();
      } else {
        break;
      }
    }
    return acc;
  }

  static bool invertible(const JetExpr& d) {
    return d.size() == 1 && d.terms().begin()->first.params_only();
  }

  static JetExpr inverse(const JetExpr& d) {
    const auto& [m, c] = *d.terms().begin();
    Monomial inv;
    for (const auto& f : m.factors) inv.factors.push_back({f.sym, -f.power});
    return JetExpr::term(1 / Rational(c), inv);
  }

  JetExpr term() {
    JetExpr acc = power();
    for (;;) {
      if (accept('*')) {
        acc *= power();
      } else if (peek() == '/') {
        std::size_t at = pos_;
        ++pos_;
        JetExpr d = power();
        if (!invertible(d)) {
          pos_ = at;
          fail("division only by a constant or parameter monomial", ParseError::Kind::NonPolynomial);
        }
        acc *= inverse(d);
      } else {
        break;
      }
    }
    return acc;
  }

  JetExpr power() {
    JetExpr base = primary();
    if (accept('^')) {
      bool neg = accept('-');
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent");
      int k = std::stoi(std::string(src_.substr(start, pos_ - start)));
      if (neg) {
        if (!invertible(base)) fail("negative power of a non-parameter", ParseError::Kind::NonPolynomial);
        return inverse(base).pow(k);
      }
      return base.pow(k);
    }
    return base;
  }

  JetExpr number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    std::string whole(src_.substr(start, pos_ - start));
    Rational value(whole);
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      std::size_t fs = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      std::string frac(src_.substr(fs, pos_ - fs));
      if (!frac.empty()) {
        mpz_class den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        value += Rational(mpz_class(frac), den);
        value.canonicalize();
      }
    }
    return JetExpr(value);
  }

  JetExpr primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      JetExpr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return name();
    fail("unexpected character");
  }

  JetExpr name() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    std::string id(src_.substr(start, pos_ - start));
    std::string sub;
    std::size_t sub_at = pos_;
    if (pos_ < src_.size() && src_[pos_] == '_') {
      ++pos_;
      std::size_t s = pos_;
      while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      sub = std::string(src_.substr(s, pos_ - s));
      if (sub.empty()) fail("empty subscript");
      for (char l : sub) {
        if (l != 't' && l != 'x' && l != 'y' && l != 'z') {
          pos_ = sub_at;
          fail("subscript letters must be t, x, y or z");
        }
      }
    }
    int primes = 0;
    while (pos_ < src_.size() && src_[pos_] == '\'') {
      ++pos_;
      ++primes;
    }
    MultiIndex d = multi_index_from_letters(sub);
    d[kTime] = static_cast<std::uint8_t>(d[kTime] + primes);
    for (int a = ctx_.slots(); a < kSlots; ++a) {
      if (d[a] != 0) {
        pos_ = start;
        fail("axis " + std::string(1, axis_letter(a)) + " not available in dimension " +
                 std::to_string(ctx_.dim),
             ParseError::Kind::UnknownSymbol);
      }
    }

    auto& reg = SymbolRegistry::instance();
    if (id.size() == 1 && (id == "t" || id == "x" || id == "y" || id == "z")) {
      int axis = static_cast<int>(std::string_view("txyz").find(id[0]));
      if (axis >= ctx_.slots()) {
        pos_ = start;
        fail("variable " + id + " not available in dimension " + std::to_string(ctx_.dim),
             ParseError::Kind::UnknownSymbol);
      }
      if (!sub.empty() || primes) {
        pos_ = start;
        fail("independent variables take no subscript");
      }
      return JetExpr::symbol(Symbol::indep(axis));
    }
    for (const auto& f : ctx_.fields) {
      if (f == id) {
        if (primes) {
          pos_ = start;
          fail("primes apply to arbitrary functions only");
        }
        return JetExpr::symbol(Symbol::jet(reg.field(id), d));
      }
    }
    if (auto it = ctx_.functions.find(id); it != ctx_.functions.end()) {
      unsigned sig = it->second;
      for (int a = 0; a < kSlots; ++a) {
        if (d[a] != 0 && !(sig & (1u << a))) {
          pos_ = start;
          fail("derivative of " + id + " with respect to " + std::string(1, axis_letter(a)) +
                   " is outside its signature",
               ParseError::Kind::OutsideSignature);
        }
      }
      return JetExpr::symbol(Symbol::fun(reg.function(id, sig), d));
    }
    for (const auto& p : ctx_.params) {
      if (p == id) {
        if (!sub.empty() || primes) {
          pos_ = start;
          fail("parameters take no subscript");
        }
        return JetExpr::symbol(Symbol::param(reg.param(id)));
      }
    }
    pos_ = start;
    fail("unknown symbol '" + id + "'", ParseError::Kind::UnknownSymbol);
  }

  std::string_view src_;
  const ParseContext& ctx_;
  std::size_t pos_ = 0;
};

}  // namespace

JetExpr parse_expr(std::string_view source, const ParseContext& ctx) { return Parser(source, ctx).parse(); }

JetExpr parse_expr(std::string_view source, int dim) {
  ParseContext ctx;
  ctx.dim = dim;
  return parse_expr(source, ctx);
}

}  // namespace topo
