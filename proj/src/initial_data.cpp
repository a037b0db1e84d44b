#include "topo/initial_data.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>

namespace topo {

namespace {

using Fn = std::function<double(const std::vector<double>&)>;

class Parser {
 public:
  Parser(const std::string& s, int dim) : s_(s), dim_(dim) {}

  Fn parse() {
    Fn f = expr();
    skip();
    if (pos_ != s_.size()) throw InitialDataError(pos_, "unexpected '" + std::string(1, s_[pos_]) + "'");
    return f;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Fn expr() {
    Fn f = term();
    for (;;) {
      if (eat('+')) {
        Fn g = term();
        f = [f, g](const std::vector<double>& x) { return f(x) + g(x); };
      } else if (eat('-')) {
        Fn g = term();
        f = [f, g](const std::vector<double>& x) { return f(x) - g(x); };
      } else {
        return f;
      }
    }
  }

  Fn term() {
    Fn f = unary();
    for (;;) {
      if (eat('*')) {
        Fn g = unary();
        f = [f, g](const std::vector<double>& x) { return f(x) * g(x); };
      } else if (eat('/')) {
        Fn g = unary();
        f = [f, g](const std::vector<double>& x) { return f(x) / g(x); };
      } else {
        return f;
      }
    }
  }

  Fn unary() {
    if (eat('-')) {
      Fn f = unary();
      return [f](const std::vector<double>& x) { return -f(x); };
    }
    if (eat('+')) return unary();
    return power();
  }

  Fn power() {
    Fn f = primary();
    if (eat('^')) {
      Fn g = unary();
      return [f, g](const std::vector<double>& x) { return std::pow(f(x), g(x)); };
    }
    return f;
  }

  Fn primary() {
    skip();
    if (pos_ >= s_.size()) throw InitialDataError(pos_, "unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Fn f = expr();
      if (!eat(')')) throw InitialDataError(pos_, "missing ')'");
      return f;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      return [v](const std::vector<double>&) { return v; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::string id = s_.substr(start, pos_ - start);
      if (id == "pi") return [](const std::vector<double>&) { return std::numbers::pi; };
      static const std::string axes = "xyz";
      if (id.size() == 1 && axes.find(id[0]) != std::string::npos) {
        int a = static_cast<int>(axes.find(id[0]));
        if (a >= dim_) throw InitialDataError(start, "coordinate " + id + " beyond dimension " + std::to_string(dim_));
        return [a](const std::vector<double>& x) { return x[a]; };
      }
      static const std::map<std::string, double (*)(double)> funs{
          {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
          {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
          {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
          {"sinh", [](double v) { return std::sinh(v); }}, {"cosh", [](double v) { return std::cosh(v); }},
          {"tanh", [](double v) { return std::tanh(v); }}, {"sech", [](double v) { return 1 / std::cosh(v); }},
          {"abs", [](double v) { return std::abs(v); }}};
      auto it = funs.find(id);
      if (it == funs.end()) throw InitialDataError(start, "unknown name '" + id + "'");
      if (!eat('(')) throw InitialDataError(pos_, "expected '(' after " + id);
      Fn arg = expr();
      if (!eat(')')) throw InitialDataError(pos_, "missing ')'");
      auto fp = it->second;
      return [fp, arg](const std::vector<double>& x) { return fp(arg(x)); };
    }
    throw InitialDataError(pos_, "unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace

SpatialFunction parse_initial_data(const std::string& src, int dim) { return Parser(src, dim).parse(); }

}  // namespace topo
