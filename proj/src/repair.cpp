#include "topo/repair.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace topo {

std::string kind_name(RepairEdit::Kind k) {
  switch (k) {
    case RepairEdit::Kind::GapFill: return "gap-fill";
    case RepairEdit::Kind::OperatorRun: return "operator-run";
    case RepairEdit::Kind::SignFlip: return "sign-flip";
    case RepairEdit::Kind::Paren: return "parenthesis";
    case RepairEdit::Kind::GroupReplace: return "group-replace";
    case RepairEdit::Kind::TermReplace: return "term-replace";
    case RepairEdit::Kind::TermMove: return "term-move";
    case RepairEdit::Kind::VariableSwap: return "variable-swap";
    case RepairEdit::Kind::Negate: return "negate";
    case RepairEdit::Kind::Manual: return "manual";
    case RepairEdit::Kind::Custom: return "custom";
  }
  return "custom";
}

namespace {

bool is_op(char c) { return c == '+' || c == '-'; }

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\n");
  return s.substr(a, b - a + 1);
}

// Position of the previous non-space character, or npos.
std::size_t prev_nonspace(const std::string& s, std::size_t i) {
  while (i > 0) {
    --i;
    if (s[i] != ' ') return i;
  }
  return std::string::npos;
}

std::size_t next_nonspace(const std::string& s, std::size_t i) {
  while (i < s.size() && s[i] == ' ') ++i;
  return i;
}

// An additive term: [begin, end) of its text, and the position of its sign
// character (npos for an unsigned leading term).
struct TermSpan {
  std::size_t sign;
  std::size_t begin;
  std::size_t end;
};

// A '+'/'-' at i is a binary or leading sign of an additive term when the
// previous non-space character is absent, '(' or an operand end.
bool additive_sign(const std::string& s, std::size_t i) {
  std::size_t p = prev_nonspace(s, i);
  if (p == std::string::npos) return true;
  char c = s[p];
  return c != '*' && c != '/' && c != '^' && !is_op(c);
}

std::vector<TermSpan> terms_in(const std::string& s, std::size_t lo, std::size_t hi) {
  std::vector<TermSpan> out;
  int depth = 0;
  std::size_t start = next_nonspace(s, lo);
  std::size_t sign = std::string::npos;
  if (start < hi && is_op(s[start])) {
    sign = start;
    start = next_nonspace(s, start + 1);
  }
  for (std::size_t i = start; i < hi; ++i) {
    char c = s[i];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth == 0 && is_op(c) && i > start && additive_sign(s, i)) {
      out.push_back({sign, start, i});
      sign = i;
      start = next_nonspace(s, i + 1);
      i = start - 1;
    }
  }
  if (start < hi) out.push_back({sign, start, hi});
  return out;
}

// Every parenthesized region (content range) plus the whole string.
std::vector<std::pair<std::size_t, std::size_t>> regions(const std::string& s) {
  std::vector<std::pair<std::size_t, std::size_t>> out{{0, s.size()}};
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') stack.push_back(i);
    if (s[i] == ')' && !stack.empty()) {
      out.emplace_back(stack.back() + 1, i);
      stack.pop_back();
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> paren_groups(const std::string& s) {
  auto r = regions(s);
  r.erase(r.begin());
  return r;
}

std::string excerpt(const std::string& s, std::size_t a, std::size_t b) {
  std::string t = trim(s.substr(a, b - a));
  if (t.size() > 40) t = t.substr(0, 37) + "...";
  return t;
}

void push(std::vector<RepairCandidate>& out, const std::vector<std::string>& base, std::size_t comp, std::string s,
          RepairEdit::Kind kind, std::string what) {
  RepairCandidate c;
  c.components = base;
  c.components[comp] = std::move(s);
  c.edits.push_back({kind, static_cast<int>(comp), std::move(what)});
  out.push_back(std::move(c));
}

}  // namespace

bool has_gap(const std::string& s) {
  if (s.find('?') != std::string::npos) return true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_op(s[i])) continue;
    std::size_t n = next_nonspace(s, i + 1);
    if (n < s.size() && is_op(s[n])) return true;
  }
  return false;
}

std::vector<RepairCandidate> single_edits(const std::vector<std::string>& comps) {
  std::vector<RepairCandidate> out;
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    const std::string& s = comps[ci];
    // Gaps.
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '?') continue;
      for (char op : {'+', '-', '*'}) {
        std::string t = s;
        t[i] = op;
        push(out, comps, ci, t, RepairEdit::Kind::GapFill,
             std::string("missing operator filled with '") + op + "' before '" + excerpt(s, i + 1, s.size()) + "'");
      }
    }
    // Operator runs such as "+-".
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!is_op(s[i])) continue;
      std::size_t n = next_nonspace(s, i + 1);
      if (n >= s.size() || !is_op(s[n])) continue;
      for (bool keep_first : {true, false}) {
        std::string t = s;
        t.erase(keep_first ? n : i, 1);
        push(out, comps, ci, t, RepairEdit::Kind::OperatorRun,
             std::string("operator run '") + s[i] + s[n] + "' read as '" + (keep_first ? s[i] : s[n]) + "'");
      }
    }
    if (has_gap(s)) continue;  // the remaining edits need a parseable base
    // Sign flips.
    std::set<std::string> seen;
    for (auto [lo, hi] : regions(s)) {
      for (const auto& t : terms_in(s, lo, hi)) {
        std::string r = s;
        std::string what = "sign of term '" + excerpt(s, t.begin, t.end) + "' flipped";
        if (t.sign == std::string::npos) {
          r.insert(t.begin, "-");
        } else if (s[t.sign] == '+') {
          r[t.sign] = '-';
        } else if (prev_nonspace(s, t.sign) == std::string::npos || s[prev_nonspace(s, t.sign)] == '(') {
          r.erase(t.sign, 1);
        } else {
          r[t.sign] = '+';
        }
        if (seen.insert(r).second) push(out, comps, ci, r, RepairEdit::Kind::SignFlip, what);
      }
    }
    // Parentheses: delete one, or close/open at the ends.
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '(' && s[i] != ')') continue;
      std::string r = s;
      r.erase(i, 1);
      if (seen.insert(r).second)
        push(out, comps, ci, r, RepairEdit::Kind::Paren,
             std::string("stray '") + s[i] + "' removed near '" + excerpt(s, i > 10 ? i - 10 : 0, std::min(s.size(), i + 10)) + "'");
    }
    // Standalone spatial variables.
    auto ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; };
    for (std::size_t i = 0; i < s.size(); ++i) {
      char v = s[i];
      if (v != 'x' && v != 'y' && v != 'z') continue;
      if ((i > 0 && ident(s[i - 1])) || (i + 1 < s.size() && ident(s[i + 1]))) continue;
      for (char w : {'x', 'y', 'z'}) {
        if (w == v) continue;
        std::string r = s;
        r[i] = w;
        if (seen.insert(r).second)
          push(out, comps, ci, r, RepairEdit::Kind::VariableSwap,
               std::string("variable ") + v + " read as " + w + " in '" +
                   excerpt(s, i > 12 ? i - 12 : 0, std::min(s.size(), i + 12)) + "'");
      }
    }
    if (seen.insert(s + ")").second) push(out, comps, ci, s + ")", RepairEdit::Kind::Paren, "closing ')' appended");
    if (seen.insert("(" + s).second) push(out, comps, ci, "(" + s, RepairEdit::Kind::Paren, "opening '(' prepended");
  }
  return out;
}

std::vector<RepairCandidate> term_moves(const std::vector<std::string>& comps,
                                        const std::function<JetExpr(const std::string&)>& parse) {
  std::vector<RepairCandidate> out;
  if (comps.size() < 2) return out;
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    const std::string& s = comps[ci];
    if (has_gap(s)) continue;
    JetExpr whole;
    try {
      whole = parse(s);
    } catch (const std::exception&) {
      continue;
    }
    std::set<std::string> seen;
    for (auto [lo, hi] : regions(s)) {
      auto ts = terms_in(s, lo, hi);
      if (ts.size() < 2) continue;
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const auto& t = ts[k];
        std::size_t a = t.sign == std::string::npos ? t.begin : t.sign;
        std::size_t b = t.end;
        std::string r = s;
        r.erase(a, b - a);
        if (k == 0) {
          // The following term loses its binary '+'.
          std::size_t n = next_nonspace(r, a);
          if (n < r.size() && r[n] == '+') r.erase(n, 1);
        }
        if (!seen.insert(r).second) continue;
        JetExpr moved;
        try {
          moved = whole - parse(r);
        } catch (const std::exception&) {
          continue;
        }
        if (moved.is_zero()) continue;
        for (std::size_t cj = 0; cj < comps.size(); ++cj) {
          if (cj == ci) continue;
          RepairCandidate c;
          c.components = comps;
          c.components[ci] = r;
          c.components[cj] = "(" + comps[cj] + ") + (" + to_string(moved) + ")";
          c.edits.push_back({RepairEdit::Kind::TermMove, static_cast<int>(ci),
                             "term '" + excerpt(s, t.begin, t.end) + "' moved from component " + std::to_string(ci) +
                                 " to component " + std::to_string(cj)});
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

std::optional<RepairCandidate> search_repair(const std::vector<std::string>& printed, const RepairCheck& check,
                                             const RepairOptions& opts) {
  auto passes = [&](const std::vector<std::string>& c) {
    try {
      return check(c);
    } catch (const std::exception&) {
      return false;
    }
  };
  RepairCandidate base{printed, {}};
  bool gap = std::any_of(printed.begin(), printed.end(), has_gap);
  if (!gap && passes(printed)) return base;

  auto expand = [&](const RepairCandidate& c) {
    std::vector<RepairCandidate> next;
    for (auto& e : single_edits(c.components)) {
      RepairCandidate n = c;
      n.components = std::move(e.components);
      n.edits.insert(n.edits.end(), e.edits.begin(), e.edits.end());
      next.push_back(std::move(n));
    }
    if (opts.parse) {
      for (auto& e : term_moves(c.components, opts.parse)) {
        RepairCandidate n = c;
        n.components = std::move(e.components);
        n.edits.insert(n.edits.end(), e.edits.begin(), e.edits.end());
        next.push_back(std::move(n));
      }
    }
    for (const auto& oe : opts.object_edits) {
      if (auto e = oe(c.components)) {
        RepairCandidate n = c;
        n.components = std::move(e->components);
        n.edits.insert(n.edits.end(), e->edits.begin(), e->edits.end());
        next.push_back(std::move(n));
      }
    }
    return next;
  };

  std::vector<RepairCandidate> frontier{base};
  std::set<std::vector<std::string>> seen{printed};
  for (int depth = 1; depth <= opts.max_edits; ++depth) {
    std::vector<RepairCandidate> next;
    for (const auto& c : frontier) {
      for (auto& n : expand(c)) {
        if (!seen.insert(n.components).second) continue;
        bool open = std::any_of(n.components.begin(), n.components.end(), has_gap);
        if (!open && passes(n.components)) return n;
        next.push_back(std::move(n));
      }
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

// Exact division of e by a single-term divisor; nullopt if some term fails.
std::optional<JetExpr> divide_exact(const JetExpr& e, const JetExpr& divisor) {
  if (divisor.size() != 1) return std::nullopt;
  const auto& [dm, dc] = *divisor.terms().begin();
  JetExpr out;
  for (const auto& [m, c] : e.terms()) {
    Monomial q = m;
    for (const auto& f : dm.factors) {
      if (f.sym.kind != SymbolKind::Param && q.power_of(f.sym) < f.power) return std::nullopt;
      q = q.without(f.sym, f.power);
    }
    out.add_term(c / dc, q);
  }
  return out;
}

}  // namespace

std::optional<RepairCandidate> search_repair_to_target(const std::vector<std::string>& printed,
                                                       const TargetRepairSpec& spec) {
  auto matches = [&](std::size_t i, const std::string& s) {
    if (has_gap(s)) return false;
    try {
      return spec.equal(i, spec.parse(s));
    } catch (const std::exception&) {
      return false;
    }
  };

  // Group and term replacements of component i of s.
  auto replacements = [&](std::size_t i, const std::string& s) {
    std::vector<std::pair<std::string, RepairEdit>> out;
    if (has_gap(s)) return out;
    JetExpr target;
    try {
      target = spec.target(i);
    } catch (const std::exception&) {
      return out;
    }
    auto try_span = [&](std::size_t a, std::size_t b, bool single_term, RepairEdit::Kind kind) {
      std::string inner = s.substr(a, b - a);
      try {
        JetExpr orig = spec.parse(inner);
        JetExpr rest = spec.parse(s.substr(0, a) + "(0)" + s.substr(b));
        JetExpr with_one = spec.parse(s.substr(0, a) + "(1)" + s.substr(b));
        JetExpr pref = with_one - rest;
        auto x = divide_exact(target - rest, pref);
        if (!x || x->is_zero() || *x == orig) return;
        if (single_term && x->size() != 1) return;
        if (!single_term && x->size() > orig.size() + 1) return;
        std::string r = s.substr(0, a) + "(" + to_string(*x) + ")" + s.substr(b);
        RepairEdit e{kind, static_cast<int>(i),
                     (single_term ? "term '" : "group '") + trim(inner) + "' replaced by '" + to_string(*x) + "'"};
        out.emplace_back(r, e);
      } catch (const std::exception&) {
      }
    };
    for (auto [a, b] : paren_groups(s))
      if (a > 1 || b + 1 < s.size()) try_span(a, b, false, RepairEdit::Kind::GroupReplace);
    for (auto [lo, hi] : regions(s))
      for (const auto& t : terms_in(s, lo, hi)) try_span(t.begin, t.end, true, RepairEdit::Kind::TermReplace);
    return out;
  };

  RepairCandidate result{printed, {}};
  for (std::size_t i = 0; i < printed.size(); ++i) {
    const std::string& s = printed[i];
    if (matches(i, s)) continue;
    // Breadth-first over this component only.
    std::vector<std::pair<std::string, std::vector<RepairEdit>>> frontier{{s, {}}};
    std::set<std::string> seen{s};
    bool found = false;
    for (int depth = 1; depth <= spec.max_edits_per_component && !found; ++depth) {
      std::vector<std::pair<std::string, std::vector<RepairEdit>>> next;
      for (const auto& [cur, edits] : frontier) {
        std::vector<std::pair<std::string, RepairEdit>> moves;
        for (auto& c : single_edits({cur})) {
          RepairEdit e = c.edits[0];
          e.component = static_cast<int>(i);
          moves.emplace_back(c.components[0], e);
        }
        for (auto& m : replacements(i, cur)) moves.push_back(std::move(m));
        for (auto& [str, e] : moves) {
          if (!seen.insert(str).second) continue;
          auto ed = edits;
          ed.push_back(e);
          if (matches(i, str)) {
            result.components[i] = str;
            result.edits.insert(result.edits.end(), ed.begin(), ed.end());
            found = true;
            break;
          }
          next.emplace_back(str, std::move(ed));
        }
        if (found) break;
      }
      frontier = std::move(next);
    }
    if (!found) return std::nullopt;
  }
  return result;
}

}  // namespace topo
