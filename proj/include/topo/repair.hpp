/// @file repair.hpp
/// @brief Minimal-edit search over printed expression strings.
///
/// A printed object is a list of component strings in the expression
/// grammar. It may contain gaps ('?') or doubled operators ("+-") where an
/// operator was lost in print. The search looks for the fewest text edits
/// after which a caller-supplied check passes.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topo/jet_expr.hpp"

namespace topo {

struct RepairEdit {
  enum class Kind { GapFill, OperatorRun, SignFlip, Paren, GroupReplace, TermReplace, TermMove, VariableSwap, Negate, Manual, Custom };
  Kind kind = Kind::Custom;
  int component = -1;  // -1 for whole-object edits
  std::string description;
};

std::string kind_name(RepairEdit::Kind k);

struct RepairCandidate {
  std::vector<std::string> components;
  std::vector<RepairEdit> edits;
};

/// Every single text edit of one component: gap fills, operator-run
/// resolutions, sign flips of any additive term at any depth, deletion or
/// insertion of a single parenthesis, and swapping one standalone spatial
/// variable for another.
std::vector<RepairCandidate> single_edits(const std::vector<std::string>& components);

/// True when the string needs at least one edit before it can be parsed
/// as printed (gaps or operator runs).
bool has_gap(const std::string& s);

using RepairCheck = std::function<bool(const std::vector<std::string>&)>;
using ObjectEdit = std::function<std::optional<RepairCandidate>(const std::vector<std::string>&)>;

struct RepairOptions {
  int max_edits = 2;
  /// Whole-object edits tried alongside the text edits (negating a vector,
  /// dropping a stray factor, ...).
  std::vector<ObjectEdit> object_edits;
  /// When set, also try moving one additive term (with its enclosing
  /// factors) from one component to another.
  std::function<JetExpr(const std::string&)> parse;
};

/// Term moves between components; needs a parser to carry the enclosing
/// factors along.
std::vector<RepairCandidate> term_moves(const std::vector<std::string>& components,
                                        const std::function<JetExpr(const std::string&)>& parse);

/// Breadth-first search: all 0-edit, then 1-edit, then 2-edit variants.
/// `check` may throw; a throwing candidate counts as failing.
std::optional<RepairCandidate> search_repair(const std::vector<std::string>& printed, const RepairCheck& check,
                                             const RepairOptions& opts = {});

/// Per-component search against known exact targets. Component i passes when
/// `equal(i, parse(component))`. Besides the text edits this tries replacing
/// one parenthesized group or one additive term by the unique expression that
/// makes the component match (exact monomial division by the group's
/// prefactor). At most `max_edits_per_component` edits per component.
struct TargetRepairSpec {
  std::function<JetExpr(const std::string&)> parse;
  std::function<JetExpr(std::size_t)> target;
  std::function<bool(std::size_t, const JetExpr&)> equal;
  int max_edits_per_component = 1;
};
std::optional<RepairCandidate> search_repair_to_target(const std::vector<std::string>& printed,
                                                       const TargetRepairSpec& spec);

}  // namespace topo
