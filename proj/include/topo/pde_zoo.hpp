/// @file pde_zoo.hpp
/// @brief Catalog of example PDEs with their multipliers, currents,
/// identities, charges and potential systems, verified at load time.
///
/// Entries live in JSON files (one per PDE) in the catalog directory. Every
/// printed object is kept verbatim; when a printed object fails verification
/// the minimal-edit repair search is run and its result must agree with the
/// repair recorded in the file.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "topo/conservation.hpp"
#include "topo/potential_systems.hpp"
#include "topo/repair.hpp"

namespace topo {

class CatalogCorrupt : public std::runtime_error {
 public:
  CatalogCorrupt(const std::string& object, const std::string& what, std::string residual = "")
      : std::runtime_error(object + ": " + what + (residual.empty() ? "" : " (residual " + residual + ")")),
        object(object),
        residual(std::move(residual)) {}
  std::string object;
  std::string residual;
};

class ConstraintViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownEntry : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// "p = value", "p^2 = value" or "p != 0".
struct Condition {
  enum class Kind { Equal, Square, NonZero };
  Kind kind = Kind::Equal;
  std::string param;
  std::string value;
  std::string text() const;
};
Condition parse_condition(const std::string& s);

struct RepairRecord {
  std::vector<std::string> printed;
  std::vector<std::string> corrected;
  std::vector<RepairEdit> edits;
  std::string note;
  /// False when found by the search but absent from the catalog file.
  bool recorded = false;
};

struct Status {
  std::string kind;  // multiplier, current, identity, charge, potential_system
  std::string id;
  bool ok = false;
  std::string detail;
  std::optional<RepairRecord> repair;
};

struct MultiplierItem {
  std::string id, label, case_name, printed;
  JetExpr Q;
  std::optional<RepairRecord> repair;
};

struct CurrentItem {
  std::string id, label, multiplier, case_name;
  std::vector<std::string> printed;  // T then Phi components; Phi empty when omitted in print
  bool reconstructed = false;
  int min_N = 0;
  JetExpr T;
  Vec Phi;
  std::optional<RepairRecord> repair;
  CurrentFamily family;
  FluxVector flux;
  TheoremChecks checks;
  std::vector<DivergenceIdentity> identities;
  /// Characteristic = characteristic_factor * multiplier on solutions; the
  /// defect is what remains.
  JetExpr characteristic_factor{1};
  JetExpr characteristic_defect;
};

struct IdentityItem {
  std::string id, label, current, case_name, note;
  int index = 0;
  JetExpr scale{1};
  JetExpr T;
  Vec Psi;
  std::map<MultiIndex, JetExpr> R;
  std::optional<RepairRecord> repair;
  /// scale*T = kappa*T_i of the computed family.
  JetExpr kappa;
  bool matches_computed = false;
};

struct ChargeItem {
  std::string id, label, current, case_name, kind;
  std::vector<std::string> printed;
  /// Printed flux in the Gamma layout of the computed flux, and the sign s
  /// with Gamma_printed = s*Gamma modulo a curl on solutions.
  Vec Gamma;
  int sign = 1;
  std::optional<Vec> curl_potentials;
  std::optional<RepairRecord> repair;
};

struct PotentialSystemItem {
  std::string id, label, current, case_name;
  std::vector<std::pair<std::string, std::string>> printed;
  PotentialSystem built;
  /// Printed equation i equals factors[i] times built equation i.
  std::vector<JetExpr> factors;
  bool div_curl_zero = false;
  bool cross_elimination_zero = false;
  bool gauge_invariant = false;
  bool non_gauge_rejected = false;
  std::optional<RepairRecord> repair;
};

struct ParamValue {
  std::string name;
  bool squared = false;  // binding of p^2 rather than p
  std::string value;
};
using ParamBindings = std::vector<ParamValue>;
/// Parses "alpha^2=2,beta=0" style lists.
ParamBindings parse_param_bindings(const std::string& s);

struct CatalogEntry {
  std::string name, title, alternatives;
  int dim = 1;
  std::vector<std::string> params;
  std::vector<Condition> constraints;
  std::map<std::string, std::vector<Condition>> cases;
  std::map<std::string, std::string> defaults;
  /// Arbitrary functions given in product form, e.g. F = f*phi.
  std::map<std::string, std::string> separated;
  ParamBindings bindings;
  std::vector<std::string> active_cases;  // always starts with "generic"
  PdeSpec pde;
  std::vector<MultiplierItem> multipliers;
  std::vector<CurrentItem> currents;
  std::vector<IdentityItem> identities;
  std::vector<ChargeItem> charges;
  std::vector<PotentialSystemItem> potential_systems;
  std::vector<Status> statuses;
  /// Instantiations for each named case (filled by load_catalog).
  std::vector<CatalogEntry> case_variants;

  const CurrentItem& current(const std::string& id) const;
  const MultiplierItem& multiplier(const std::string& id) const;
  const ChargeItem& charge(const std::string& id) const;
  const IdentityItem& identity(const std::string& id) const;
  const PotentialSystemItem& potential_system(const std::string& id) const;
  /// Parses an expression in this entry's context with its bindings applied.
  JetExpr parse(const std::string& s) const;
  std::vector<RepairRecord> repairs() const;
};

struct LoadOptions {
  std::string directory;  // empty: the built-in catalog directory
  /// Throw CatalogCorrupt on failures and on repairs missing from the file.
  bool strict = true;
};

std::string default_catalog_directory();
std::vector<std::string> catalog_names(const LoadOptions& opts = {});

/// One entry with the given parameter bindings; only objects whose case holds
/// under the bindings are included. Throws ConstraintViolation, UnknownEntry
/// or (strict) CatalogCorrupt.
CatalogEntry instantiate(const std::string& name, const ParamBindings& params = {}, const LoadOptions& opts = {});

/// Every entry, each with its case variants instantiated and verified.
std::vector<CatalogEntry> load_catalog(const LoadOptions& opts = {});

/// Binding list for a named case of an entry.
ParamBindings case_bindings(const std::string& entry, const std::string& case_name, const LoadOptions& opts = {});

}  // namespace topo
