/// @file conservation.hpp
/// @brief PDE specifications, multipliers, conserved currents with an
/// arbitrary function of time, reduction to spatial-flux form and
/// divergence-type identities.
#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "topo/jet_expr.hpp"
#include "topo/substitution.hpp"
#include "topo/variational.hpp"

namespace topo {

using Vec = std::vector<JetExpr>;

/// Spatial-divergence presentation  L u_t = sum_M D^M F_M, where the leading
/// time operator L = sum c_j D^{K_j} is a constant-coefficient spatial
/// operator. G = sign * (L u_t - sum_M D^M F_M).
struct DivForm {
  struct LeadTerm {
    Rational coeff;
    MultiIndex spatial;
  };
  struct RhsTerm {
    MultiIndex spatial;
    JetExpr F;
  };
  std::vector<LeadTerm> lead;
  std::vector<RhsTerm> rhs;
  int sign = 1;

  /// L u_t - sum D^M F_M.
  JetExpr residual() const;
  /// Flux vector u_t k - F for first-order forms (every M a unit vector and L
  /// first order); empty otherwise.
  Vec first_order_flux(int dim) const;
};

struct PdeSpec {
  std::string name;
  int dim = 1;
  ParseContext ctx;
  JetExpr G;
  Symbol leading;
  JetExpr rhs;
  /// G = lambda * (leading - rhs).
  Rational lambda = 1;
  std::optional<DivForm> div_form;
  SideRelations relations;
  std::shared_ptr<Substituter> solver;

  /// Checks G against the solved form (and the divergence form when given)
  /// and builds the substituter. Throws std::invalid_argument on mismatch.
  void finalize();

  JetExpr parse(std::string_view s) const { return parse_expr(s, ctx); }
  JetExpr reduce(const JetExpr& e) const { return relations.reduce(e); }
  bool is_zero(const JetExpr& e) const { return relations.is_zero(e); }

  /// Restriction to the solution space: leading-derivative substitution, then
  /// side relations.
  JetExpr on_solutions(const JetExpr& e) const;
  /// Same, recording D^K G multiples: e = result + sum c_K D^K G (exactly,
  /// before side relations are applied to the result).
  JetExpr on_solutions(const JetExpr& e, std::map<MultiIndex, JetExpr>& g_coefficients) const;
};

// ---------------------------------------------------------------------------

class NotAMultiplier : public std::runtime_error {
 public:
  NotAMultiplier(const std::string& what, JetExpr residual)
      : std::runtime_error(what), residual(std::move(residual)) {}
  JetExpr residual;
};

struct Multiplier {
  JetExpr Q;
};

/// Verifies E_u(Q G) = 0 coefficient by coefficient in the time-function
/// derivatives (after side relations).
Multiplier verify_multiplier(const PdeSpec& pde, const JetExpr& Q);
/// Euler residual of Q G after side relations (zero for a multiplier).
JetExpr multiplier_residual(const PdeSpec& pde, const JetExpr& Q);

struct CurrentVerdict {
  bool ok = false;
  JetExpr residual;
};

/// (D_t T + Div Phi) restricted to solutions.
CurrentVerdict verify_current(const PdeSpec& pde, const JetExpr& T, const Vec& Phi);

class NotConserved : public std::runtime_error {
 public:
  NotConserved(const std::string& what, JetExpr residual) : std::runtime_error(what), residual(std::move(residual)) {}
  JetExpr residual;
};

class NonlinearInArbFun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class MixedArbFuns : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurrentFamily {
  int N = 0;
  std::vector<JetExpr> T;  // T_0..T_N
  std::vector<Vec> Phi;    // Phi_0..Phi_{N+1}
  /// Interned time function; nullopt when the current had no time function.
  std::optional<std::uint8_t> fun;
};

/// Splits (T, Phi) by f, f', f'', ... for the single time-only arbitrary
/// function present, and checks the split relations on solutions.
/// `min_N` pads the family with zero coefficients.
CurrentFamily split_by_arbitrary_function(const PdeSpec& pde, const JetExpr& T, const Vec& Phi, int min_N = 0);

/// Split relations residuals: entry k is the coefficient of f^{(k)} in
/// D_t T + Div Phi restricted to solutions.
std::vector<JetExpr> split_residuals(const PdeSpec& pde, const CurrentFamily& cur);

/// Reassembles sum_i f^{(i)} X_i for the family's function (f when absent).
JetExpr assemble(const std::vector<JetExpr>& coeffs, std::uint8_t fun);
Vec assemble(const std::vector<Vec>& coeffs, std::uint8_t fun, int dim);

/// Psi_i = -sum_{j=0}^{N-i} (-D_t)^j Phi_{i+j+1}, i = 0..N.
std::vector<Vec> trivializing_potentials(const CurrentFamily& cur);

struct Nontriviality {
  enum class Kind { UtCertificate, SourceSink1D, UpToOrder, Trivial };
  Kind kind = Kind::UpToOrder;
  int order = 0;
  std::string describe() const;
};

struct FluxVector {
  Vec Gamma;
  Nontriviality certificate;
};

/// Gamma = sum_{j=0}^{N+1} (-D_t)^j Phi_j with Div Gamma|_E = 0 checked.
FluxVector reduce_to_spatial_flux(const PdeSpec& pde, const CurrentFamily& cur, int certificate_order = -1);

/// Non-triviality certificate of a spatial flux.
Nontriviality certify_nontrivial(const PdeSpec& pde, const Vec& Gamma, int order_bound = -1);

/// The proof identities of the spatial-flux reduction on one family.
struct TheoremChecks {
  std::vector<JetExpr> dens_triv;   // (T_i - Div Psi_i)|_E
  std::vector<Vec> telescoping;     // D_t Psi_i + Psi_{i-1} + Phi_i, i = 1..N
  Vec flux_triv;                    // (Phi + D_t Psi - f Gamma)|_E
  JetExpr div_gamma;                // Div Gamma|_E
  bool all_zero() const;
};
TheoremChecks theorem_checks(const PdeSpec& pde, const CurrentFamily& cur);

struct DivergenceIdentity {
  JetExpr T;
  Vec Psi;
  /// R(G) = sum_K coefficient_K * D^K G.
  std::map<MultiIndex, JetExpr> R;
  JetExpr R_expr(const PdeSpec& pde) const;
  /// T - Div Psi - R(G) after side relations; zero for a valid identity.
  JetExpr defect(const PdeSpec& pde) const;
};

DivergenceIdentity divergence_identity(const PdeSpec& pde, const CurrentFamily& cur, int i);

/// Equality of two flux vectors on solutions modulo a spatial curl. Returns
/// the curl potentials when found (empty vector when the difference is zero).
std::optional<Vec> equal_modulo_curl(const PdeSpec& pde, const Vec& a, const Vec& b, int order_bound = -1);

/// Pretty printing of vectors in the grammar.
std::string to_string(const Vec& v);

}  // namespace topo
