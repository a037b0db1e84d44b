/// @file variational.hpp
/// @brief Euler operators, divergence tests and divergence/curl inversion.
#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "topo/jet_expr.hpp"
#include "topo/linear_solve.hpp"

namespace topo {

/// E_u = sum over J of (-D)^J d/du_J, all slots including t.
JetExpr euler_u(const JetExpr& e, std::uint8_t field);
JetExpr euler_u(const JetExpr& e);

/// Spatial Euler operator with respect to the time-derivative field
/// d^a u / dt^a, built from spatial total derivatives only.
JetExpr spatial_euler(const JetExpr& e, std::uint8_t field, int time_order);
JetExpr spatial_euler(const JetExpr& e, int time_order = 0);

/// True iff every spatial Euler operator (each field, each time order)
/// annihilates e.
bool is_total_spatial_divergence(const JetExpr& e, int dim);

/// Largest pure-time order of any jet factor of `field` in e.
int max_time_order(const JetExpr& e, std::uint8_t field);

class AnsatzExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DivergenceWitness {
  enum class Role { Spatial, Spacetime };
  std::vector<JetExpr> components;
  Role role = Role::Spatial;
  JetExpr residual;
};

/// Spatial (or space-time) divergence of a vector of components; for the
/// space-time role entry 0 is the t-component.
JetExpr divergence(const std::vector<JetExpr>& components, bool spacetime = false);

struct AnsatzBounds {
  /// Maximal jet degree of a candidate monomial; -1 selects the jet degree of
  /// the target.
  int degree = -1;
  /// Maximal derivative order of a candidate jet factor; -1 selects the
  /// target's maximal order minus one (but at least 0).
  int order = -1;
  /// Powers of the independent variables may exceed the target's by this.
  int extra_indep_power = 1;
};

/// First-order linear differential operator acting on a list of unknowns:
/// equation e gets sum of sign * D_axis X_unknown over its entries.
struct FirstOrderEntry {
  std::size_t unknown;
  int axis;
  int sign;
};
using FirstOrderSystem = std::vector<std::vector<FirstOrderEntry>>;

/// Solves the system against `targets` over an anti-derivative closure
/// ansatz. `post` is applied to every image (for example a restriction to
/// solutions); it must be linear.
std::optional<std::vector<JetExpr>> solve_first_order(const FirstOrderSystem& system, std::size_t unknowns,
                                                      const std::vector<JetExpr>& targets, const AnsatzBounds& bounds,
                                                      const std::function<JetExpr(const JetExpr&)>& post = nullptr);

/// Finds X with Div X = e. `spacetime` adds a t-component in front.
DivergenceWitness invert_divergence(const JetExpr& e, int dim, AnsatzBounds bounds = {}, bool spacetime = false);
DivergenceWitness invert_divergence(const JetExpr& e, int dim, int degree_bound, int order_bound);

/// Curl potentials: in 2D a single w with (D_y w, -D_x w) = gamma; in 3D a
/// vector A with curl A = gamma. nullopt when the ansatz has no solution.
std::optional<std::vector<JetExpr>> invert_curl(const std::vector<JetExpr>& gamma, AnsatzBounds bounds = {},
                                                const std::function<JetExpr(const JetExpr&)>& post = nullptr);

/// Curl of potentials (2D: one potential, 3D: three).
std::vector<JetExpr> curl(const std::vector<JetExpr>& potentials);

}  // namespace topo
