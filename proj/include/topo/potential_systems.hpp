/// @file potential_systems.hpp
/// @brief Spatial potential systems Gamma = curl(potentials) in 2D and 3D.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "topo/conservation.hpp"

namespace topo {

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SignatureMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GaugeRecord {
  int dim = 2;
  std::string description;
};

struct PotentialEquation {
  JetExpr lhs;  // flux component, a u-expression
  JetExpr rhs;  // curl component in the potentials
};

struct PotentialSystem {
  int dim = 2;
  std::vector<PotentialEquation> equations;
  /// Field ids: {w} in 2D, {wx, wy, wz} in 3D.
  std::vector<std::uint8_t> potentials;
  GaugeRecord gauge;
};

/// 2D: Gamma^x = w_y, Gamma^y = -w_x. 3D: Gamma = curl(w^x, w^y, w^z).
PotentialSystem build_potential_system(const Vec& gamma);
PotentialSystem build_potential_system(const FluxVector& gamma);

/// Potential symbols as jet expressions: w (2D) or w^x, w^y, w^z (3D).
Vec potential_fields(int dim);

/// True iff w -> w + shift leaves every equation unchanged. The shift is one
/// expression in 2D and a 3-vector in 3D; it may not involve u or the
/// potentials. Throws SignatureMismatch on a shape or content mismatch.
bool check_gauge_invariance(const PotentialSystem& ps, const Vec& shift);

/// Div of the curl sides, identically (no substitution).
JetExpr div_of_curl_side(const PotentialSystem& ps);

/// Cross-elimination: sum_a D_a(lhs_a - rhs_a). The potentials cancel,
/// leaving Div Gamma.
JetExpr cross_eliminate(const PotentialSystem& ps);

/// Equation i as lhs - rhs.
JetExpr equation_residual(const PotentialSystem& ps, std::size_t i);

std::string to_string(const PotentialSystem& ps);

}  // namespace topo
