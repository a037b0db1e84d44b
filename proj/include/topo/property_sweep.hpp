/// @file property_sweep.hpp
/// @brief Seeded random polynomial expressions and the algebraic properties
/// they must satisfy: commuting total derivatives, Euler operator
/// annihilating divergences and divergence inversion round trips.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "topo/jet_expr.hpp"

namespace topo {

struct SweepOptions {
  std::uint64_t seed = 20240601;
  int count = 200;
  int max_order = 4;
  int max_degree = 3;
  int max_dim = 2;
  int max_terms = 4;
};

struct SweepFailure {
  std::string property;
  std::string expression;
  std::string detail;
};

struct SweepReport {
  int expressions = 0;
  std::map<std::string, int> checked;
  std::map<std::string, int> passed;
  std::vector<SweepFailure> failures;
  bool ok() const { return failures.empty() && expressions > 0; }
};

/// Random polynomial in the jets of u (and x, y) with small integer
/// coefficients; at most `max_terms` terms of jet degree 1..max_degree and
/// jet order <= max_order. Draws use only the raw engine output, so a seed
/// gives the same expression on every platform.
JetExpr random_polynomial(std::mt19937_64& rng, int dim, int max_order, int max_degree, int max_terms);

/// Properties "D-commutativity", "euler-of-divergence" and
/// "divergence-round-trip" over `count` random expressions.
SweepReport property_sweep(const SweepOptions& opts = {});

}  // namespace topo
