/// @file numerics.hpp
/// @brief Periodic-grid evaluation and evolution of catalog PDEs, closed-curve
/// and closed-surface quadrature of flux vectors, 1D source/sink extraction
/// and initial-data constraint integrals.
///
/// Grids are uniform on [0, L_a) per axis with x_a = i * L_a / n_a. Spatial
/// derivatives are pseudo-spectral. Evolution uses the divergence form
/// L u_t = sum_M D^M F_M of the entry: u_t = L^{-1} sum_M D^M F_M with the
/// kernel of L handled explicitly.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "topo/conservation.hpp"
#include "topo/pde_zoo.hpp"

namespace topo {

class UnboundArbFun : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class DerivativeOrderTooHigh : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class CflViolation : public std::runtime_error {
 public:
  CflViolation(const std::string& what, double dt, double dt_max)
      : std::runtime_error(what), dt(dt), dt_max(dt_max) {}
  double dt, dt_max;
};
/// The inverse of the leading operator met a field with content in its
/// kernel (nonzero mean along the inverted direction).
class NonIntegrableSymbol : public std::runtime_error {
 public:
  NonIntegrableSymbol(const std::string& what, double content) : std::runtime_error(what), content(content) {}
  double content;
};
class CurveNotClosed : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kMaxSpatialOrder = 6;

struct GridField {
  int dim = 1;
  std::vector<int> n;
  std::vector<double> period;
  std::vector<double> data;
  double t = 0;

  GridField() = default;
  GridField(std::vector<int> n, std::vector<double> period, double t = 0);

  std::size_t size() const;
  double spacing(int axis) const { return period[axis] / n[axis]; }
  double cell_volume() const;
  /// Throws std::invalid_argument unless n >= 16, L > 0 and sizes agree.
  void validate() const;
  /// Same grid with every other point per axis.
  GridField coarsened() const;
};

/// Fills a grid from a function of the coordinates.
GridField sample_field(std::vector<int> n, std::vector<double> period,
                       const std::function<double(const std::vector<double>&)>& u0, double t = 0);

/// f(t, k) = k-th derivative of a time function.
using TimeFunction = std::function<double(double, int)>;
using FunBindings = std::map<std::string, TimeFunction>;
/// Built-ins "one", "t" and "sin".
TimeFunction builtin_time_function(const std::string& name);

using ParamValues = std::map<std::string, double>;
/// Numeric parameter values of an entry: its bindings, then its defaults;
/// squared bindings take the positive root. `overrides` win.
ParamValues numeric_parameters(const CatalogEntry& entry, const ParamValues& overrides = {});

/// u and, when needed, u_t at the same time.
struct FieldState {
  const GridField* u = nullptr;
  const GridField* u_t = nullptr;
};

/// Pointwise values of e on the grid. Jet symbols of u with time order 0
/// take spectral derivatives of u, time order 1 those of u_t.
std::vector<double> evaluate_on_grid(const JetExpr& e, const FieldState& fields, const FunBindings& funs = {},
                                     const ParamValues& params = {});
std::vector<double> evaluate_on_grid(const JetExpr& e, const GridField& u, const FunBindings& funs = {},
                                     const ParamValues& params = {});

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

struct EvolveOptions {
  double t_end = 0;
  /// Time step; 0 picks 0.9 of the stability limit at t = 0.
  double dt = 0;
  /// Sample interval; 0 samples only t = 0 and t_end. Steps are shortened so
  /// that every sample time is hit.
  double sample_interval = 0;
  enum class Kernel { Auto, Reject, Pin };
  /// Reject throws NonIntegrableSymbol on kernel content of the initial data
  /// or of the operand of L^{-1}; Pin projects the operand's kernel content
  /// out and reports it. Auto rejects for first-order leading operators in
  /// two or more dimensions (the inverse-gradient form) and pins otherwise.
  Kernel kernel = Kernel::Auto;
  ParamValues params;
  /// Called after every accepted step (and at t = 0) with u and u_t.
  std::function<void(const GridField&, const GridField&)> observer;
};

struct EvolveReport {
  double dt = 0;
  long steps = 0;
  double stability_limit = 0;  // dt bound estimated at t = 0
  std::string dealiasing;
  std::string kernel_policy;
  /// Largest kernel amplitude of the operand projected out (Pin).
  double pinned_kernel = 0;
  /// Kernel amplitude of the initial data (Pin); it never evolves.
  double initial_kernel = 0;
  std::vector<std::string> notes;
};

struct Trajectory {
  std::vector<GridField> u;
  std::vector<GridField> u_t;
  EvolveReport report;
};

/// Explicit RK4 on the 2/3-dealiased pseudo-spectral semi-discretization.
Trajectory evolve(const CatalogEntry& entry, const GridField& u0, const EvolveOptions& opts);

/// u_t for a given u under the entry's evolution form.
GridField time_derivative(const CatalogEntry& entry, const GridField& u, const EvolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct CurveSpec {
  /// Closed polyline (first vertex repeated at the end), in the cell.
  std::vector<std::array<double, 2>> vertices;
  static CurveSpec rectangle(double x0, double y0, double x1, double y1);
  /// +1 counterclockwise, -1 clockwise.
  int orientation() const;
  void validate() const;
};

struct BoxSpec {
  std::array<double, 3> lo{}, hi{};
};

struct QuadratureResult {
  double value = 0;
  /// Integral of |integrand|; sets the round-off scale.
  double magnitude = 0;
  std::size_t nodes = 0;
};

/// Circulation of (-Gamma^y, Gamma^x) along the curve: the integral of
/// -Gamma^y dx + Gamma^x dy. End-corrected composite trapezoid on every
/// segment with bicubic Hermite interpolation of the integrand.
QuadratureResult loop_integral(const Vec& gamma, const FieldState& fields, const CurveSpec& curve,
                               const FunBindings& funs = {}, const ParamValues& params = {});
/// Integral of a 1-form a dx + b dy along the curve.
QuadratureResult line_integral(const JetExpr& a, const JetExpr& b, const FieldState& fields, const CurveSpec& curve,
                               const FunBindings& funs = {}, const ParamValues& params = {});
/// Outward flux of Gamma through the boundary of an axis-aligned box (3D).
QuadratureResult surface_integral(const Vec& gamma, const FieldState& fields, const BoxSpec& box,
                                  const FunBindings& funs = {}, const ParamValues& params = {});
/// Integral of e over the closed cell [0, L]^d (closed trapezoid).
QuadratureResult cell_integral(const JetExpr& e, const FieldState& fields, const FunBindings& funs = {},
                               const ParamValues& params = {});

/// Operational tolerance: 10 x (resolution-doubling difference + round-off
/// scale of the finer value).
double operational_tolerance(const QuadratureResult& fine, const QuadratureResult& coarse);

struct ChargeReport {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> tolerances;
  std::string region;
  bool ok = false;
};

// ---------------------------------------------------------------------------
// 1D source/sink and constraints
// ---------------------------------------------------------------------------

struct SourceSinkReport {
  std::vector<double> times;
  std::vector<double> w;          // spatial mean of u_t - F
  std::vector<double> deviation;  // max |u_t - F - w|
  double max_deviation = 0;
};

/// u_t from the trajectory when it carries one per sample (the semi-discrete
/// time derivative), else by fourth-order central differences of equally
/// spaced samples without the first and last two.
SourceSinkReport extract_source_sink(const CatalogEntry& entry, const Trajectory& traj, const ParamValues& params = {});

/// F of the 1D presentation u_t = F + w(t).
JetExpr source_sink_flux(const CatalogEntry& entry);

struct ConstraintCheck {
  double value = 0;
  double tolerance = 0;
  bool satisfied = false;
  std::string verdict;
};

enum class DomainMode { Periodic, Decay };

/// Integral of T at u = u0 over the cell. The verdict compares |value| with
/// the operational tolerance of the grid against its coarsening; Decay mode
/// additionally requires u0 to be small on the cell boundary.
ConstraintCheck check_constraint(const DivergenceIdentity& identity, const GridField& u0, DomainMode mode,
                                 const FunBindings& funs = {}, const ParamValues& params = {});
ConstraintCheck check_constraint(const JetExpr& T, const GridField& u0, DomainMode mode,
                                 const FunBindings& funs = {}, const ParamValues& params = {});

}  // namespace topo
