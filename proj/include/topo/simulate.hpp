/// @file simulate.hpp
/// @brief Manifest-driven simulation runs: evolve a catalog PDE at two
/// resolutions and report charge, balance, mass and constraint integrals
/// with their operational tolerances.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "topo/numerics.hpp"
#include "topo/pde_zoo.hpp"

namespace topo {

class ManifestError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every input of a run. JSON keys match the field names; `grid` is
/// {"n": [...], "period": [...]} with periods given as numbers or formulas
/// such as "2*pi"; curves are {"rectangle": [x0, y0, x1, y1]} or
/// {"polyline": [[x, y], ...]}, boxes {"lo": [...], "hi": [...]}.
struct RunManifest {
  std::string command = "simulate";
  std::string pde;
  std::string params;
  std::string catalog_version;
  std::vector<int> n;
  std::vector<double> period;
  std::string u0;
  double t_end = 0;
  double dt = 0;
  double sample_interval = 0;
  std::string kernel = "auto";
  /// Current or charge id whose flux vector Gamma is integrated.
  std::string gamma;
  /// Balance charge id; rate and flux 1-forms are checked along the curves.
  std::string balance;
  std::vector<CurveSpec> curves;
  std::vector<BoxSpec> boxes;
  std::map<std::string, std::string> functions;
  bool refine = true;
  std::string domain = "periodic";
  std::uint64_t seed = 0;
  std::string out;

  static RunManifest from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json to_json() const;
};

RunManifest load_manifest(const std::string& path);

/// Hash of the catalog files, as a hex string.
std::string catalog_version(const LoadOptions& opts = {});

struct SeriesCheck {
  std::string name;
  std::vector<double> values;
  std::vector<double> coarse;
  std::vector<double> tolerances;
  bool ok = true;
};

struct SimulationResult {
  /// 0 all checks hold, 1 a check failed, 2 unusable input, 3 the initial
  /// data violates an integral constraint.
  int exit_code = 0;
  std::vector<double> times;
  SeriesCheck mass;
  bool mass_constrained = false;
  std::vector<SeriesCheck> charges;
  std::vector<SeriesCheck> deformations;
  std::vector<SeriesCheck> balances;
  std::vector<SeriesCheck> surfaces;
  std::optional<SourceSinkReport> source_sink, source_sink_coarse;
  EvolveReport evolution;
  nlohmann::ordered_json report;
};

SimulationResult run_simulation(const RunManifest& manifest, const LoadOptions& opts = {});

/// Pretty JSON with a trailing newline.
std::string render_report(const SimulationResult& r);

}  // namespace topo
