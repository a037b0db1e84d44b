/// @file initial_data.hpp
/// @brief Initial-data formulas: arithmetic in x, y, z with decimal literals,
/// pi and the elementary functions sin, cos, tan, exp, log, sqrt, sinh, cosh,
/// tanh, sech and abs.
#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace topo {

class InitialDataError : public std::invalid_argument {
 public:
  InitialDataError(std::size_t offset, const std::string& what)
      : std::invalid_argument(what + " at offset " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

using SpatialFunction = std::function<double(const std::vector<double>&)>;

/// Coordinates beyond `dim` are rejected.
SpatialFunction parse_initial_data(const std::string& src, int dim);

}  // namespace topo
