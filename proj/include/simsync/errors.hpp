#pragma once

#include <stdexcept>
#include <string>

namespace simsync {

/// Invalid run configuration: grid level out of range, unstable time step,
/// too few ensemble members, mixed clock modes, and the like.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands live on incompatible grids.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract wire data. Fatal for the session.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace simsync
