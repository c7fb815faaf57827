#pragma once

// Nested uniform grids on the unit square and the injection restriction
// between levels. Level L has (2^L + 1) points per axis with mesh width
// 2^-L, so the point set of each level is an exact subset of every finer
// level. States are stored row-major with boundary points included.

#include <cstdint>
#include <string>
#include <vector>

#include "simsync/errors.hpp"

namespace simsync {

inline constexpr int kMaxGridLevel = 12;

struct GridLevel {
  int level = 0;
  int side = 2;       // points per axis, 2^level + 1
  int n_points = 4;   // side^2
  double dx = 1.0;    // 1 / 2^level

  friend bool operator==(const GridLevel&, const GridLevel&) = default;
};

inline GridLevel make_grid(int level) {
  if (level < 0 || level > kMaxGridLevel) {
    throw ConfigError("grid level must be in [0, " + std::to_string(kMaxGridLevel) +
                      "], got " + std::to_string(level));
  }
  GridLevel g;
  g.level = level;
  g.side = (1 << level) + 1;
  g.n_points = g.side * g.side;
  g.dx = 1.0 / static_cast<double>(1 << level);
  return g;
}

inline bool is_boundary(const GridLevel& g, int row, int col) {
  return row == 0 || col == 0 || row == g.side - 1 || col == g.side - 1;
}

/// Simulation state at one time step on one grid. values[row*side + col]
/// holds the solution at (x, y) = (col*dx, row*dx); boundary entries are
/// stored and treated as fixed Dirichlet data by the solvers.
struct StateVector {
  GridLevel level;
  std::vector<double> values;

  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * level.side + col]; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * level.side + col]; }

  friend bool operator==(const StateVector&, const StateVector&) = default;
};

inline StateVector make_state(const GridLevel& g, double fill = 0.0) {
  return StateVector{g, std::vector<double>(static_cast<std::size_t>(g.n_points), fill)};
}

/// Injection restriction from a fine level onto a coarser (or equal) one.
/// index_map[coarse index] is the coincident fine-grid index; alternative
/// restriction operators can be expressed by substituting a different map
/// construction.
struct Restriction {
  GridLevel from;
  GridLevel to;
  std::vector<std::int32_t> index_map;

  StateVector apply(const StateVector& s) const {
    if (s.level != from) {
      throw DimensionError("restriction expects a level-" + std::to_string(from.level) +
                           " state, got level " + std::to_string(s.level.level));
    }
    StateVector out = make_state(to);
    for (int i = 0; i < to.n_points; ++i) {
      out.values[static_cast<std::size_t>(i)] = s.values[static_cast<std::size_t>(index_map[i])];
    }
    return out;
  }
};

inline Restriction make_restriction(const GridLevel& from, const GridLevel& to) {
  if (from.level < to.level) {
    throw DimensionError("cannot restrict level " + std::to_string(from.level) +
                         " onto finer level " + std::to_string(to.level));
  }
  Restriction r{from, to, {}};
  r.index_map.resize(static_cast<std::size_t>(to.n_points));
  const int stride = 1 << (from.level - to.level);
  for (int row = 0; row < to.side; ++row) {
    for (int col = 0; col < to.side; ++col) {
      r.index_map[static_cast<std::size_t>(row) * to.side + col] =
          static_cast<std::int32_t>(row) * stride * from.side + col * stride;
    }
  }
  return r;
}

inline StateVector restrict_state(const StateVector& s, const GridLevel& to) {
  return make_restriction(s.level, to).apply(s);
}

}  // namespace simsync
