#pragma once

#include "hsde/core.hpp"
#include "hsde/rng.hpp"

#include <vector>

namespace hsde {

/// Generator of a continuous-time Markov chain: nonnegative off-diagonal
/// rates, rows summing to zero within 1e-12.
class GeneratorMatrix {
 public:
  /// Validates `entries`; throws InvalidArgument naming the offending row.
  explicit GeneratorMatrix(Matrix entries);

  /// Row-major list of N*N rates, as written in config files.
  static GeneratorMatrix from_row_major(const std::vector<double>& rates);

  int size() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  double rate(ModeIndex from, ModeIndex to) const {
    return entries_(static_cast<Eigen::Index>(from.index()), static_cast<Eigen::Index>(to.index()));
  }
  /// -gamma_ii, the total jump rate out of `mode`.
  double exit_rate(ModeIndex mode) const { return -rate(mode, mode); }

 private:
  Matrix entries_;
};

inline GeneratorMatrix validate_generator(const Matrix& entries) { return GeneratorMatrix(entries); }

/// Right-continuous piecewise-constant path of the switching chain on [0, horizon].
struct ModePath {
  double horizon = 0.0;
  std::vector<double> jump_times;  // strictly increasing, <= horizon
  std::vector<ModeIndex> modes;    // modes[0] is the initial mode; modes[k] holds after jump_times[k-1]

  ModeIndex initial_mode() const { return modes.front(); }
  ModeIndex at(double t) const;
};

/// Walks a ModePath forward in time without repeated searches.
class ModeCursor {
 public:
  explicit ModeCursor(const ModePath& path) : path_(&path) {}
  /// Mode at t; successive calls must use nondecreasing t.
  ModeIndex at(double t) {
    while (next_ < path_->jump_times.size() && path_->jump_times[next_] <= t) ++next_;
    return path_->modes[next_];
  }

 private:
  const ModePath* path_;
  std::size_t next_ = 0;
};

/// Exact simulation through the embedded jump chain: exponential holding
/// times with rate -gamma_ii, next mode j drawn with probability
/// gamma_ij / -gamma_ii. Consumes only `rng`.
ModePath simulate_mode_path(const GeneratorMatrix& gen, ModeIndex initial, double horizon, CounterRng& rng);

/// Solves pi * Gamma = 0 with sum(pi) = 1. Throws Error when the chain is
/// reducible or the system is numerically singular.
Vector stationary_distribution(const GeneratorMatrix& gen);

/// Fraction of [0, horizon] spent in each mode.
Vector occupation_fractions(const ModePath& path, int mode_count);

}  // namespace hsde
