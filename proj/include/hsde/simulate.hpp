#pragma once

#include "hsde/core.hpp"
#include "hsde/markov.hpp"
#include "hsde/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace hsde {

/// Which drift correction the integrator applies.
enum class ControlMode {
  uncontrolled,  // dx = f dt + g dB
  controlled,    // dx = (f + u(x(t))) dt + g dB
  delayed,       // dx = (f + u(x(t - tau))) dt + g dB
};

const char* to_string(ControlMode mode);
ControlMode parse_control_mode(const std::string& name);

struct SimulationSettings {
  double step = 1e-5;
  double horizon = 1.0;
  double delay = 0.0;
  std::size_t path_count = 1;
  std::uint64_t master_seed = 1;
  double moment_order = 2.0;
  /// Times at which states are recorded; empty means 1000 uniform points on [0, horizon].
  std::vector<double> record_times;
  /// Delays that are not a multiple of the step are rejected unless this is
  /// set, in which case the delayed state is linearly interpolated between
  /// the two neighbouring grid states.
  bool allow_fractional_delay = false;
  double explosion_cap = 1e12;
  unsigned workers = 0;  // 0 = hardware concurrency
};

/// Validated integration grid.
class SimulationConfig {
 public:
  explicit SimulationConfig(SimulationSettings settings);

  const SimulationSettings& settings() const { return settings_; }
  double step() const { return settings_.step; }
  double horizon() const { return settings_.horizon; }
  /// Delay actually simulated (after rounding to the grid, unless fractional).
  double delay() const { return delay_; }
  /// |requested - simulated| / requested delay.
  double delay_rounding() const { return delay_rounding_; }
  std::int64_t delay_steps() const { return delay_steps_; }
  /// Fractional part of delay / step in [0, 1); zero unless fractional delays are allowed.
  double delay_fraction() const { return delay_fraction_; }
  std::int64_t step_count() const { return step_count_; }
  const std::vector<std::int64_t>& record_steps() const { return record_steps_; }
  /// Grid samples needed before t0 to evaluate the delayed control.
  std::size_t history_samples() const {
    return static_cast<std::size_t>(delay_steps_) + (delay_fraction_ > 0.0 ? 2 : 1);
  }

 private:
  SimulationSettings settings_;
  double delay_ = 0.0;
  double delay_rounding_ = 0.0;
  std::int64_t delay_steps_ = 0;
  double delay_fraction_ = 0.0;
  std::int64_t step_count_ = 0;
  std::vector<std::int64_t> record_steps_;
};

/// One simulated trajectory, recorded at the configured grid points.
struct Path {
  std::vector<std::int64_t> steps;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<ModeIndex> modes;
  /// Time of the first state that was non-finite or exceeded the explosion
  /// cap; nothing is recorded from there on.
  std::optional<double> exploded_at;
};

/// Writes the Brownian increment for grid step k (length m, variance h) into dB.
using IncrementFn = std::function<void(std::int64_t step, double h, VectorRef dB)>;

/// Increment of the counter-based Brownian substream `key` at grid step k.
void brownian_increment(std::uint64_t key, std::int64_t step, double h, VectorRef dB);

/// Keys of the independent substreams of one Monte Carlo path.
struct PathStreams {
  std::uint64_t brownian = 0;
  std::uint64_t markov = 0;

  static PathStreams derive(std::uint64_t master_seed, std::uint64_t path_index);
};

/// Euler-Maruyama from grid step `start_step` (time start_step * h) to the horizon:
///   x_{k+1} = x_k + [f(x_k, r_k, t_k) + u_k] h + g(x_k, r_k, t_k) dB_k,
/// with u_k = 0, u(x_k, r_k, t_k) or u(x_{k - tau/h}, r_k, t_k). The mode is
/// held at r(t_k) over each step. `history` provides the states at and before
/// start_step (its last sample is the starting state).
Path integrate_path(const HybridModel& model, const InitialSegment& history, const SimulationConfig& cfg,
                    ControlMode mode, const ModePath& mode_path, const IncrementFn& increments,
                    std::int64_t start_step = 0);

/// Same, drawing increments from the counter-based substream `brownian_key`.
Path integrate_path(const HybridModel& model, const InitialSegment& history, const SimulationConfig& cfg,
                    ControlMode mode, const ModePath& mode_path, std::uint64_t brownian_key,
                    std::int64_t start_step = 0);

/// Path `path_index` of the ensemble defined by cfg.master_seed: draws the
/// mode path and the Brownian increments from their own substreams.
Path simulate_path(const HybridModel& model, const GeneratorMatrix& gen, const InitialSegment& history,
                   const SimulationConfig& cfg, ControlMode mode, std::uint64_t path_index);

/// Paths 0..path_count-1, in index order.
std::vector<Path> simulate_paths(const HybridModel& model, const GeneratorMatrix& gen, const InitialSegment& history,
                                 const SimulationConfig& cfg, ControlMode mode);

struct MomentEstimate {
  std::vector<double> times;
  std::vector<double> mean_moment;  // sample mean of |x(t)|^p
  std::vector<double> std_error;
  std::vector<std::size_t> exploded_count;  // paths counted at the cap value
  std::size_t path_count = 0;
  double moment_order = 0.0;
};

/// Monte Carlo estimate of E|x(t)|^p at the record times. Exploded paths
/// contribute cap^p from their explosion time on. The result is bit-identical
/// for any worker count.
MomentEstimate monte_carlo_moment(const HybridModel& model, const GeneratorMatrix& gen,
                                  const InitialSegment& history, const SimulationConfig& cfg, ControlMode mode);

/// Least-squares slope of log(mean_moment) against t over [t_a, t_b].
double estimate_moment_exponent(const MomentEstimate& est, double t_a, double t_b);

/// Least-squares slope of log|x(t)| against t over [t_a, t_b] for one path.
double estimate_pathwise_exponent(const Path& path, double t_a, double t_b);

/// Ordinary least-squares slope of y on x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hsde
