#include "hsde/simulate.hpp"

#include "hsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hsde {

const char* to_string(ControlMode mode) {
  switch (mode) {
    case ControlMode::uncontrolled: return "uncontrolled";
    case ControlMode::controlled: return "controlled";
    case ControlMode::delayed: return "delayed";
  }
  return "?";
}

ControlMode parse_control_mode(const std::string& name) {
  if (name == "uncontrolled") return ControlMode::uncontrolled;
  if (name == "controlled") return ControlMode::controlled;
  if (name == "delayed") return ControlMode::delayed;
  throw InvalidArgument("unknown control mode '" + name + "' (uncontrolled | controlled | delayed)");
}

SimulationConfig::SimulationConfig(SimulationSettings settings) : settings_(std::move(settings)) {
  const auto& s = settings_;
  if (!(s.step > 0.0) || !std::isfinite(s.step)) throw InvalidArgument("step must be > 0");
  if (!(s.horizon > 0.0) || !std::isfinite(s.horizon)) throw InvalidArgument("horizon must be > 0");
  if (!(s.delay >= 0.0) || !std::isfinite(s.delay)) throw InvalidArgument("delay must be >= 0");
  if (s.path_count < 1) throw InvalidArgument("path_count must be >= 1");
  if (!(s.moment_order > 0.0)) throw InvalidArgument("moment order must be > 0");
  if (!(s.explosion_cap > 0.0)) throw InvalidArgument("explosion cap must be > 0");

  step_count_ = std::llround(s.horizon / s.step);
  if (step_count_ < 1 || std::abs(static_cast<double>(step_count_) * s.step - s.horizon) > 1e-6 * s.horizon) {
    throw InvalidArgument("horizon must be a multiple of the step");
  }

  if (s.delay > 0.0) {
    const double ratio = s.delay / s.step;
    const std::int64_t nearest = std::llround(ratio);
    const double rounded = static_cast<double>(nearest) * s.step;
    const double rounding = std::abs(rounded - s.delay) / s.delay;
    if (rounding <= 1e-6) {
      delay_steps_ = nearest;
      delay_ = rounded;
      delay_rounding_ = rounding;
    } else if (s.allow_fractional_delay) {
      delay_steps_ = static_cast<std::int64_t>(std::floor(ratio));
      delay_fraction_ = ratio - static_cast<double>(delay_steps_);
      delay_ = s.delay;
    } else {
      std::ostringstream os;
      os << "delay " << s.delay << " is not a multiple of step " << s.step << " (relative rounding " << rounding
         << " > 1e-6); choose a finer step or allow fractional delays";
      throw InvalidArgument(os.str());
    }
  }

  std::vector<double> times = s.record_times;
  if (times.empty()) {
    constexpr int kDefaultRecords = 1000;
    for (int k = 0; k < kDefaultRecords; ++k) times.push_back(s.horizon * k / (kDefaultRecords - 1));
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < 0.0 || times[k] > s.horizon * (1.0 + 1e-12)) {
      throw InvalidArgument("record times must lie in [0, horizon]");
    }
    if (k > 0 && !(times[k] > times[k - 1])) throw InvalidArgument("record times must be increasing");
    const auto grid = std::clamp<std::int64_t>(std::llround(times[k] / s.step), 0, step_count_);
    if (record_steps_.empty() || grid != record_steps_.back()) record_steps_.push_back(grid);
  }
}

void brownian_increment(std::uint64_t key, std::int64_t step, double h, VectorRef dB) {
  const double scale = std::sqrt(h);
  const auto m = static_cast<std::uint64_t>(dB.size());
  for (std::uint64_t j = 0; j < m; ++j) {
    dB[static_cast<Eigen::Index>(j)] = scale * CounterRng::normal_at(key, static_cast<std::uint64_t>(step) * m + j);
  }
}

PathStreams PathStreams::derive(std::uint64_t master_seed, std::uint64_t path_index) {
  return {derive_key(master_seed, path_index, StreamPurpose::brownian),
          derive_key(master_seed, path_index, StreamPurpose::markov)};
}

Path integrate_path(const HybridModel& model, const InitialSegment& history, const SimulationConfig& cfg,
                    ControlMode mode, const ModePath& mode_path, const IncrementFn& increments,
                    std::int64_t start_step) {
  const int n = model.dimension();
  const double h = cfg.step();
  if (history.dimension() != n) throw InvalidArgument("initial segment dimension differs from the model");
  if (std::abs(history.step() - h) > 1e-12 * h) throw InvalidArgument("initial segment step differs from the grid");
  if (start_step < 0 || start_step > cfg.step_count()) throw InvalidArgument("start step outside the grid");
  check_mode(history.initial_mode(), model.modes());
  for (ModeIndex m : mode_path.modes) check_mode(m, model.modes());
  if (mode_path.horizon < cfg.horizon() * (1.0 - 1e-12)) throw InvalidArgument("mode path shorter than horizon");

  const bool delayed = mode == ControlMode::delayed;
  const std::int64_t lag = delayed ? cfg.delay_steps() : 0;
  const double frac = delayed ? cfg.delay_fraction() : 0.0;
  if (delayed && history.samples().size() < cfg.history_samples()) {
    throw InvalidArgument("initial segment does not cover [-tau, 0] on the grid");
  }

  // Ring buffer of the last `depth` grid states, indexed by absolute step.
  const std::int64_t depth = lag + 2;
  std::vector<Vector> ring(static_cast<std::size_t>(depth), Vector::Zero(n));
  auto slot = [depth](std::int64_t k) { return static_cast<std::size_t>(((k % depth) + depth) % depth); };
  const auto& samples = history.samples();
  const auto available = static_cast<std::int64_t>(samples.size());
  for (std::int64_t back = 0; back < std::min(depth, available); ++back) {
    ring[slot(start_step - back)] = samples[static_cast<std::size_t>(available - 1 - back)];
  }

  const auto& records = cfg.record_steps();
  auto next_record = std::lower_bound(records.begin(), records.end(), start_step);

  Path path;
  const auto reserve = static_cast<std::size_t>(records.end() - next_record);
  path.steps.reserve(reserve);
  path.times.reserve(reserve);
  path.states.reserve(reserve);
  path.modes.reserve(reserve);

  Vector x = samples.back();
  Vector drift(n), control(n), delayed_state(n), dB(model.brownian_dim()), next(n);
  Matrix g(n, model.brownian_dim());
  ModeCursor cursor(mode_path);
  const double cap = cfg.settings().explosion_cap;

  for (std::int64_t k = start_step;; ++k) {
    const double t = static_cast<double>(k) * h;
    const ModeIndex r = cursor.at(t);
    if (next_record != records.end() && *next_record == k) {
      path.steps.push_back(k);
      path.times.push_back(t);
      path.states.push_back(x);
      path.modes.push_back(r);
      ++next_record;
    }
    if (k == cfg.step_count()) break;

    model.drift_into(x, r, t, drift);
    switch (mode) {
      case ControlMode::uncontrolled:
        control.setZero();
        break;
      case ControlMode::controlled:
        model.control_into(x, r, t, control);
        break;
      case ControlMode::delayed:
        if (frac > 0.0) {
          delayed_state = (1.0 - frac) * ring[slot(k - lag)] + frac * ring[slot(k - lag - 1)];
          model.control_into(delayed_state, r, t, control);
        } else {
          model.control_into(ring[slot(k - lag)], r, t, control);
        }
        break;
    }
    model.diffusion_into(x, r, t, g);
    increments(k, h, dB);
    next.noalias() = x + (drift + control) * h;
    next.noalias() += g * dB;

    const double norm = next.norm();
    if (!std::isfinite(norm) || norm > cap) {
      path.exploded_at = static_cast<double>(k + 1) * h;
      break;
    }
    x.swap(next);
    ring[slot(k + 1)] = x;
  }
  return path;
}

Path integrate_path(const HybridModel& model, const InitialSegment& history, const SimulationConfig& cfg,
                    ControlMode mode, const ModePath& mode_path, std::uint64_t brownian_key,
                    std::int64_t start_step) {
  return integrate_path(
      model, history, cfg, mode, mode_path,
      [brownian_key](std::int64_t k, double h, VectorRef dB) { brownian_increment(brownian_key, k, h, dB); },
      start_step);
}

Path simulate_path(const HybridModel& model, const GeneratorMatrix& gen, const InitialSegment& history,
                   const SimulationConfig& cfg, ControlMode mode, std::uint64_t path_index) {
  if (gen.size() != model.modes()) throw InvalidArgument("generator size differs from the model's mode count");
  const PathStreams streams = PathStreams::derive(cfg.settings().master_seed, path_index);
  CounterRng markov(streams.markov);
  const ModePath modes = simulate_mode_path(gen, history.initial_mode(), cfg.horizon(), markov);
  return integrate_path(model, history, cfg, mode, modes, streams.brownian);
}

std::vector<Path> simulate_paths(const HybridModel& model, const GeneratorMatrix& gen, const InitialSegment& history,
                                 const SimulationConfig& cfg, ControlMode mode) {
  std::vector<Path> paths(cfg.settings().path_count);
  parallel_for(paths.size(), cfg.settings().workers,
               [&](std::size_t i) { paths[i] = simulate_path(model, gen, history, cfg, mode, i); });
  return paths;
}

MomentEstimate monte_carlo_moment(const HybridModel& model, const GeneratorMatrix& gen,
                                  const InitialSegment& history, const SimulationConfig& cfg, ControlMode mode) {
  const auto& s = cfg.settings();
  if (s.path_count < 2) throw InvalidArgument("moment estimation needs at least 2 paths");
  const double p = s.moment_order;
  const double cap_value = std::pow(s.explosion_cap, p);
  const auto& records = cfg.record_steps();
  const std::size_t R = records.size();

  std::vector<double> sum(R, 0.0), sum_sq(R, 0.0);
  std::vector<std::size_t> exploded(R, 0);

  // Paths are simulated in parallel chunks; each chunk is reduced in path
  // order so the floating-point sums do not depend on the worker count.
  constexpr std::size_t kChunk = 256;
  std::vector<std::vector<double>> chunk_values(kChunk, std::vector<double>(R));
  std::vector<std::vector<char>> chunk_capped(kChunk, std::vector<char>(R));
  for (std::size_t first = 0; first < s.path_count; first += kChunk) {
    const std::size_t count = std::min(kChunk, s.path_count - first);
    parallel_for(count, s.workers, [&](std::size_t c) {
      const Path path = simulate_path(model, gen, history, cfg, mode, first + c);
      auto& values = chunk_values[c];
      auto& capped = chunk_capped[c];
      for (std::size_t j = 0; j < R; ++j) {
        if (j < path.states.size()) {
          values[j] = std::pow(path.states[j].norm(), p);
          capped[j] = 0;
        } else {
          values[j] = cap_value;
          capped[j] = 1;
        }
      }
    });
    for (std::size_t c = 0; c < count; ++c) {
      for (std::size_t j = 0; j < R; ++j) {
        sum[j] += chunk_values[c][j];
        sum_sq[j] += chunk_values[c][j] * chunk_values[c][j];
        exploded[j] += static_cast<std::size_t>(chunk_capped[c][j]);
      }
    }
  }

  MomentEstimate est;
  est.path_count = s.path_count;
  est.moment_order = p;
  const auto N = static_cast<double>(s.path_count);
  for (std::size_t j = 0; j < R; ++j) {
    const double mean = sum[j] / N;
    const double var = std::max(0.0, (sum_sq[j] - N * mean * mean) / (N - 1.0));
    est.times.push_back(static_cast<double>(records[j]) * cfg.step());
    est.mean_moment.push_back(mean);
    est.std_error.push_back(std::sqrt(var / N));
    est.exploded_count.push_back(exploded[j]);
  }
  return est;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("regression needs >= 2 matching points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("regression abscissae are all equal");
  return sxy / sxx;
}

double estimate_moment_exponent(const MomentEstimate& est, double t_a, double t_b) {
  std::vector<double> t, y;
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    const double tk = est.times[k];
    if (tk < t_a - 1e-12 || tk > t_b + 1e-12) continue;
    if (!(est.mean_moment[k] > 0.0)) {
      throw InvalidArgument("moment estimate is not positive at t = " + std::to_string(tk) + "; shrink the window");
    }
    t.push_back(tk);
    y.push_back(std::log(est.mean_moment[k]));
  }
  if (t.size() < 3) throw InvalidArgument("need at least 3 record times in the window");
  return least_squares_slope(t, y);
}

double estimate_pathwise_exponent(const Path& path, double t_a, double t_b) {
  if (path.exploded_at && *path.exploded_at <= t_b) throw InvalidArgument("path exploded within the window");
  std::vector<double> t, y;
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    const double tk = path.times[k];
    if (tk < t_a - 1e-12 || tk > t_b + 1e-12) continue;
    const double norm = path.states[k].norm();
    if (!(norm > 0.0)) throw InvalidArgument("path hits 0 at t = " + std::to_string(tk));
    t.push_back(tk);
    y.push_back(std::log(norm));
  }
  if (t.size() < 2) throw InvalidArgument("need at least 2 record times in the window");
  return least_squares_slope(t, y);
}

}  // namespace hsde
