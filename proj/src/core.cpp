#include "hsde/core.hpp"

#include "hsde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hsde {

namespace {

std::string format_vector(const Vector& x) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ')';
  return os.str();
}

[[noreturn]] void throw_non_finite(const std::string& model, const char* coefficient, ModeIndex mode,
                                   const Vector& x, double t) {
  std::ostringstream os;
  os << model << ": " << coefficient << " is non-finite in mode " << mode.value() << " at x = " << format_vector(x)
     << ", t = " << t;
  throw ModelEvaluationError(os.str());
}

}  // namespace

void check_mode(ModeIndex mode, int mode_count) {
  if (mode.value() < 1 || mode.value() > mode_count) {
    throw InvalidArgument("mode " + std::to_string(mode.value()) + " outside 1.." + std::to_string(mode_count));
  }
}

void LipschitzBounds::validate() const {
  for (double v : {drift, control, diffusion}) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("Lipschitz bounds must be finite and >= 0");
  }
}

double frobenius(const Matrix& a) { return a.norm(); }

HybridModel::HybridModel(HybridModelSpec spec) : HybridModel(std::move(spec), true) {}

HybridModel HybridModel::unchecked(HybridModelSpec spec) { return HybridModel(std::move(spec), false); }

HybridModel::HybridModel(HybridModelSpec spec, bool check_zero) : spec_(std::move(spec)) {
  if (spec_.dimension < 1 || spec_.modes < 1 || spec_.brownian_dim < 1) {
    throw InvalidArgument("model dimensions must be positive");
  }
  if (!spec_.drift || !spec_.diffusion) throw InvalidArgument("model needs drift and diffusion maps");
  spec_.lipschitz.validate();
  if (!check_zero) return;
  const Vector zero = Vector::Zero(spec_.dimension);
  for (int i = 1; i <= spec_.modes; ++i) {
    for (double t : {0.0, 1.0}) {
      const ModeIndex mode(i);
      const bool vanishes = drift(zero, mode, t).isZero(0.0) && diffusion(zero, mode, t).isZero(0.0) &&
                            control(zero, mode, t).isZero(0.0);
      if (!vanishes) {
        throw InvalidArgument(spec_.name + ": coefficients must vanish at x = 0 (mode " + std::to_string(i) +
                              ", t = " + std::to_string(t) + ")");
      }
    }
  }
}

HybridModel HybridModel::with_lipschitz(const LipschitzBounds& bounds) const {
  HybridModel copy = *this;
  bounds.validate();
  copy.spec_.lipschitz = bounds;
  return copy;
}

Vector HybridModel::drift(const Vector& x, ModeIndex mode, double t) const {
  check_mode(mode, modes());
  if (x.size() != dimension()) throw InvalidArgument("state dimension mismatch");
  Vector out(dimension());
  drift_into(x, mode, t, out);
  if (!out.allFinite()) throw_non_finite(name(), "drift", mode, x, t);
  return out;
}

Matrix HybridModel::diffusion(const Vector& x, ModeIndex mode, double t) const {
  check_mode(mode, modes());
  if (x.size() != dimension()) throw InvalidArgument("state dimension mismatch");
  Matrix out(dimension(), brownian_dim());
  diffusion_into(x, mode, t, out);
  if (!out.allFinite()) throw_non_finite(name(), "diffusion", mode, x, t);
  return out;
}

Vector HybridModel::control(const Vector& x, ModeIndex mode, double t) const {
  check_mode(mode, modes());
  if (x.size() != dimension()) throw InvalidArgument("state dimension mismatch");
  Vector out(dimension());
  control_into(x, mode, t, out);
  if (!out.allFinite()) throw_non_finite(name(), "control", mode, x, t);
  return out;
}

InitialSegment::InitialSegment(double step, std::vector<Vector> samples, ModeIndex initial_mode)
    : step_(step), samples_(std::move(samples)), initial_mode_(initial_mode) {
  if (!(step_ > 0.0)) throw InvalidArgument("initial segment step must be positive");
  if (samples_.empty()) throw InvalidArgument("initial segment needs at least x(0)");
  const auto n = samples_.front().size();
  if (n < 1) throw InvalidArgument("state dimension must be >= 1");
  for (const auto& s : samples_) {
    if (s.size() != n) throw InvalidArgument("initial segment samples differ in dimension");
    if (!s.allFinite()) throw InvalidArgument("initial segment contains non-finite values");
  }
  if (initial_mode_.value() < 1) throw InvalidArgument("initial mode must be >= 1");
}

InitialSegment InitialSegment::from_function(const std::function<Vector(double)>& history, double delay,
                                             double step, ModeIndex initial_mode) {
  if (!(delay >= 0.0) || !(step > 0.0)) throw InvalidArgument("need delay >= 0 and step > 0");
  // Grid points covering [-delay, 0]; a fractional delay needs the grid
  // point just before -delay as well.
  const auto lag = static_cast<std::size_t>(std::ceil(delay / step - 1e-6));
  const std::size_t count = lag + 1;
  std::vector<Vector> samples;
  samples.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double theta = -static_cast<double>(count - 1 - j) * step;
    samples.push_back(history(theta));
  }
  return InitialSegment(step, std::move(samples), initial_mode);
}

InitialSegment InitialSegment::constant(const Vector& state, double delay, double step, ModeIndex initial_mode) {
  return from_function([&](double) { return state; }, delay, step, initial_mode);
}

Vector InitialSegment::at(double theta) const {
  if (theta > 0.0 || theta < -span() * (1.0 + 1e-12) - 1e-300) {
    throw InvalidArgument("time outside the initial segment");
  }
  const double pos = static_cast<double>(samples_.size() - 1) + theta / step_;
  const auto lo = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(samples_.size() - 1)));
  const double w = pos - static_cast<double>(lo);
  if (w <= 0.0 || lo + 1 >= samples_.size()) return samples_[lo];
  return (1.0 - w) * samples_[lo] + w * samples_[lo + 1];
}

ValidationReport validate_model(const HybridModel& model, int probe_count, std::uint64_t rng_seed) {
  if (probe_count < 1) throw InvalidArgument("probe_count must be >= 1");
  const int n = model.dimension();
  const LipschitzBounds& declared = model.lipschitz();
  ValidationReport report;
  report.lipschitz_checked = model.globally_lipschitz();

  auto exceeds = [](double observed, double bound) { return observed > bound * (1.0 + 1e-9); };
  auto log_uniform = [](CounterRng& rng, double lo, double hi) {
    return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
  };
  auto direction = [n](CounterRng& rng) {
    Vector v(n);
    for (int k = 0; k < n; ++k) v[k] = rng.normal();
    return Vector(v / v.norm());
  };

  const Vector zero = Vector::Zero(n);
  for (int i = 1; i <= model.modes(); ++i) {
    const ModeIndex mode(i);
    ModeValidation mv{mode};
    CounterRng rng(derive_key(rng_seed, static_cast<std::uint64_t>(i), StreamPurpose::probe));

    std::vector<double> times{0.0, 1.0};
    for (int k = 0; k < probe_count; ++k) times.push_back(log_uniform(rng, 1e-6, 1e3));
    for (double t : times) {
      mv.max_drift_at_zero = std::max(mv.max_drift_at_zero, model.drift(zero, mode, t).norm());
      mv.max_diffusion_at_zero = std::max(mv.max_diffusion_at_zero, frobenius(model.diffusion(zero, mode, t)));
      mv.max_control_at_zero = std::max(mv.max_control_at_zero, model.control(zero, mode, t).norm());
    }
    const std::pair<const char*, double> at_zero[] = {{"drift", mv.max_drift_at_zero},
                                                      {"diffusion", mv.max_diffusion_at_zero},
                                                      {"control", mv.max_control_at_zero}};
    for (const auto& [coefficient, value] : at_zero) {
      if (value > 0.0) {
        report.flags.push_back({ValidationFlag::Kind::zero_condition, coefficient, mode, value, 0.0,
                                std::string(coefficient) + " does not vanish at x = 0"});
      }
    }

    if (report.lipschitz_checked) {
      for (int k = 0; k < probe_count; ++k) {
        const Vector x = direction(rng) * log_uniform(rng, 1e-3, 1e3);
        const double separation = log_uniform(rng, 1e-6, 1.0) * std::max(1.0, x.norm());
        const Vector y = x + direction(rng) * separation;
        const double t = log_uniform(rng, 1e-6, 1e3);
        const double dist = (x - y).norm();
        if (!(dist > 0.0)) continue;
        mv.max_drift_ratio =
            std::max(mv.max_drift_ratio, (model.drift(x, mode, t) - model.drift(y, mode, t)).norm() / dist);
        mv.max_control_ratio =
            std::max(mv.max_control_ratio, (model.control(x, mode, t) - model.control(y, mode, t)).norm() / dist);
        mv.max_diffusion_ratio = std::max(
            mv.max_diffusion_ratio, frobenius(model.diffusion(x, mode, t) - model.diffusion(y, mode, t)) / dist);
      }
      const std::tuple<const char*, double, double> ratios[] = {
          {"drift", mv.max_drift_ratio, declared.drift},
          {"control", mv.max_control_ratio, declared.control},
          {"diffusion", mv.max_diffusion_ratio, declared.diffusion}};
      for (const auto& [coefficient, observed, bound] : ratios) {
        if (exceeds(observed, bound)) {
          report.flags.push_back({ValidationFlag::Kind::lipschitz, coefficient, mode, observed, bound,
                                  std::string(coefficient) + " Lipschitz ratio exceeds the declared bound"});
        }
      }
    }
    report.per_mode.push_back(mv);
  }
  return report;
}

}  // namespace hsde
