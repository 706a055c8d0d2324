#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A coefficient map returned a non-finite value.
class ModelEvaluationError : public Error {
 public:
  using Error::Error;
};

/// Mode of the switching chain. Stored 1-based, as printed in reports.
class ModeIndex {
 public:
  constexpr ModeIndex() = default;
  constexpr explicit ModeIndex(int value) : value_(value) {}

  constexpr int value() const { return value_; }
  /// 0-based index for array access.
  constexpr std::size_t index() const { return static_cast<std::size_t>(value_ - 1); }

  constexpr bool operator==(const ModeIndex&) const = default;

 private:
  int value_ = 1;
};

/// Throws InvalidArgument unless 1 <= mode <= mode_count.
void check_mode(ModeIndex mode, int mode_count);

/// Global Lipschitz constants of the drift, control and diffusion maps.
struct LipschitzBounds {
  double drift = 0.0;      // L1
  double control = 0.0;    // L2
  double diffusion = 0.0;  // L3

  /// Throws InvalidArgument on negative or non-finite entries.
  void validate() const;
};

using ConstVectorRef = Eigen::Ref<const Vector>;
using VectorRef = Eigen::Ref<Vector>;
using MatrixRef = Eigen::Ref<Matrix>;

/// f(x, i, t) and u(x, i, t) write an n-vector into `out`.
using VectorField = std::function<void(const ConstVectorRef& x, ModeIndex mode, double t, VectorRef out)>;
/// g(x, i, t) writes an n x m matrix into `out`.
using MatrixField = std::function<void(const ConstVectorRef& x, ModeIndex mode, double t, MatrixRef out)>;

struct HybridModelSpec {
  std::string name;
  int dimension = 1;
  int modes = 1;
  int brownian_dim = 1;
  VectorField drift;
  MatrixField diffusion;
  VectorField control;  // empty means u == 0
  LipschitzBounds lipschitz;
  /// False for models that violate the global Lipschitz condition; the
  /// threshold calculus refuses such models and validate_model skips the
  /// Lipschitz ratios.
  bool globally_lipschitz = true;
};

/// Coefficient triple (f, g, u) of a hybrid SDE with Markovian switching.
///
/// Construction spot-checks that every coefficient vanishes at the origin in
/// each mode at t = 0 and t = 1, and that the maps return finite values there.
/// Instances are immutable and safe to share between threads.
class HybridModel {
 public:
  explicit HybridModel(HybridModelSpec spec);

  /// Skips the zero-condition spot check (dimensions are still checked), so
  /// that candidate models can be diagnosed with validate_model.
  static HybridModel unchecked(HybridModelSpec spec);

  const std::string& name() const { return spec_.name; }
  int dimension() const { return spec_.dimension; }
  int modes() const { return spec_.modes; }
  int brownian_dim() const { return spec_.brownian_dim; }
  const LipschitzBounds& lipschitz() const { return spec_.lipschitz; }
  bool globally_lipschitz() const { return spec_.globally_lipschitz; }
  bool has_control() const { return static_cast<bool>(spec_.control); }

  /// Same maps with different declared Lipschitz bounds.
  HybridModel with_lipschitz(const LipschitzBounds& bounds) const;

  // Unchecked fast paths used by the integrator. `out` must be pre-sized.
  void drift_into(const ConstVectorRef& x, ModeIndex mode, double t, VectorRef out) const {
    spec_.drift(x, mode, t, out);
  }
  void diffusion_into(const ConstVectorRef& x, ModeIndex mode, double t, MatrixRef out) const {
    spec_.diffusion(x, mode, t, out);
  }
  void control_into(const ConstVectorRef& x, ModeIndex mode, double t, VectorRef out) const {
    if (spec_.control) {
      spec_.control(x, mode, t, out);
    } else {
      out.setZero();
    }
  }

  // Checked evaluations: validate dimensions and mode, throw
  // ModelEvaluationError on non-finite output.
  Vector drift(const Vector& x, ModeIndex mode, double t) const;
  Matrix diffusion(const Vector& x, ModeIndex mode, double t) const;
  Vector control(const Vector& x, ModeIndex mode, double t) const;

 private:
  HybridModel(HybridModelSpec spec, bool check_zero);

  HybridModelSpec spec_;
};

/// Initial data on [-tau, 0] sampled on the integration grid.
///
/// samples()[j] is the state at time -(S-1-j)*step where S = samples().size(),
/// so the last sample is x(0). Off-grid times are linearly interpolated.
class InitialSegment {
 public:
  InitialSegment(double step, std::vector<Vector> samples, ModeIndex initial_mode);

  /// Samples `history` on the grid covering [-delay, 0].
  static InitialSegment from_function(const std::function<Vector(double)>& history, double delay,
                                      double step, ModeIndex initial_mode);
  static InitialSegment constant(const Vector& state, double delay, double step, ModeIndex initial_mode);

  double step() const { return step_; }
  ModeIndex initial_mode() const { return initial_mode_; }
  const std::vector<Vector>& samples() const { return samples_; }
  int dimension() const { return static_cast<int>(samples_.back().size()); }
  /// Time span covered, (S-1)*step.
  double span() const { return step_ * static_cast<double>(samples_.size() - 1); }
  const Vector& current() const { return samples_.back(); }

  /// State at time theta in [-span(), 0].
  Vector at(double theta) const;

 private:
  double step_;
  std::vector<Vector> samples_;
  ModeIndex initial_mode_;
};

struct ValidationFlag {
  enum class Kind { zero_condition, lipschitz };
  Kind kind;
  std::string coefficient;  // "drift", "diffusion" or "control"
  ModeIndex mode;
  double observed = 0.0;
  double declared = 0.0;
  std::string detail;
};

struct ModeValidation {
  ModeIndex mode;
  double max_drift_at_zero = 0.0;
  double max_diffusion_at_zero = 0.0;
  double max_control_at_zero = 0.0;
  double max_drift_ratio = 0.0;
  double max_control_ratio = 0.0;
  double max_diffusion_ratio = 0.0;
};

struct ValidationReport {
  std::vector<ModeValidation> per_mode;
  std::vector<ValidationFlag> flags;
  bool lipschitz_checked = true;

  bool ok() const { return flags.empty(); }
};

/// Spot-checks the zero condition and the declared Lipschitz bounds.
///
/// Ratios |h(x)-h(y)|/|x-y| are sampled at `probe_count` random pairs per
/// mode (isotropic directions, log-uniform radii and separations) and flagged
/// when they exceed the declared bound by more than 1e-9 relative.
ValidationReport validate_model(const HybridModel& model, int probe_count, std::uint64_t rng_seed);

/// Frobenius norm, |A| = sqrt(trace(A^T A)).
double frobenius(const Matrix& a);

}  // namespace hsde
