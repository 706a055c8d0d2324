#pragma once

#include "hsde/certify.hpp"
#include "hsde/core.hpp"
#include "hsde/markov.hpp"
#include "hsde/simulate.hpp"

#include <array>
#include <optional>
#include <vector>

namespace hsde {

// ---------------------------------------------------------------------------
// Hybrid stochastic oscillator
//
//   z'' + (a_r + b_r dB/dt) z' + z + c_r sin z = 0,   x = (z, z'),
//
// stabilised by the structured feedback u(x, i) = (-d_i x_1, 0): only the
// first component is observed and controlled.
// ---------------------------------------------------------------------------

struct OscillatorParams {
  std::vector<double> a;  // damping
  std::vector<double> b;  // noise coupling on the velocity
  std::vector<double> c;  // amplitude of the sine nonlinearity
  std::vector<double> d;  // control gains, >= 0

  int modes() const { return static_cast<int>(a.size()); }
  /// Throws InvalidArgument unless all four vectors have the same nonzero
  /// length and the gains are nonnegative.
  void validate() const;

  /// Two-mode coefficients of the worked example, with gains d.
  static OscillatorParams reference(std::vector<double> d = {0.0, 0.0});
};

/// Two-mode generator of the worked example, [[-1, 1], [2, -2]].
GeneratorMatrix reference_generator();

/// Lipschitz constant of the oscillator drift quoted with the worked example.
/// It is below the true drift constant (see oscillator_lipschitz), and is
/// used only to reproduce the reference delay bound.
inline constexpr double kQuotedOscillatorDriftLipschitz = 1.118034;

/// f = (x2, -x1 - c_i sin x1 - a_i x2), g = (0, -b_i x2), u = (-d_i x1, 0).
/// Declares the bounds from oscillator_lipschitz unless `lipschitz` is given.
HybridModel oscillator_model(const OscillatorParams& params,
                             std::optional<LipschitzBounds> lipschitz = std::nullopt);

/// Gains placing both printed Q matrices on the design lines:
///   d1 = 0.564 - 0.08 p,  d2 = 0.5625 + 0.25 (1 - p).  Requires p in (0, 1).
std::array<double, 2> design_oscillator_gains(double p);

enum class QForm {
  /// Entry-wise formula in (a_i, b_i, c_i, d_i, p); valid for any parameters.
  general,
  /// The per-mode matrices as printed for the reference coefficients, as
  /// affine functions of (d_i, p). Requires OscillatorParams::reference
  /// values for a, b, c.
  printed,
};

/// 2x2 matrix Q_i with  stability_form <= (p/|x|^4) v^T Q_i v,  v = (x1^2, x2^2).
Matrix oscillator_Q(ModeIndex mode, double p, const OscillatorParams& params, QForm form = QForm::printed);

/// True iff v^T (Q + alpha J) v <= 0 for every v >= 0 (J all-ones). Exact for
/// 2x2, up to a rounding slack of 1e-12 relative to the largest entry.
bool quadrant_negativity(const Matrix& Q, double alpha);

/// Largest alpha with quadrant_negativity(Q, alpha), by bisection to 1e-14.
double max_quadrant_alpha(const Matrix& Q);

/// Rigorous bounds: L1 = max over modes and cos(x1) in [-1, 1] of the
/// spectral norm of the drift Jacobian, L2 = max d_i, L3 = max |b_i|.
LipschitzBounds oscillator_lipschitz(const OscillatorParams& params);

/// Bounds as quoted with the worked example: (1.118034, max d_i, max |b_i|).
LipschitzBounds quoted_oscillator_lipschitz(const OscillatorParams& params);

/// Design pipeline for the reference oscillator at moment order p:
/// gains -> Q_i -> alpha_i -> M-matrix certificate.
struct OscillatorDesign {
  double p = 0.0;
  std::array<double, 2> gains{};
  std::array<Matrix, 2> Q;
  Vector alpha;  // per-mode margins
  MMatrixCertificate certificate;
};

/// `alpha_decimals` >= 0 truncates the margins to that many decimals (the
/// truncated value is still admissible); -1 keeps them exact.
OscillatorDesign design_reference_oscillator(double p, QForm form = QForm::printed, int alpha_decimals = -1);

// ---------------------------------------------------------------------------
// Linear hybrid systems: f = A_i x, g = [G_i^1 x, ..., G_i^m x], u = -D_i x.
// ---------------------------------------------------------------------------

struct LinearModelParams {
  std::vector<Matrix> A;               // per mode, n x n
  std::vector<std::vector<Matrix>> G;  // per mode, m matrices n x n
  std::vector<Matrix> D;               // per mode, n x n (empty = no control)
};

/// Exact Lipschitz constants: max_i |A_i|_2, max_i |D_i|_2 and
/// max_i sqrt(lambda_max(sum_k G_i^k^T G_i^k)) (Frobenius norm on g).
LipschitzBounds linear_lipschitz(const LinearModelParams& params);

HybridModel linear_model(const LinearModelParams& params, std::optional<LipschitzBounds> lipschitz = std::nullopt);

// ---------------------------------------------------------------------------
// Scalar counterexample: dx = -x dt + x^2 dB, its cubic feedback -2 x^3, and
// the same feedback applied with delay epsilon. The coefficients are not
// globally Lipschitz, so the model is flagged and the threshold calculus
// does not apply to it.
// ---------------------------------------------------------------------------

enum class CounterexampleVariant { uncontrolled, controlled, delayed };

CounterexampleVariant parse_counterexample_variant(const std::string& name);

struct CounterexampleSystem {
  HybridModel model;
  ControlMode control_mode;
  double delay = 0.0;
};

CounterexampleSystem counterexample_model(CounterexampleVariant variant, double epsilon = 0.0);

/// Root z >= 2 of 0.5 - 2/z^2 = exp(-epsilon (2 + z^2 / 2)), by bisection.
double zbar(double epsilon);

struct CounterexampleParams {
  double epsilon = 0.0;
  double z_bar = 0.0;

  /// Checks z_bar >= 2 and the root residual <= 1e-10.
  void validate() const;
};

struct RiccatiValue {
  bool blown_up = false;
  double value = 0.0;  // valid when !blown_up
};

/// Closed-form solution of u' = -a u + u^2, u(0) = z^2, a = 2 + z^2/2.
RiccatiValue riccati_u(double t, double z_bar);

/// Time at which the closed form blows up: -log(1 - a / z^2) / a.
double riccati_blowup_time(double z_bar);

/// History on [-epsilon, 0]: plateau min(z, (z^2/8)^{1/3}) on [-eps, -eps/2],
/// linear ramp to z at 0.
std::function<Vector(double)> counterexample_history(double epsilon, double z_bar);

struct InstabilityReport {
  double epsilon = 0.0;
  double z_bar = 0.0;
  double blowup_time = 0.0;  // of the Riccati lower bound
  std::size_t paths = 0;
  std::size_t capped_before_epsilon = 0;
  double capped_fraction = 0.0;
  MomentEstimate delayed_second_moment;  // p = 2
  std::vector<double> riccati_times;
  std::vector<RiccatiValue> riccati_curve;
  MomentEstimate controlled_fourth_moment;    // p = 4, x0 = 1
  MomentEstimate uncontrolled_fourth_moment;  // p = 4, x0 = 1
  double controlled_bound_at_1 = 0.0;         // e^{-4}
};

struct InstabilityOptions {
  double step = 1e-5;
  std::size_t paths = 1000;
  double explosion_cap = 1e12;
  std::uint64_t seed = 1;
  double controlled_step = 1e-3;
  std::size_t controlled_paths = 10000;
  unsigned workers = 0;
};

/// Monte Carlo on the delayed system from the extremal history, next to the
/// Riccati lower bound, plus the 4th moment of the undelayed feedback system.
InstabilityReport demonstrate_instability(double epsilon, const InstabilityOptions& opts = {});

}  // namespace hsde
