#pragma once

#include "hsde/core.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hsde {

/// Raised when a bound overflows while bracketing the delay root.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Inputs of the delay-threshold calculus.
struct ThresholdInputs {
  double p = 0.0;        // moment order, > 0
  LipschitzBounds lipschitz;
  double M = 0.0;        // moment bound coefficient of the undelayed system, > 0
  double gamma = 0.0;    // its moment decay rate, > 0
  double epsilon = 0.0;  // contraction target, in (0, 1)

  /// Throws InvalidArgument naming the first violated precondition.
  void validate() const;
};

struct ThresholdResult {
  double T = 0.0;
  double tau_star = 0.0;
  double lambda = 0.0;    // pth-moment decay rate at (just below) tau_star
  double residual = 0.0;  // phi(tau_star)
  int iterations = 0;
};

/// Log-space cap: a bound whose logarithm exceeds it is reported as +inf.
inline constexpr double kDefaultLogCap = 700.0;

/// max(0, p - 1).
double p_zero(double p);

/// Burkholder-Davis-Gundy type constant (p^{p+1} / (2 (p-1)^{p-1}))^{p/2}, p >= 2.
double bdg_constant(double p);

// The four Gronwall-type constants. Orders p >= 2 use the "p >= 2" formulas
// (including p = 2); p in (0, 2) uses the order-2 bound raised to p/2.
// The log_ variants return log(K) (-inf when K = 0); the plain variants
// return exp(log K), or +inf when log K > log_cap.

/// K1: moment growth over [t0, t0 + T + tau].
double log_moment_bound_k1(double p, double tau, double T, const LipschitzBounds& L);
double moment_bound_k1(double p, double tau, double T, const LipschitzBounds& L, double log_cap = kDefaultLogCap);

/// K2: bound on the expected running supremum.
double log_sup_moment_bound_k2(double p, double tau, double T, const LipschitzBounds& L);
double sup_moment_bound_k2(double p, double tau, double T, const LipschitzBounds& L,
                           double log_cap = kDefaultLogCap);

/// K3: bound on the increment over a window of length tau.
double log_increment_bound_k3(double p, double tau, double T, const LipschitzBounds& L);
double increment_bound_k3(double p, double tau, double T, const LipschitzBounds& L,
                          double log_cap = kDefaultLogCap);

/// K4: deviation between the delayed and the undelayed controlled solutions.
double log_deviation_bound_k4(double p, double tau, double T, const LipschitzBounds& L);
double deviation_bound_k4(double p, double tau, double T, const LipschitzBounds& L,
                          double log_cap = kDefaultLogCap);

/// T = log(2^{2 p0} M / epsilon) / gamma. Throws InvalidArgument if T <= 0.
double horizon_T(double p, double M, double gamma, double epsilon);

/// phi(tau) = 2^{p0} (2^{p0} K4 + K3) - (1 - epsilon); +inf past the log cap.
double delay_root_function(const ThresholdInputs& in, double T, double tau, double log_cap = kDefaultLogCap);

struct DecayRate {
  double lambda = 0.0;           // pth-moment exponential rate
  double almost_sure_rate = 0.0; // lambda / (2p), the pathwise rate bound
};

/// lambda = -log(epsilon + 2^{p0}(2^{p0} K4 + K3)) / (tau + T).
/// Throws InvalidArgument when the contraction factor is >= 1 (tau >= tau*).
DecayRate decay_rate(const ThresholdInputs& in, double tau);

struct TauStarOptions {
  double tol = 1e-9;  // relative bracket width on tau*
  double log_cap = kDefaultLogCap;
  int max_iterations = 400;
};

/// Largest admissible feedback delay: the root of phi on tau > 0, found by
/// doubling an upper bracket from 1e-8 and bisecting.
ThresholdResult tau_star(const ThresholdInputs& in, const TauStarOptions& opts = {});

struct TauStarGridPoint {
  double p = 0.0;
  double epsilon = 0.0;
  double M = 0.0;
  double gamma = 0.0;
  std::optional<ThresholdResult> result;  // empty when infeasible
  std::string failure;
};

struct TauStarSweep {
  std::vector<TauStarGridPoint> table;  // p-major, in grid order
  std::size_t best = 0;                 // index into table

  const TauStarGridPoint& best_point() const { return table[best]; }
};

/// Per-p moment certificate used by the sweep: returns (M, gamma).
using MomentCertificateFn = std::function<std::pair<double, double>(double p)>;
/// Per-p Lipschitz bounds (the control gain, and hence L2, may depend on p).
using LipschitzFn = std::function<LipschitzBounds(double p)>;

/// Exhaustive evaluation over p_grid x epsilon_grid. The argmax maximises
/// tau*, breaking ties toward smaller epsilon, then smaller p. Throws Error
/// if every point is infeasible.
TauStarSweep optimize_tau_star(const LipschitzFn& lipschitz, const MomentCertificateFn& certificate,
                               const std::vector<double>& p_grid, const std::vector<double>& epsilon_grid,
                               const TauStarOptions& opts = {}, unsigned workers = 0);

}  // namespace hsde
