#pragma once

#include "hsde/core.hpp"
#include "hsde/markov.hpp"
#include "hsde/rng.hpp"

#include <optional>
#include <vector>

namespace hsde {

/// Rejection of the M-matrix test, with the reason.
class NotMMatrix : public Error {
 public:
  enum class Reason { not_z_matrix, singular, nonpositive_theta };

  NotMMatrix(Reason reason, const std::string& what) : Error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

/// Proof data that the undelayed controlled system is pth-moment
/// exponentially stable: E|y(t)|^p <= M E|y(t0)|^p exp(-gamma (t - t0)).
/// The Lyapunov function behind it is V(x, i) = theta_i |x|^p.
struct MMatrixCertificate {
  Matrix A;
  Vector theta;       // A^{-1} 1, all entries > 0
  double beta1 = 0.0; // min theta
  double beta2 = 0.0; // max theta
  double M = 0.0;     // beta2 / beta1
  double gamma = 0.0; // 1 / beta2
  double residual = 0.0;  // |A theta - 1|_inf
};

/// diag(alpha) - Gamma.
Matrix build_A(const Vector& alpha, const GeneratorMatrix& gen);

/// Solves A theta = 1 and accepts iff every theta_i > 0. Among Z-matrices
/// this characterises nonsingular M-matrices exactly.
MMatrixCertificate certify_M_matrix(const Matrix& A);

/// Left-hand side of the pointwise Lyapunov condition at (x, i, t) for the
/// undelayed controlled system:
///   p/|x|^2 (x^T (f + u) + |g|^2 / 2) - p (2 - p) / (2 |x|^4) |x^T g|^2.
/// Throws InvalidArgument for x = 0.
double stability_form(const HybridModel& model, const Vector& x, ModeIndex mode, double t, double p);

struct FalsificationWitness {
  Vector x;
  ModeIndex mode;
  double t = 0.0;
  double excess = 0.0;  // stability_form + alpha_i
};

struct FalsificationReport {
  std::size_t samples = 0;
  std::vector<double> max_excess;                  // per mode, max of stability_form + alpha_i
  std::vector<FalsificationWitness> worst;         // per mode, argmax sample
  std::optional<FalsificationWitness> violation;   // worst sample with excess > 1e-9, if any

  bool falsified() const { return violation.has_value(); }
};

/// Samples states on isotropic directions with log-uniform radii in
/// [1e-6, 1e6] and times log-uniform in [1e-6, 1e3]. A clean report is not a
/// proof of the margin condition.
FalsificationReport falsify_alpha(const HybridModel& model, const Vector& alpha, double p, std::size_t sample_count,
                                  std::uint64_t seed, unsigned workers = 0);

}  // namespace hsde
