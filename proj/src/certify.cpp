#include "hsde/certify.hpp"

#include "hsde/parallel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hsde {

Matrix build_A(const Vector& alpha, const GeneratorMatrix& gen) {
  if (alpha.size() != gen.size()) {
    throw InvalidArgument("alpha has " + std::to_string(alpha.size()) + " entries but the generator has " +
                          std::to_string(gen.size()) + " modes");
  }
  Matrix A = -gen.entries();
  A.diagonal() += alpha;
  return A;
}

MMatrixCertificate certify_M_matrix(const Matrix& A) {
  if (A.rows() < 1 || A.rows() != A.cols()) throw InvalidArgument("A must be a non-empty square matrix");
  if (!A.allFinite()) throw InvalidArgument("A must be finite");
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (i != j && A(i, j) > 0.0) {
        std::ostringstream os;
        os << "not a Z-matrix: A(" << i + 1 << "," << j + 1 << ") = " << A(i, j) << " > 0";
        throw NotMMatrix(NotMMatrix::Reason::not_z_matrix, os.str());
      }
    }
  }
  Eigen::FullPivLU<Matrix> lu(A);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw NotMMatrix(NotMMatrix::Reason::singular, "A is singular");
  }
  const Vector ones = Vector::Ones(A.rows());
  Vector theta = lu.solve(ones);
  theta += lu.solve(ones - A * theta);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!(theta[i] > 0.0)) {
      std::ostringstream os;
      os << "not an M-matrix: theta_" << i + 1 << " = " << theta[i] << " <= 0";
      throw NotMMatrix(NotMMatrix::Reason::nonpositive_theta, os.str());
    }
  }
  MMatrixCertificate cert;
  cert.A = A;
  cert.theta = theta;
  cert.beta1 = theta.minCoeff();
  cert.beta2 = theta.maxCoeff();
  cert.M = cert.beta2 / cert.beta1;
  cert.gamma = 1.0 / cert.beta2;
  cert.residual = (A * theta - ones).lpNorm<Eigen::Infinity>();
  return cert;
}

double stability_form(const HybridModel& model, const Vector& x, ModeIndex mode, double t, double p) {
  const double r2 = x.squaredNorm();
  if (!(r2 > 0.0)) throw InvalidArgument("stability form is undefined at x = 0");
  const Vector fu = model.drift(x, mode, t) + model.control(x, mode, t);
  const Matrix g = model.diffusion(x, mode, t);
  const double g2 = g.squaredNorm();
  const double xg2 = (x.transpose() * g).squaredNorm();
  return p / r2 * (x.dot(fu) + 0.5 * g2) - p * (2.0 - p) / (2.0 * r2 * r2) * xg2;
}

FalsificationReport falsify_alpha(const HybridModel& model, const Vector& alpha, double p, std::size_t sample_count,
                                  std::uint64_t seed, unsigned workers) {
  if (sample_count < 1) throw InvalidArgument("sample_count must be >= 1");
  if (alpha.size() != model.modes()) throw InvalidArgument("alpha length must equal the number of modes");
  const int n = model.dimension();
  const std::size_t modes = static_cast<std::size_t>(model.modes());

  // Each sample draws from its own substream; per-sample results are reduced
  // in index order so the report does not depend on `workers`.
  std::vector<FalsificationWitness> samples(sample_count * modes);
  parallel_for(sample_count, workers, [&](std::size_t s) {
    CounterRng rng(derive_key(seed, s, StreamPurpose::probe));
    Vector x(n);
    for (int k = 0; k < n; ++k) x[k] = rng.normal();
    const double radius = std::exp(std::log(1e-6) + std::log(1e12) * rng.uniform());
    x *= radius / x.norm();
    const double t = std::exp(std::log(1e-6) + std::log(1e9) * rng.uniform());
    for (std::size_t i = 0; i < modes; ++i) {
      const ModeIndex mode(static_cast<int>(i) + 1);
      const double excess = stability_form(model, x, mode, t, p) + alpha[static_cast<Eigen::Index>(i)];
      samples[s * modes + i] = {x, mode, t, excess};
    }
  });

  FalsificationReport report;
  report.samples = sample_count;
  report.max_excess.assign(modes, -std::numeric_limits<double>::infinity());
  report.worst.resize(modes);
  for (std::size_t s = 0; s < sample_count; ++s) {
    for (std::size_t i = 0; i < modes; ++i) {
      const auto& w = samples[s * modes + i];
      if (w.excess > report.max_excess[i]) {
        report.max_excess[i] = w.excess;
        report.worst[i] = w;
      }
    }
  }
  for (std::size_t i = 0; i < modes; ++i) {
    if (report.max_excess[i] > 1e-9 && (!report.violation || report.max_excess[i] > report.violation->excess)) {
      report.violation = report.worst[i];
    }
  }
  return report;
}

}  // namespace hsde
