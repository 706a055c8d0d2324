#include "hsde/markov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hsde {

GeneratorMatrix::GeneratorMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
    throw InvalidArgument("generator must be a non-empty square matrix");
  }
  if (!entries_.allFinite()) throw InvalidArgument("generator entries must be finite");
  for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
    for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
      if (i != j && entries_(i, j) < 0.0) {
        throw InvalidArgument("generator row " + std::to_string(i + 1) + ": negative off-diagonal rate");
      }
    }
    if (std::abs(entries_.row(i).sum()) > 1e-12) {
      throw InvalidArgument("generator row " + std::to_string(i + 1) + " does not sum to zero");
    }
  }
}

GeneratorMatrix GeneratorMatrix::from_row_major(const std::vector<double>& rates) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(rates.size()))));
  if (n < 1 || static_cast<std::size_t>(n * n) != rates.size()) {
    throw InvalidArgument("generator needs N*N entries, got " + std::to_string(rates.size()));
  }
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rates[static_cast<std::size_t>(i * n + j)];
  return GeneratorMatrix(std::move(m));
}

ModeIndex ModePath::at(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return modes[static_cast<std::size_t>(it - jump_times.begin())];
}

ModePath simulate_mode_path(const GeneratorMatrix& gen, ModeIndex initial, double horizon, CounterRng& rng) {
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  check_mode(initial, gen.size());
  ModePath path;
  path.horizon = horizon;
  path.modes.push_back(initial);
  ModeIndex current = initial;
  double t = 0.0;
  for (;;) {
    const double exit = gen.exit_rate(current);
    if (!(exit > 0.0)) break;  // absorbing
    t += rng.exponential(exit);
    if (t > horizon) break;
    // Inverse-CDF draw over the off-diagonal rates of the current row.
    double target = rng.uniform() * exit;
    ModeIndex next = current;
    for (int j = 1; j <= gen.size(); ++j) {
      const ModeIndex candidate(j);
      if (candidate == current) continue;
      const double r = gen.rate(current, candidate);
      if (r <= 0.0) continue;
      next = candidate;
      target -= r;
      if (target <= 0.0) break;
    }
    path.jump_times.push_back(t);
    path.modes.push_back(next);
    current = next;
  }
  return path;
}

Vector stationary_distribution(const GeneratorMatrix& gen) {
  const Eigen::Index n = gen.size();
  if (n == 1) return Vector::Ones(1);
  // pi Gamma = 0 with one balance equation replaced by normalisation.
  Matrix system = gen.entries().transpose();
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible() || lu.rcond() < 1e-13) throw Error("generator is reducible or numerically singular");
  Vector pi = lu.solve(rhs);
  if ((pi.array() <= 0.0).any()) throw Error("generator is reducible: stationary distribution not positive");
  // One refinement step keeps the residual at roundoff level.
  pi += lu.solve(rhs - system * pi);
  return pi;
}

Vector occupation_fractions(const ModePath& path, int mode_count) {
  Vector time = Vector::Zero(mode_count);
  double start = 0.0;
  for (std::size_t k = 0; k < path.modes.size(); ++k) {
    const double end = k < path.jump_times.size() ? path.jump_times[k] : path.horizon;
    time[static_cast<Eigen::Index>(path.modes[k].index())] += end - start;
    start = end;
  }
  return time / path.horizon;
}

}  // namespace hsde
