#include "hsde/thresholds.hpp"

#include "hsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace hsde {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow; -inf encodes a zero term.
double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// log(a^p + b^p) for a, b >= 0.
double log_power_sum(double a, double b, double p) { return log_add(p * safe_log(a), p * safe_log(b)); }

double capped_exp(double log_value, double log_cap) {
  if (log_value > log_cap) return std::numeric_limits<double>::infinity();
  return std::exp(log_value);
}

void check_common(double p, double tau, double T) {
  if (!(p > 0.0)) throw InvalidArgument("moment order p must be > 0");
  if (!(tau >= 0.0)) throw InvalidArgument("delay tau must be >= 0");
  if (!(T >= 0.0)) throw InvalidArgument("horizon T must be >= 0");
}

}  // namespace

void ThresholdInputs::validate() const {
  if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("p must be a finite number > 0");
  lipschitz.validate();
  if (!(M > 0.0) || !std::isfinite(M)) throw InvalidArgument("M must be a finite number > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be a finite number > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
}

double p_zero(double p) {
  if (!(p > 0.0)) throw InvalidArgument("p must be > 0");
  return std::max(0.0, p - 1.0);
}

double bdg_constant(double p) {
  if (!(p >= 2.0)) throw InvalidArgument("the BDG constant is defined for p >= 2");
  const double log_inner = (p + 1.0) * std::log(p) - std::log(2.0) - (p - 1.0) * std::log(p - 1.0);
  return std::exp(0.5 * p * log_inner);
}

double log_moment_bound_k1(double p, double tau, double T, const LipschitzBounds& L) {
  check_common(p, tau, T);
  const double rate = L.drift + L.control + 0.5 * L.diffusion * L.diffusion * std::max(1.0, p - 1.0);
  return std::min(1.0, 0.5 * p) * std::log1p(tau) + p * (T + tau) * rate;
}

double log_sup_moment_bound_k2(double p, double tau, double T, const LipschitzBounds& L) {
  check_common(p, tau, T);
  const double log_span = safe_log(T + tau);
  if (p >= 2.0) {
    double log_bracket = log_add(0.0, log_power_sum(L.drift, L.control, p) + p * log_span);
    log_bracket = log_add(log_bracket, std::log(bdg_constant(p)) + p * safe_log(L.diffusion) + 0.5 * p * log_span);
    return (p - 1.0) * std::log(4.0) + log_moment_bound_k1(p, tau, T, L) + log_bracket;
  }
  const double log_bracket = log_add(log_power_sum(L.drift, L.control, 2.0) + 2.0 * log_span,
                                     2.0 * safe_log(L.diffusion) + log_span);
  return 0.5 * p * (std::log(4.0) + log_moment_bound_k1(2.0, tau, T, L) + log_bracket);
}

double log_increment_bound_k3(double p, double tau, double T, const LipschitzBounds& L) {
  check_common(p, tau, T);
  const double log_tau = safe_log(tau);
  if (p >= 2.0) {
    const double log_bracket = log_add(log_power_sum(L.drift, L.control, p) + p * log_tau,
                                       std::log(bdg_constant(p)) + p * safe_log(L.diffusion) + 0.5 * p * log_tau);
    if (log_bracket == kNegInf) return kNegInf;
    return (p - 1.0) * std::log(3.0) + log_moment_bound_k1(p, tau, T, L) + log_bracket;
  }
  const double log_bracket = log_add(log_power_sum(L.drift, L.control, 2.0) + 2.0 * log_tau,
                                     std::log(4.0) + 2.0 * safe_log(L.diffusion) + log_tau);
  if (log_bracket == kNegInf) return kNegInf;
  return 0.5 * p * (std::log(3.0) + log_moment_bound_k1(2.0, tau, T, L) + log_bracket);
}

double log_deviation_bound_k4(double p, double tau, double T, const LipschitzBounds& L) {
  check_common(p, tau, T);
  const double span = T + tau;
  if (p >= 2.0) {
    const double log_k3 = log_increment_bound_k3(p, tau, T, L);
    if (log_k3 == kNegInf || L.control == 0.0 || span == 0.0) return kNegInf;
    const double rate = p * L.drift + (2.0 * p - 1.0) * L.control + 0.5 * p * (p - 1.0) * L.diffusion * L.diffusion;
    return std::log(L.control) + std::log(span) + log_k3 + rate * span;
  }
  const double log_k3 = log_increment_bound_k3(2.0, tau, T, L);
  if (log_k3 == kNegInf || L.control == 0.0 || span == 0.0) return kNegInf;
  const double rate = 2.0 * L.drift + 3.0 * L.control + L.diffusion * L.diffusion;
  return 0.5 * p * (std::log(L.control) + std::log(span) + log_k3 + rate * span);
}

double moment_bound_k1(double p, double tau, double T, const LipschitzBounds& L, double log_cap) {
  return capped_exp(log_moment_bound_k1(p, tau, T, L), log_cap);
}
double sup_moment_bound_k2(double p, double tau, double T, const LipschitzBounds& L, double log_cap) {
  return capped_exp(log_sup_moment_bound_k2(p, tau, T, L), log_cap);
}
double increment_bound_k3(double p, double tau, double T, const LipschitzBounds& L, double log_cap) {
  return capped_exp(log_increment_bound_k3(p, tau, T, L), log_cap);
}
double deviation_bound_k4(double p, double tau, double T, const LipschitzBounds& L, double log_cap) {
  return capped_exp(log_deviation_bound_k4(p, tau, T, L), log_cap);
}

double horizon_T(double p, double M, double gamma, double epsilon) {
  if (!(p > 0.0)) throw InvalidArgument("p must be > 0");
  if (!(M > 0.0)) throw InvalidArgument("M must be > 0");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  const double T = (2.0 * p_zero(p) * std::numbers::ln2 + std::log(M) - std::log(epsilon)) / gamma;
  if (!(T > 0.0)) {
    throw InvalidArgument("horizon T = " + std::to_string(T) + " is not positive: epsilon too large relative to M");
  }
  return T;
}

namespace {

// log(2^{p0} (2^{p0} K4 + K3)).
double log_contraction_excess(const ThresholdInputs& in, double T, double tau) {
  const double p0 = p_zero(in.p);
  return log_add(2.0 * p0 * std::numbers::ln2 + log_deviation_bound_k4(in.p, tau, T, in.lipschitz),
                 p0 * std::numbers::ln2 + log_increment_bound_k3(in.p, tau, T, in.lipschitz));
}

}  // namespace

double delay_root_function(const ThresholdInputs& in, double T, double tau, double log_cap) {
  const double log_lhs = log_contraction_excess(in, T, tau);
  if (std::isnan(log_lhs)) return log_lhs;
  if (log_lhs > log_cap) return std::numeric_limits<double>::infinity();
  return std::exp(log_lhs) - (1.0 - in.epsilon);
}

DecayRate decay_rate(const ThresholdInputs& in, double tau) {
  in.validate();
  if (!(tau >= 0.0)) throw InvalidArgument("tau must be >= 0");
  const double T = horizon_T(in.p, in.M, in.gamma, in.epsilon);
  const double excess = delay_root_function(in, T, tau, kDefaultLogCap);
  // contraction factor = 1 + excess; it must be < 1.
  if (!(excess < 0.0)) {
    throw InvalidArgument("contraction factor >= 1: tau = " + std::to_string(tau) + " is not below tau*");
  }
  DecayRate out;
  out.lambda = -std::log1p(excess) / (tau + T);
  out.almost_sure_rate = out.lambda / (2.0 * in.p);
  return out;
}

ThresholdResult tau_star(const ThresholdInputs& in, const TauStarOptions& opts) {
  in.validate();
  if (!(opts.tol > 0.0)) throw InvalidArgument("tol must be > 0");
  if (in.lipschitz.control == 0.0 && in.lipschitz.drift == 0.0 && in.lipschitz.diffusion == 0.0) {
    throw InvalidArgument("all Lipschitz bounds are zero: every delay is admissible");
  }
  ThresholdResult out;
  out.T = horizon_T(in.p, in.M, in.gamma, in.epsilon);

  auto phi = [&](double tau) {
    const double v = delay_root_function(in, out.T, tau, opts.log_cap);
    if (std::isnan(v)) throw OverflowError("bound evaluation is not finite at tau = " + std::to_string(tau));
    return v;
  };

  double lo = 0.0;
  double hi = 1e-8;
  while (!(phi(hi) > 0.0)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw OverflowError("no sign change of the delay root function below tau = 1e300");
  }
  int it = 0;
  while (hi - lo > opts.tol * hi && it < opts.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (phi(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++it;
  }
  out.iterations = it;
  out.tau_star = 0.5 * (lo + hi);
  out.residual = phi(out.tau_star);
  // lo keeps phi < 0, so the contraction factor there is strictly below one.
  out.lambda = decay_rate(in, lo).lambda;
  return out;
}

TauStarSweep optimize_tau_star(const LipschitzFn& lipschitz, const MomentCertificateFn& certificate,
                               const std::vector<double>& p_grid, const std::vector<double>& epsilon_grid,
                               const TauStarOptions& opts, unsigned workers) {
  if (p_grid.empty() || epsilon_grid.empty()) throw InvalidArgument("sweep grids must be non-empty");
  for (double e : epsilon_grid) {
    if (!(e > 0.0 && e < 1.0)) throw InvalidArgument("epsilon grid values must lie in (0, 1)");
  }
  for (double p : p_grid) {
    if (!(p > 0.0)) throw InvalidArgument("p grid values must be > 0");
  }
  TauStarSweep sweep;
  sweep.table.resize(p_grid.size() * epsilon_grid.size());
  parallel_for(sweep.table.size(), workers, [&](std::size_t k) {
    TauStarGridPoint& point = sweep.table[k];
    point.p = p_grid[k / epsilon_grid.size()];
    point.epsilon = epsilon_grid[k % epsilon_grid.size()];
    try {
      const auto [M, gamma] = certificate(point.p);
      point.M = M;
      point.gamma = gamma;
      ThresholdInputs in{point.p, lipschitz(point.p), M, gamma, point.epsilon};
      point.result = tau_star(in, opts);
    } catch (const Error& e) {
      point.failure = e.what();
    }
  });

  bool found = false;
  for (std::size_t k = 0; k < sweep.table.size(); ++k) {
    const auto& cand = sweep.table[k];
    if (!cand.result) continue;
    if (!found) {
      sweep.best = k;
      found = true;
      continue;
    }
    const auto& best = sweep.table[sweep.best];
    const double a = cand.result->tau_star;
    const double b = best.result->tau_star;
    if (a > b || (a == b && (cand.epsilon < best.epsilon || (cand.epsilon == best.epsilon && cand.p < best.p)))) {
      sweep.best = k;
    }
  }
  if (!found) throw Error("every grid point is infeasible");
  return sweep;
}

}  // namespace hsde
