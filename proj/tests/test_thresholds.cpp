#include "doctest.h"

#include "hsde/thresholds.hpp"
#include "k_oracle_values.hpp"

#include <cmath>
#include <random>

using namespace hsde;

namespace {

ThresholdInputs paper_inputs() {
  ThresholdInputs in;
  in.p = 0.99;
  in.lipschitz = {1.118034, 0.565, 0.5};
  in.M = 1.127816;
  in.gamma = 0.2278604;
  in.epsilon = 0.94;
  return in;
}

}  // namespace

TEST_SUITE("thresholds") {
  TEST_CASE("K1..K4 agree with the high-precision oracle") {
    for (const auto& c : kKOracle) {
      CAPTURE(c.p);
      CAPTURE(c.tau);
      const LipschitzBounds L{c.L1, c.L2, c.L3};
      CHECK(moment_bound_k1(c.p, c.tau, c.T, L) == doctest::Approx(c.k1).epsilon(1e-10));
      CHECK(sup_moment_bound_k2(c.p, c.tau, c.T, L) == doctest::Approx(c.k2).epsilon(1e-10));
      CHECK(increment_bound_k3(c.p, c.tau, c.T, L) == doctest::Approx(c.k3).epsilon(1e-10));
      CHECK(deviation_bound_k4(c.p, c.tau, c.T, L) == doctest::Approx(c.k4).epsilon(1e-10));
    }
  }

  TEST_CASE("BDG constant") {
    for (const auto& c : kCpOracle) {
      CAPTURE(c.p);
      CHECK(bdg_constant(c.p) == doctest::Approx(c.value).epsilon(1e-12));
    }
    CHECK(bdg_constant(2.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK_THROWS_AS(bdg_constant(1.5), InvalidArgument);
  }

  TEST_CASE("horizon T") {
    for (const auto& c : kHorizonOracle) {
      CHECK(horizon_T(c.p, c.M, c.gamma, c.epsilon) == doctest::Approx(c.T).epsilon(1e-12));
    }
    CHECK(horizon_T(0.99, 1.1278155, 0.2278604, 0.94) == doctest::Approx(0.7994283).epsilon(1e-6));
    CHECK_THROWS_AS(horizon_T(1.0, 1.0, 1.0, 1.5), InvalidArgument);
    CHECK_THROWS_AS(horizon_T(1.0, 0.5, 1.0, 0.9), InvalidArgument);
  }

  TEST_CASE("p_zero") {
    CHECK(p_zero(0.5) == 0.0);
    CHECK(p_zero(1.0) == 0.0);
    CHECK(p_zero(3.5) == 2.5);
  }

  TEST_CASE("K3 and K4 vanish at zero delay, K1 and K2 do not") {
    const LipschitzBounds L{1.0, 0.5, 0.7};
    for (double p : {0.5, 1.0, 2.0, 3.0}) {
      CHECK(increment_bound_k3(p, 0.0, 1.0, L) == 0.0);
      CHECK(deviation_bound_k4(p, 0.0, 1.0, L) == 0.0);
      CHECK(moment_bound_k1(p, 0.0, 1.0, L) > 1.0);
      CHECK(sup_moment_bound_k2(p, 0.0, 1.0, L) > 0.0);
    }
  }

  TEST_CASE("bounds increase in tau, T and each Lipschitz constant") {
    const LipschitzBounds L{1.0, 0.5, 0.7};
    for (double p : {0.7, 2.0, 3.5}) {
      CAPTURE(p);
      double prev[4] = {0, 0, 0, 0};
      for (double tau = 0.01; tau < 1.0; tau *= 1.7) {
        const double k[4] = {moment_bound_k1(p, tau, 1.0, L), sup_moment_bound_k2(p, tau, 1.0, L),
                             increment_bound_k3(p, tau, 1.0, L), deviation_bound_k4(p, tau, 1.0, L)};
        for (int j = 0; j < 4; ++j) {
          CHECK(k[j] > prev[j]);
          prev[j] = k[j];
        }
      }
      CHECK(deviation_bound_k4(p, 0.1, 2.0, L) > deviation_bound_k4(p, 0.1, 1.0, L));
      CHECK(deviation_bound_k4(p, 0.1, 1.0, {2.0, 0.5, 0.7}) > deviation_bound_k4(p, 0.1, 1.0, L));
      CHECK(deviation_bound_k4(p, 0.1, 1.0, {1.0, 1.0, 0.7}) > deviation_bound_k4(p, 0.1, 1.0, L));
      CHECK(deviation_bound_k4(p, 0.1, 1.0, {1.0, 0.5, 1.4}) > deviation_bound_k4(p, 0.1, 1.0, L));
    }
  }

  TEST_CASE("orders below 2 use the order-2 bound raised to p/2") {
    const LipschitzBounds L{0.8, 0.3, 0.6};
    for (double p : {0.3, 0.99, 1.5}) {
      CHECK(moment_bound_k1(p, 0.1, 1.0, L) == doctest::Approx(std::pow(moment_bound_k1(2.0, 0.1, 1.0, L), p / 2)));
      CHECK(increment_bound_k3(p, 0.1, 1.0, L) ==
            doctest::Approx(std::pow(increment_bound_k3(2.0, 0.1, 1.0, L), p / 2)));
    }
  }

  TEST_CASE("phi is increasing in tau for random inputs") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      ThresholdInputs in;
      in.p = 0.2 + 4.0 * unit(gen);
      in.lipschitz = {0.05 + 2.0 * unit(gen), 0.05 + 2.0 * unit(gen), 0.05 + 2.0 * unit(gen)};
      in.M = 1.0 + 3.0 * unit(gen);
      in.gamma = 0.1 + 2.0 * unit(gen);
      in.epsilon = 0.05 + 0.9 * unit(gen);
      const double T = horizon_T(in.p, in.M, in.gamma, in.epsilon);
      double prev = delay_root_function(in, T, 0.0);
      CHECK(prev == doctest::Approx(in.epsilon - 1.0));
      for (double tau = 1e-6; tau < 10.0; tau *= 3.0) {
        const double v = delay_root_function(in, T, tau);
        CHECK(v >= prev);
        prev = v;
      }
    }
  }

  TEST_CASE("tau* for the worked example") {
    const ThresholdResult r = tau_star(paper_inputs());
    CHECK(r.T == doctest::Approx(0.7994283).epsilon(1e-6));
    CHECK(r.tau_star == doctest::Approx(2.93e-6).epsilon(0.02));
    CHECK(std::abs(r.residual) <= 1e-9);
    CHECK(r.lambda > 0.0);
  }

  TEST_CASE("tau* is a root: phi changes sign across it") {
    const ThresholdInputs in = paper_inputs();
    const ThresholdResult r = tau_star(in);
    CHECK(delay_root_function(in, r.T, 0.999 * r.tau_star) < 0.0);
    CHECK(delay_root_function(in, r.T, 1.001 * r.tau_star) > 0.0);
  }

  TEST_CASE("decay rate round trip") {
    const ThresholdInputs in = paper_inputs();
    const ThresholdResult r = tau_star(in);
    for (double frac : {0.1, 0.5, 0.9}) {
      const double tau = frac * r.tau_star;
      const DecayRate d = decay_rate(in, tau);
      CHECK(d.lambda > 0.0);
      CHECK(d.almost_sure_rate == doctest::Approx(d.lambda / (2 * in.p)));
      const double factor = std::exp(-d.lambda * (tau + r.T));
      CHECK(factor - 1.0 == doctest::Approx(delay_root_function(in, r.T, tau)).epsilon(1e-9));
    }
    CHECK(decay_rate(in, 0.1 * r.tau_star).lambda > decay_rate(in, 0.9 * r.tau_star).lambda);
    CHECK_THROWS_AS(decay_rate(in, 2.0 * r.tau_star), InvalidArgument);
  }

  TEST_CASE("epsilon near one drives tau* to zero") {
    ThresholdInputs in = paper_inputs();
    const double base = tau_star(in).tau_star;
    double prev = base;
    for (double gap : {1e-2, 1e-3, 1e-4, 1e-6}) {
      in.epsilon = 1.0 - gap;
      const double t = tau_star(in).tau_star;
      CHECK(t > 0.0);
      CHECK(t < prev);
      prev = t;
    }
    CHECK(prev < 1e-3 * base);
  }

  TEST_CASE("doubling L2 decreases tau*") {
    ThresholdInputs in = paper_inputs();
    const double base = tau_star(in).tau_star;
    in.lipschitz.control *= 2.0;
    CHECK(tau_star(in).tau_star < base);
  }

  TEST_CASE("input validation") {
    ThresholdInputs in = paper_inputs();
    in.epsilon = 1.5;
    CHECK_THROWS_AS(tau_star(in), InvalidArgument);
    in = paper_inputs();
    in.gamma = 0.0;
    CHECK_THROWS_AS(tau_star(in), InvalidArgument);
    in = paper_inputs();
    in.lipschitz = {0, 0, 0};
    CHECK_THROWS_AS(tau_star(in), InvalidArgument);
    CHECK_THROWS_AS(moment_bound_k1(2.0, -0.1, 1.0, {1, 1, 1}), InvalidArgument);
  }

  TEST_CASE("bounds past the log cap are reported as +inf") {
    const LipschitzBounds L{10.0, 1.0, 1.0};
    const double log_k1 = log_moment_bound_k1(2.0, 0.1, 100.0, L);
    CHECK(std::isfinite(log_k1));
    CHECK(log_k1 > kDefaultLogCap);
    CHECK(std::isinf(moment_bound_k1(2.0, 0.1, 100.0, L)));
    CHECK(moment_bound_k1(2.0, 0.1, 100.0, L, 1e6) == std::exp(log_k1));
    ThresholdInputs in = paper_inputs();
    in.lipschitz = L;
    CHECK(std::isinf(delay_root_function(in, 100.0, 0.1)));
  }

  TEST_CASE("huge constants still bracket a root or raise OverflowError") {
    ThresholdInputs in = paper_inputs();
    in.lipschitz = {1e6, 1e6, 1e6};
    in.gamma = 1e-6;
    try {
      const ThresholdResult r = tau_star(in);
      CHECK(r.tau_star > 0.0);
      CHECK(r.tau_star < 1e-8);
    } catch (const OverflowError&) {
      CHECK(true);
    }
  }

  TEST_CASE("sweep over p and epsilon") {
    const LipschitzFn lipschitz = [](double) { return LipschitzBounds{1.118034, 0.565, 0.5}; };
    const MomentCertificateFn cert = [](double) { return std::pair{1.127816, 0.2278604}; };
    const std::vector<double> ps = {0.5, 0.99, 2.0};
    const std::vector<double> eps = {0.5, 0.94, 0.99};
    const TauStarSweep sweep = optimize_tau_star(lipschitz, cert, ps, eps);
    REQUIRE(sweep.table.size() == 9);
    CHECK(sweep.table[3].p == 0.99);
    CHECK(sweep.table[3].epsilon == 0.5);
    double best = 0.0;
    for (const auto& pt : sweep.table) {
      if (pt.result) best = std::max(best, pt.result->tau_star);
    }
    REQUIRE(sweep.best_point().result);
    CHECK(sweep.best_point().result->tau_star == best);
    const TauStarSweep again = optimize_tau_star(lipschitz, cert, ps, eps, {}, 1);
    CHECK(again.best == sweep.best);
    CHECK(again.best_point().result->tau_star == best);
  }

  TEST_CASE("sweep keeps infeasible points and rejects an all-infeasible grid") {
    const LipschitzFn lipschitz = [](double) { return LipschitzBounds{1.0, 0.5, 0.5}; };
    const MomentCertificateFn cert = [](double p) {
      if (p > 1.5) throw InvalidArgument("no certificate");
      return std::pair{1.0, 1.0};
    };
    const TauStarSweep sweep = optimize_tau_star(lipschitz, cert, {1.0, 2.0}, {0.5});
    REQUIRE(sweep.table.size() == 2);
    CHECK(sweep.table[0].result.has_value());
    CHECK_FALSE(sweep.table[1].result.has_value());
    CHECK_FALSE(sweep.table[1].failure.empty());
    CHECK(sweep.best == 0);
    CHECK_THROWS_AS(optimize_tau_star(lipschitz, cert, {2.0, 3.0}, {0.5}), Error);
    CHECK_THROWS_AS(optimize_tau_star(lipschitz, cert, {1.0}, {1.0}), InvalidArgument);
  }
}
