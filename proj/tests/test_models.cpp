#include "doctest.h"

#include "hsde/models.hpp"

#include <cmath>

using namespace hsde;

namespace {

const Vector kPaperAlpha = (Vector(2) << 0.3848, 0.0012).finished();

OscillatorParams designed() { return OscillatorParams::reference({0.4848, 0.5650}); }

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

double psi(double z, double eps) { return 0.5 - 2.0 / (z * z) - std::exp(-eps * (2.0 + 0.5 * z * z)); }

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("oscillator coefficients") {
    const HybridModel m = oscillator_model(designed());
    const Vector f = m.drift(vec({1, 2}), ModeIndex(1), 0.0);
    CHECK(f[0] == 2.0);
    CHECK(f[1] == doctest::Approx(-2.0841471).epsilon(1e-7));
    const Matrix g = m.diffusion(vec({3, 4}), ModeIndex(2), 0.0);
    CHECK(g(0, 0) == 0.0);
    CHECK(g(1, 0) == doctest::Approx(-2.0));
    const Vector u = m.control(vec({3, 4}), ModeIndex(2), 0.0);
    CHECK(u[0] == doctest::Approx(-3 * 0.565));
    CHECK(u[1] == 0.0);
  }

  TEST_CASE("oscillator parameter validation") {
    OscillatorParams p = designed();
    p.d = {0.1};
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p.d = {-0.1, 0.2};
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
  }

  TEST_CASE("gain design") {
    auto g = design_oscillator_gains(0.99);
    CHECK(g[0] == doctest::Approx(0.4848).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(0.5650).epsilon(1e-12));
    g = design_oscillator_gains(1.0 - 1e-12);
    CHECK(g[0] == doctest::Approx(0.484));
    CHECK(g[1] == doctest::Approx(0.5625));
    g = design_oscillator_gains(0.5);
    CHECK(g[0] == doctest::Approx(0.524));
    CHECK(g[1] == doctest::Approx(0.6875));
    CHECK_THROWS_AS(design_oscillator_gains(1.0), InvalidArgument);
    CHECK_THROWS_AS(design_oscillator_gains(0.0), InvalidArgument);
  }

  TEST_CASE("printed Q matrices at the designed gains") {
    const Matrix Q1 = oscillator_Q(ModeIndex(1), 0.99, designed());
    CHECK(Q1(0, 0) == doctest::Approx(-0.3848));
    CHECK(Q1(0, 1) == doctest::Approx(-0.4724));
    CHECK(Q1(1, 0) == Q1(0, 1));
    CHECK(std::abs(Q1(0, 0) - Q1(1, 1)) <= 1e-12);
    const Matrix Q2 = oscillator_Q(ModeIndex(2), 0.99, designed());
    CHECK(Q2(0, 0) == doctest::Approx(-0.4650));
    // The printed entries -0.0012 and -0.0013 are both roundings of -0.00125.
    CHECK(std::abs(Q2(0, 1) - (-0.0012)) <= 5e-5 + 1e-12);
    CHECK(std::abs(Q2(1, 1) - (-0.0013)) <= 5e-5 + 1e-12);
    OscillatorParams other = designed();
    other.a = {0.6, 0.1};
    CHECK_THROWS_AS(oscillator_Q(ModeIndex(1), 0.99, other), InvalidArgument);
  }

  TEST_CASE("general Q form") {
    OscillatorParams p{{0.0}, {0.0}, {0.3}, {0.3}};
    const Matrix Q = oscillator_Q(ModeIndex(1), 1.0, p, QForm::general);
    CHECK(Q(0, 0) == 0.0);
    CHECK(Q(1, 1) == doctest::Approx(0.3));
    p.c = {0.0};
    p.d = {0.0};
    const Matrix Z = oscillator_Q(ModeIndex(1), 1.0, p, QForm::general);
    CHECK(Z(0, 0) == 0.0);
    CHECK(Z(1, 1) == 0.0);
    const Matrix G = oscillator_Q(ModeIndex(1), 0.5, OscillatorParams{{0.5}, {0.4}, {0.1}, {0.2}}, QForm::general);
    CHECK(G(0, 0) == doctest::Approx(-0.1));
    CHECK(G(0, 1) == doctest::Approx(0.5 * (-0.5 + 0.04 - 0.2)));
    CHECK(G(1, 1) == doctest::Approx(0.1 - 0.5 - 0.25 * 0.16));
  }

  TEST_CASE("quadrant negativity") {
    const Matrix Q1 = oscillator_Q(ModeIndex(1), 0.99, designed());
    const Matrix Q2 = oscillator_Q(ModeIndex(2), 0.99, designed());
    CHECK(quadrant_negativity(Q1, 0.3848));
    CHECK(quadrant_negativity(Q2, 0.0012));
    CHECK_FALSE(quadrant_negativity(Q1, 0.39));
    CHECK_FALSE(quadrant_negativity(Q1, 0.3848 + 0.01));
    CHECK_FALSE(quadrant_negativity(Q2, 0.0012 + 0.01));
    // Positive off-diagonal: needs r12^2 <= r11 r22.
    const Matrix P = (Matrix(2, 2) << -1, 0.5, 0.5, -1).finished();
    CHECK(quadrant_negativity(P, 0.0));
    CHECK(quadrant_negativity(P, 0.25));
    CHECK_FALSE(quadrant_negativity(P, 0.3));
    CHECK(max_quadrant_alpha(P) == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("quadrant negativity agrees with a dense simplex grid") {
    const Matrix Q1 = oscillator_Q(ModeIndex(1), 0.99, designed());
    for (double alpha : {0.3, 0.3848, 0.386, 0.5}) {
      double worst = -1e300;
      for (int k = 0; k <= 1000; ++k) {
        const double s = k / 1000.0;
        const Vector v = vec({s, 1.0 - s});
        worst = std::max(worst, v.dot((Q1 + alpha * Matrix::Ones(2, 2)) * v));
      }
      CHECK(quadrant_negativity(Q1, alpha) == (worst <= 1e-12));
    }
  }

  TEST_CASE("margins and the certified design pipeline") {
    const OscillatorDesign d = design_reference_oscillator(0.99, QForm::printed, 4);
    CHECK(d.alpha[0] == doctest::Approx(0.3848).epsilon(1e-12));
    CHECK(d.alpha[1] == doctest::Approx(0.0012).epsilon(1e-12));
    for (int i = 0; i < 2; ++i) CHECK(quadrant_negativity(d.Q[static_cast<std::size_t>(i)], d.alpha[i]));
    CHECK(d.certificate.M == doctest::Approx(1.127816).epsilon(5e-6));
    CHECK(d.certificate.gamma == doctest::Approx(0.2278604).epsilon(5e-6));
    const OscillatorDesign exact = design_reference_oscillator(0.99, QForm::printed, -1);
    for (int i = 0; i < 2; ++i) {
      CHECK(d.alpha[i] <= exact.alpha[i] + 1e-12);
      CHECK(exact.alpha[i] - d.alpha[i] < 1e-4);
    }
  }

  TEST_CASE("oscillator Lipschitz bounds") {
    const LipschitzBounds quoted = quoted_oscillator_lipschitz(designed());
    CHECK(quoted.drift == 1.118034);
    CHECK(quoted.control == doctest::Approx(0.565));
    CHECK(quoted.diffusion == doctest::Approx(0.5));
    const LipschitzBounds rigorous = oscillator_lipschitz(designed());
    CHECK(rigorous.drift > quoted.drift);
    CHECK(rigorous.control == doctest::Approx(0.565));
    const LipschitzBounds zero = oscillator_lipschitz(OscillatorParams{{0, 0}, {0, 0}, {0, 0}, {0, 0}});
    CHECK(zero.drift == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(zero.control == 0.0);
    CHECK(zero.diffusion == 0.0);
    CHECK(oscillator_lipschitz(OscillatorParams::reference({0.1, 0.9})).control == 0.9);
  }

  TEST_CASE("linear models") {
    LinearModelParams params;
    params.A = {(Matrix(2, 2) << 0, 1, -1, 0).finished(), (Matrix(2, 2) << -2, 0, 0, -1).finished()};
    params.G = {{Matrix::Identity(2, 2) * 0.3, Matrix::Identity(2, 2) * 0.4}, {Matrix::Zero(2, 2), Matrix::Zero(2, 2)}};
    params.D = {Matrix::Identity(2, 2), Matrix::Identity(2, 2) * 3.0};
    const LipschitzBounds L = linear_lipschitz(params);
    CHECK(L.drift == doctest::Approx(2.0));
    CHECK(L.control == doctest::Approx(3.0));
    CHECK(L.diffusion == doctest::Approx(0.5));
    const HybridModel m = linear_model(params);
    CHECK(m.modes() == 2);
    CHECK(m.brownian_dim() == 2);
    const Matrix g = m.diffusion(vec({1, 2}), ModeIndex(1), 0.0);
    CHECK(g(1, 0) == doctest::Approx(0.6));
    CHECK(g(1, 1) == doctest::Approx(0.8));
    CHECK(m.control(vec({1, 2}), ModeIndex(2), 0.0)[1] == doctest::Approx(-6.0));
    params.A.push_back(Matrix::Zero(3, 3));
    CHECK_THROWS_AS(linear_model(params), InvalidArgument);
  }

  TEST_CASE("counterexample coefficients") {
    const auto controlled = counterexample_model(CounterexampleVariant::controlled);
    const Vector one = vec({1.0});
    CHECK(controlled.model.drift(one, ModeIndex(1), 0.0)[0] + controlled.model.control(one, ModeIndex(1), 0.0)[0] ==
          -3.0);
    CHECK(controlled.model.diffusion(vec({2.0}), ModeIndex(1), 0.0)(0, 0) == 4.0);
    CHECK_FALSE(controlled.model.globally_lipschitz());
    CHECK(controlled.control_mode == ControlMode::controlled);

    const auto delayed = counterexample_model(CounterexampleVariant::delayed, 0.1);
    CHECK(delayed.control_mode == ControlMode::delayed);
    CHECK(delayed.delay == 0.1);
    CHECK(delayed.model.drift(one, ModeIndex(1), 0.0)[0] + delayed.model.control(vec({2.0}), ModeIndex(1), 0.0)[0] ==
          -17.0);
    CHECK_THROWS_AS(counterexample_model(CounterexampleVariant::delayed, 0.0), InvalidArgument);

    const auto uncontrolled = counterexample_model(CounterexampleVariant::uncontrolled);
    CHECK_FALSE(uncontrolled.model.has_control());
    CHECK(parse_counterexample_variant("delayed") == CounterexampleVariant::delayed);
    CHECK_THROWS_AS(parse_counterexample_variant("late"), InvalidArgument);
  }

  TEST_CASE("z-bar") {
    const double z = zbar(0.1);
    CHECK(std::abs(psi(z, 0.1)) <= 1e-10);
    CHECK(z == doctest::Approx(3.96).epsilon(0.005));
    CHECK(psi(3.95, 0.1) < 0.0);
    CHECK(psi(3.98, 0.1) > 0.0);
    CHECK(zbar(0.05) > z);
    CHECK(zbar(50.0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK_THROWS_AS(zbar(0.0), InvalidArgument);
    CHECK_NOTHROW(CounterexampleParams{0.1, z}.validate());
    CHECK_THROWS_AS((CounterexampleParams{0.1, 3.0}.validate()), InvalidArgument);
  }

  TEST_CASE("Riccati closed form") {
    const double z = zbar(0.1);
    CHECK(riccati_u(0.0, z).value == doctest::Approx(z * z).epsilon(1e-14));
    const double t_star = riccati_blowup_time(z);
    CHECK(t_star == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(riccati_u(1.01 * t_star, z).blown_up);
    CHECK_FALSE(riccati_u(0.99 * t_star, z).blown_up);
  }

  TEST_CASE("Riccati closed form matches RK4 on [0, 0.9 t*]") {
    for (double eps : {0.05, 0.1, 0.3}) {
      CAPTURE(eps);
      const double z = zbar(eps);
      const double a = 2.0 + 0.5 * z * z;
      const double t_star = riccati_blowup_time(z);
      const auto rhs = [a](double u) { return -a * u + u * u; };
      const double h = 1e-6;
      const auto steps = static_cast<long>(std::floor(0.9 * t_star / h));
      double u = z * z;
      double worst = 0.0;
      for (long k = 1; k <= steps; ++k) {
        const double k1 = rhs(u), k2 = rhs(u + 0.5 * h * k1), k3 = rhs(u + 0.5 * h * k2), k4 = rhs(u + h * k3);
        u += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        if (k % 1000 == 0 || k == steps) {
          const RiccatiValue closed = riccati_u(static_cast<double>(k) * h, z);
          REQUIRE_FALSE(closed.blown_up);
          worst = std::max(worst, std::abs(closed.value - u) / u);
        }
      }
      CHECK(worst <= 1e-4);
    }
  }

  TEST_CASE("counterexample history satisfies the segment condition") {
    const double eps = 0.1, z = zbar(eps);
    const auto phi = counterexample_history(eps, z);
    CHECK(phi(0.0)[0] == doctest::Approx(z));
    for (int k = 0; k <= 100; ++k) {
      const double theta = -eps + 0.5 * eps * k / 100.0;
      const double v = phi(theta)[0];
      CHECK(8.0 * v * v * v <= z * z * (1.0 + 1e-12));
    }
    double prev = phi(-0.5 * eps)[0];
    for (int k = 1; k <= 50; ++k) {
      const double v = phi(-0.5 * eps + 0.5 * eps * k / 50.0)[0];
      CHECK(v >= prev);
      prev = v;
    }
  }

  TEST_CASE("instability demonstration at reduced scale") {
    InstabilityOptions opts;
    opts.paths = 200;
    opts.controlled_paths = 200;
    opts.controlled_step = 1e-3;
    const InstabilityReport r = demonstrate_instability(0.1, opts);
    CHECK(r.z_bar == doctest::Approx(zbar(0.1)));
    CHECK(r.blowup_time == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(r.paths == 200);
    CHECK(r.capped_fraction == doctest::Approx(static_cast<double>(r.capped_before_epsilon) / 200.0));
    CHECK(r.delayed_second_moment.moment_order == 2.0);
    CHECK(r.controlled_fourth_moment.moment_order == 4.0);
    CHECK(r.controlled_bound_at_1 == doctest::Approx(std::exp(-4.0)));
    CHECK(r.controlled_fourth_moment.mean_moment.back() < r.uncontrolled_fourth_moment.mean_moment.back());
    CHECK(r.riccati_times.size() == r.riccati_curve.size());
  }
}
