#include "doctest.h"

#include "hsde/core.hpp"
#include "hsde/models.hpp"

#include <cmath>

using namespace hsde;

namespace {

HybridModelSpec scalar_spec() {
  HybridModelSpec spec;
  spec.name = "scalar";
  spec.dimension = 1;
  spec.modes = 1;
  spec.brownian_dim = 1;
  spec.drift = [](const ConstVectorRef& x, ModeIndex, double, VectorRef out) { out = -x; };
  spec.diffusion = [](const ConstVectorRef& x, ModeIndex, double, MatrixRef out) { out(0, 0) = 0.5 * x[0]; };
  spec.lipschitz = {1.0, 0.0, 0.5};
  return spec;
}

bool has_flag(const ValidationReport& r, ValidationFlag::Kind kind, const std::string& coefficient) {
  for (const auto& f : r.flags) {
    if (f.kind == kind && f.coefficient == coefficient) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("mode index is 1-based and range checked") {
    ModeIndex m(2);
    CHECK(m.value() == 2);
    CHECK(m.index() == 1);
    CHECK_NOTHROW(check_mode(m, 2));
    CHECK_THROWS_AS(check_mode(m, 1), InvalidArgument);
    CHECK_THROWS_AS(check_mode(ModeIndex(0), 3), InvalidArgument);
  }

  TEST_CASE("Lipschitz bounds reject negative and non-finite entries") {
    const LipschitzBounds good{1, 0, 2}, negative{-1, 0, 0}, nan{1, NAN, 0}, inf{1, 0, INFINITY};
    CHECK_NOTHROW(good.validate());
    CHECK_THROWS_AS(negative.validate(), InvalidArgument);
    CHECK_THROWS_AS(nan.validate(), InvalidArgument);
    CHECK_THROWS_AS(inf.validate(), InvalidArgument);
  }

  TEST_CASE("model construction enforces the zero condition") {
    CHECK_NOTHROW(HybridModel{scalar_spec()});
    HybridModelSpec bad = scalar_spec();
    bad.drift = [](const ConstVectorRef& x, ModeIndex, double, VectorRef out) { out[0] = 1.0 - x[0]; };
    CHECK_THROWS_AS(HybridModel{bad}, InvalidArgument);
    CHECK_NOTHROW(HybridModel::unchecked(bad));
  }

  TEST_CASE("model construction checks dimensions") {
    HybridModelSpec bad = scalar_spec();
    bad.dimension = 0;
    CHECK_THROWS_AS(HybridModel{bad}, InvalidArgument);
    HybridModelSpec no_drift = scalar_spec();
    no_drift.drift = nullptr;
    CHECK_THROWS_AS(HybridModel{no_drift}, InvalidArgument);
  }

  TEST_CASE("checked evaluation reports non-finite output") {
    HybridModelSpec spec = scalar_spec();
    spec.drift = [](const ConstVectorRef& x, ModeIndex, double, VectorRef out) {
      out[0] = x[0] > 1.0 ? NAN : -x[0];
    };
    const HybridModel model(spec);
    CHECK(model.drift(Vector::Constant(1, 0.5), ModeIndex(1), 0.0)[0] == doctest::Approx(-0.5));
    CHECK_THROWS_AS(model.drift(Vector::Constant(1, 2.0), ModeIndex(1), 0.0), ModelEvaluationError);
    CHECK_THROWS_AS(model.drift(Vector::Constant(2, 0.5), ModeIndex(1), 0.0), InvalidArgument);
    CHECK_THROWS_AS(model.drift(Vector::Constant(1, 0.5), ModeIndex(2), 0.0), InvalidArgument);
  }

  TEST_CASE("absent control evaluates to zero") {
    const HybridModel model(scalar_spec());
    CHECK_FALSE(model.has_control());
    CHECK(model.control(Vector::Constant(1, 3.0), ModeIndex(1), 0.0)[0] == 0.0);
  }

  TEST_CASE("with_lipschitz replaces only the declared bounds") {
    const HybridModel model(scalar_spec());
    const HybridModel other = model.with_lipschitz({7, 8, 9});
    CHECK(other.lipschitz().drift == 7);
    CHECK(other.drift(Vector::Constant(1, 2.0), ModeIndex(1), 0.0)[0] == -2.0);
    CHECK(model.lipschitz().drift == 1);
  }

  TEST_CASE("initial segment samples, interpolates and is exact at grid points") {
    const auto history = [](double t) { return Vector::Constant(2, 1.0 + t * t); };
    const InitialSegment seg = InitialSegment::from_function(history, 0.1, 0.01, ModeIndex(1));
    REQUIRE(seg.samples().size() == 11);
    CHECK(seg.span() == doctest::Approx(0.1));
    for (int k = 0; k <= 10; ++k) {
      const double t = -0.01 * k;
      CHECK(seg.at(t)[0] == seg.samples()[static_cast<std::size_t>(10 - k)][0]);
      CHECK(seg.at(t)[0] == doctest::Approx(1.0 + t * t).epsilon(1e-12));
    }
    const double mid = 0.5 * (seg.samples()[9][0] + seg.samples()[10][0]);
    CHECK(seg.at(-0.005)[0] == doctest::Approx(mid));
    CHECK(seg.current()[1] == 1.0);
    CHECK_THROWS_AS(seg.at(-0.2), InvalidArgument);
  }

  TEST_CASE("zero delay degenerates to a single state") {
    const InitialSegment seg = InitialSegment::constant(Vector::Constant(3, 2.0), 0.0, 0.01, ModeIndex(1));
    CHECK(seg.samples().size() == 1);
    CHECK(seg.current()[2] == 2.0);
  }

  TEST_CASE("fractional delays get one extra sample") {
    const InitialSegment seg = InitialSegment::constant(Vector::Ones(1), 1e-6, 1e-4, ModeIndex(1));
    CHECK(seg.samples().size() == 2);
  }

  TEST_CASE("validate_model: a correct model raises no flags") {
    const ValidationReport r = validate_model(HybridModel(scalar_spec()), 2000, 7);
    CHECK(r.ok());
    REQUIRE(r.per_mode.size() == 1);
    CHECK(r.per_mode[0].max_drift_ratio <= 1.0 + 1e-9);
    CHECK(r.per_mode[0].max_drift_ratio > 0.99);
  }

  TEST_CASE("validate_model flags a nonzero drift at the origin") {
    HybridModelSpec spec = scalar_spec();
    spec.dimension = 2;
    spec.drift = [](const ConstVectorRef&, ModeIndex, double, VectorRef out) { out << 1.0, 0.0; };
    spec.diffusion = [](const ConstVectorRef&, ModeIndex, double, MatrixRef out) { out.setZero(); };
    const ValidationReport r = validate_model(HybridModel::unchecked(spec), 100, 1);
    CHECK(has_flag(r, ValidationFlag::Kind::zero_condition, "drift"));
  }

  TEST_CASE("validate_model flags an understated linear drift bound") {
    LinearModelParams params;
    Matrix A(2, 2);
    A << -1.0, 3.0, 0.0, -2.0;
    params.A = {A};
    params.G = {{Matrix::Identity(2, 2) * 0.1}};
    const double norm = linear_lipschitz(params).drift;
    CHECK(norm == doctest::Approx(A.jacobiSvd().singularValues()[0]));
    const HybridModel honest = linear_model(params);
    CHECK(validate_model(honest, 2000, 3).ok());
    const HybridModel understated = linear_model(params, LipschitzBounds{0.9 * norm, 0.0, 0.1});
    CHECK(has_flag(validate_model(understated, 2000, 3), ValidationFlag::Kind::lipschitz, "drift"));
  }

  TEST_CASE("validate_model on the oscillator: rigorous bound passes, quoted L1 is flagged") {
    const auto params = OscillatorParams::reference({0.4848, 0.5650});
    const ValidationReport rigorous = validate_model(oscillator_model(params), 20000, 5);
    CHECK(rigorous.ok());
    const ValidationReport quoted = validate_model(oscillator_model(params, quoted_oscillator_lipschitz(params)), 20000, 5);
    CHECK(has_flag(quoted, ValidationFlag::Kind::lipschitz, "drift"));
    CHECK_FALSE(has_flag(quoted, ValidationFlag::Kind::lipschitz, "control"));
    CHECK_FALSE(has_flag(quoted, ValidationFlag::Kind::lipschitz, "diffusion"));
  }

  TEST_CASE("validate_model skips ratios for models that are not globally Lipschitz") {
    const auto sys = counterexample_model(CounterexampleVariant::controlled);
    const ValidationReport r = validate_model(sys.model, 500, 1);
    CHECK_FALSE(r.lipschitz_checked);
    CHECK(r.ok());
  }

  TEST_CASE("frobenius norm") {
    Matrix a(2, 2);
    a << 1, 2, 3, 4;
    CHECK(frobenius(a) == doctest::Approx(std::sqrt(30.0)));
  }
}
