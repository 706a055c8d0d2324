#include "doctest.h"

#include "hsde/markov.hpp"

#include <cmath>

using namespace hsde;

namespace {

GeneratorMatrix paper_generator() { return GeneratorMatrix((Matrix(2, 2) << -1, 1, 2, -2).finished()); }

}  // namespace

TEST_SUITE("markov") {
  TEST_CASE("generator validation") {
    CHECK_NOTHROW(paper_generator());
    CHECK_NOTHROW(GeneratorMatrix(Matrix::Zero(1, 1)));
    CHECK_THROWS_AS(GeneratorMatrix((Matrix(2, 2) << -1, 2, 1, -1).finished()), InvalidArgument);
    CHECK_THROWS_AS(GeneratorMatrix((Matrix(2, 2) << 1, -1, 1, -1).finished()), InvalidArgument);
    CHECK_THROWS_AS(GeneratorMatrix(Matrix::Zero(2, 3)), InvalidArgument);
    CHECK_THROWS_AS(GeneratorMatrix::from_row_major({-1, 1, 2}), InvalidArgument);
    const GeneratorMatrix g = GeneratorMatrix::from_row_major({-1, 1, 2, -2});
    CHECK(g.rate(ModeIndex(2), ModeIndex(1)) == 2.0);
    CHECK(g.exit_rate(ModeIndex(1)) == 1.0);
  }

  TEST_CASE("the row-sum error names the row") {
    try {
      GeneratorMatrix((Matrix(2, 2) << -1, 2, 1, -1).finished());
      FAIL("expected a row-sum error");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
  }

  TEST_CASE("a single mode never jumps") {
    CounterRng rng(1);
    const ModePath path = simulate_mode_path(GeneratorMatrix(Matrix::Zero(1, 1)), ModeIndex(1), 100.0, rng);
    CHECK(path.jump_times.empty());
    CHECK(path.at(50.0) == ModeIndex(1));
  }

  TEST_CASE("mode paths are right-continuous with alternating modes") {
    CounterRng rng(3);
    const ModePath path = simulate_mode_path(paper_generator(), ModeIndex(1), 50.0, rng);
    REQUIRE(path.jump_times.size() > 10);
    CHECK(path.modes.size() == path.jump_times.size() + 1);
    for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
      if (k > 0) CHECK(path.jump_times[k] > path.jump_times[k - 1]);
      CHECK(path.jump_times[k] <= 50.0);
      CHECK(path.modes[k + 1] != path.modes[k]);
      CHECK(path.at(path.jump_times[k]) == path.modes[k + 1]);
    }
    ModeCursor cursor(path);
    for (double t = 0.0; t <= 50.0; t += 0.01) CHECK(cursor.at(t) == path.at(t));
  }

  TEST_CASE("mode paths are reproducible from the stream") {
    CounterRng a(9), b(9);
    const ModePath p1 = simulate_mode_path(paper_generator(), ModeIndex(2), 100.0, a);
    const ModePath p2 = simulate_mode_path(paper_generator(), ModeIndex(2), 100.0, b);
    CHECK(p1.jump_times == p2.jump_times);
    CHECK(p1.modes == p2.modes);
  }

  TEST_CASE("stationary distributions") {
    const Vector pi = stationary_distribution(paper_generator());
    CHECK(pi[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(pi[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(stationary_distribution(GeneratorMatrix(Matrix::Zero(1, 1)))[0] == 1.0);
    const Vector sym = stationary_distribution(GeneratorMatrix((Matrix(2, 2) << -1, 1, 1, -1).finished()));
    CHECK(sym[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(stationary_distribution(GeneratorMatrix(Matrix::Zero(2, 2))), Error);
  }

  TEST_CASE("occupation fraction of mode 1 approaches 2/3") {
    CounterRng rng(derive_key(1, 0, StreamPurpose::markov));
    const ModePath path = simulate_mode_path(paper_generator(), ModeIndex(1), 1e4, rng);
    const Vector occ = occupation_fractions(path, 2);
    CHECK(occ.sum() == doctest::Approx(1.0));
    CHECK(std::abs(occ[0] - 2.0 / 3.0) < 0.02);
  }

  TEST_CASE("mode-1 holding times average 1 and jump counts match the rates") {
    CounterRng rng(derive_key(2, 0, StreamPurpose::markov));
    const ModePath path = simulate_mode_path(paper_generator(), ModeIndex(1), 3e4, rng);
    double total = 0;
    int sojourns = 0;
    double start = 0;
    for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
      if (path.modes[k] == ModeIndex(1)) {
        total += path.jump_times[k] - start;
        ++sojourns;
      }
      start = path.jump_times[k];
    }
    REQUIRE(sojourns >= 10000);
    CHECK(std::abs(total / sojourns - 1.0) < 0.02);
    // Jumps out of mode 1 happen at rate 1 while in mode 1: N ~ Poisson(time in mode 1).
    const double expected = occupation_fractions(path, 2)[0] * path.horizon;
    CHECK(std::abs(sojourns - expected) < 3.0 * std::sqrt(expected) + 1.0);
  }
}
