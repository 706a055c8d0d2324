#pragma once

#include "hsde/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hsde {

/// One comparison of a computed number against its reference value.
struct Check {
  std::string stage;
  std::string name;
  double computed = 0.0;
  std::string expected;   // reference value or inequality, as text
  std::string tolerance;  // as text
  bool stochastic = false;
  bool pass = false;
};

/// Slope and simulation of one oscillator figure.
struct FigureRun {
  MomentEstimate moment;
  double slope = 0.0;                     // of log E|x|^p over the horizon
  std::vector<double> pathwise_exponents;  // slope of log|x| per path
  std::vector<Path> sample_paths;          // the first few paths, for plotting
  int dimension = 2;
};

/// Runs a figure configuration: the Monte Carlo moment and its slope over the
/// whole horizon, the pathwise exponent of every path, and the first
/// `sample_paths` paths.
FigureRun run_figure(const RunConfig& cfg, std::size_t sample_paths = 3);

struct ReproduceOptions {
  std::uint64_t seed = 1;
  bool full_scale = false;
  unsigned workers = 0;
  std::optional<std::filesystem::path> output_dir;  // writes the artifact bundle when set
};

struct ReproduceResult {
  std::vector<Check> checks;
  std::string manifest;
  bool all_passed() const;
};

/// gains -> Q -> alpha -> certificate -> T -> tau* -> the three oscillator simulations ->
/// counterexample, with every number compared against its reference. A stage
/// that throws halts the run with an Error naming the stage.
ReproduceResult reproduce_paper(const ReproduceOptions& opts = {});

}  // namespace hsde
