#pragma once

#include "hsde/core.hpp"
#include "hsde/markov.hpp"
#include "hsde/models.hpp"
#include "hsde/simulate.hpp"
#include "hsde/thresholds.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hsde {

// ---------------------------------------------------------------------------
// Run configuration, read from a JSON document. The schema is documented in
// README.md; unknown keys are rejected so that typos do not pass silently.
// ---------------------------------------------------------------------------

enum class LipschitzSource { rigorous, quoted, given };

struct ModelConfig {
  std::string type = "oscillator";  // oscillator | linear | counterexample

  // oscillator: explicit coefficients, or design_p to derive the gains
  OscillatorParams oscillator = OscillatorParams::reference();
  std::optional<double> design_p;
  int alpha_decimals = -1;

  LinearModelParams linear;

  CounterexampleVariant variant = CounterexampleVariant::delayed;
  double epsilon = 0.1;

  LipschitzSource lipschitz_source = LipschitzSource::rigorous;
  LipschitzBounds lipschitz;  // used when lipschitz_source == given
};

struct InitialConfig {
  std::optional<Vector> state;
  int mode = 1;
  std::string history = "constant";  // constant | counterexample
};

struct ThresholdConfig {
  std::optional<double> p;
  std::optional<double> epsilon;
  std::optional<double> M;
  std::optional<double> gamma;
  std::optional<LipschitzBounds> lipschitz;
};

struct CertifyConfig {
  std::optional<Vector> alpha;
  double p = 2.0;
};

struct RunConfig {
  std::string description;
  std::uint64_t seed = 1;
  ModelConfig model;
  std::optional<Matrix> generator;  // defaults to [[0]] for single-mode models
  InitialConfig initial;
  ControlMode control = ControlMode::controlled;
  SimulationSettings simulation;
  std::size_t record_points = 1000;
  ThresholdConfig thresholds;
  CertifyConfig certify;
  double counterexample_epsilon = 0.1;
  InstabilityOptions counterexample;
};

/// Parses a JSON configuration. With `full_scale`, the entries of the
/// document's "full_scale" object override its "simulation" object.
/// Throws InvalidArgument naming the offending key.
RunConfig parse_config(const std::string& text, bool full_scale = false, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path, bool full_scale = false);

/// Built-in presets: oscillator, oscillator-uncontrolled, oscillator-controlled, oscillator-delayed, counterexample.
const std::vector<std::string>& preset_names();
const std::string& preset_text(const std::string& name);
RunConfig preset_config(const std::string& name, bool full_scale = false);

/// Checks every field against the preconditions of the module that consumes
/// it, and builds nothing. Throws InvalidArgument.
void validate_config(const RunConfig& cfg);

/// The design pipeline behind an oscillator configured by design_p.
std::optional<OscillatorDesign> oscillator_design(const RunConfig& cfg);

HybridModel build_model(const RunConfig& cfg);
GeneratorMatrix build_generator(const RunConfig& cfg);
SimulationConfig build_simulation(const RunConfig& cfg);
InitialSegment build_history(const RunConfig& cfg, const SimulationConfig& sim);

/// Threshold inputs with every missing value filled in: the Lipschitz
/// bounds from the model, (M, gamma) from the design certificate or from
/// certify.alpha and the generator.
ThresholdInputs build_threshold_inputs(const RunConfig& cfg);

/// Per-p Lipschitz bounds and (M, gamma) for a sweep over p. For an oscillator
/// configured by design_p the gains are redesigned at each p; otherwise the
/// configured values are used for every p.
LipschitzFn sweep_lipschitz(const RunConfig& cfg);
MomentCertificateFn sweep_certificate(const RunConfig& cfg);

}  // namespace hsde
