#include "hsde/config.hpp"
#include "hsde/output.hpp"
#include "hsde/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace hsde;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;

struct Source {
  std::string config;
  std::string preset;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool full_scale = false;

  void attach(CLI::App* cmd) {
    auto* c = cmd->add_option("--config", config, "JSON configuration file");
    cmd->add_option("--preset", preset, "Built-in configuration")->excludes(c);
    cmd->add_option("--out", out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--workers", workers, "Worker threads (0 = all cores)");
    cmd->add_flag("--full-scale", full_scale, "Use the full-scale simulation settings of the preset");
  }

  bool given() const { return !config.empty() || !preset.empty(); }

  RunConfig load(const std::string& fallback_preset = "") const {
    RunConfig cfg;
    if (!config.empty()) {
      cfg = load_config(config, full_scale);
    } else if (!preset.empty()) {
      cfg = preset_config(preset, full_scale);
    } else if (!fallback_preset.empty()) {
      cfg = preset_config(fallback_preset, full_scale);
    }
    if (seed) {
      cfg.seed = *seed;
      cfg.simulation.master_seed = *seed;
      cfg.counterexample.seed = *seed;
    }
    if (workers) {
      cfg.simulation.workers = *workers;
      cfg.counterexample.workers = *workers;
    }
    return cfg;
  }
};

std::filesystem::path output_path(const Source& src, const std::string& file) {
  return std::filesystem::path(src.out) / file;
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  auto out = open_output(path);
  writer(out);
  std::cout << "wrote " << path.string() << "\n";
}

std::vector<double> parse_range(const std::string& spec, const std::string& name) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || spec.substr(0, eq) != name) {
    throw InvalidArgument("--sweep: expected " + name + "=start:stop:step, got '" + spec + "'");
  }
  double a = 0, b = 0, s = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str() + eq + 1, "%lf:%lf:%lf%c", &a, &b, &s, &tail) != 3 || !(s > 0.0) || !(b >= a)) {
    throw InvalidArgument("--sweep: malformed range '" + spec + "'");
  }
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((b - a) / s + 1e-9));
  for (long k = 0; k <= n; ++k) grid.push_back(a + static_cast<double>(k) * s);
  return grid;
}

// --- tau-star --------------------------------------------------------------

struct TauStarArgs {
  Source src;
  std::optional<double> p, epsilon, L1, L2, L3, M, gamma;
  std::vector<std::string> sweep;
};

void print_tau_star(const ThresholdResult& r) {
  std::cout << "T = " << format_number(r.T) << "\n"
            << "tau* = " << format_number(r.tau_star) << "  (residual " << format_number(r.residual) << ", lambda "
            << format_number(r.lambda) << ")\n";
}

int cmd_tau_star(const TauStarArgs& a) {
  if (!a.src.given()) {
    if (!a.sweep.empty()) throw InvalidArgument("--sweep: needs a model from --config or --preset");
    for (const auto& [v, name] : {std::pair{a.p, "--p"}, {a.epsilon, "--epsilon"}, {a.L1, "--L1"}, {a.L2, "--L2"},
                                  {a.L3, "--L3"}, {a.M, "--M"}, {a.gamma, "--gamma"}}) {
      if (!v) throw InvalidArgument(std::string(name) + ": required without --config or --preset");
    }
    const ThresholdInputs in{*a.p, {*a.L1, *a.L2, *a.L3}, *a.M, *a.gamma, *a.epsilon};
    in.validate();
    const ThresholdResult r = tau_star(in);
    write_file(output_path(a.src, "tau_star.csv"), [&](std::ostream& out) { write_tau_star_csv(out, {{in, r}}); });
    print_tau_star(r);
    return 0;
  }

  RunConfig cfg = a.src.load();
  if (a.p) cfg.thresholds.p = a.p;
  if (a.epsilon) cfg.thresholds.epsilon = a.epsilon;
  if (a.M) cfg.thresholds.M = a.M;
  if (a.gamma) cfg.thresholds.gamma = a.gamma;
  if (a.L1 || a.L2 || a.L3) {
    if (!(a.L1 && a.L2 && a.L3)) throw InvalidArgument("--L1, --L2 and --L3 must be given together");
    cfg.thresholds.lipschitz = LipschitzBounds{*a.L1, *a.L2, *a.L3};
  }
  validate_config(cfg);

  if (!a.sweep.empty()) {
    if (a.sweep.size() != 2) throw InvalidArgument("--sweep takes p=start:stop:step eps=start:stop:step");
    const auto p_grid = parse_range(a.sweep[0], "p");
    const auto eps_grid = parse_range(a.sweep[1], "eps");
    const LipschitzFn lipschitz = sweep_lipschitz(cfg);
    const TauStarSweep sweep =
        optimize_tau_star(lipschitz, sweep_certificate(cfg), p_grid, eps_grid, {}, cfg.simulation.workers);
    write_file(output_path(a.src, "tau_star_sweep.csv"),
               [&](std::ostream& out) { write_tau_star_sweep_csv(out, sweep, lipschitz); });
    const auto& best = sweep.best_point();
    ThresholdInputs in{best.p, lipschitz(best.p), best.M, best.gamma, best.epsilon};
    write_file(output_path(a.src, "tau_star.csv"),
               [&](std::ostream& out) { write_tau_star_csv(out, {{in, *best.result}}); });
    std::cout << "best: p = " << format_number(best.p) << ", epsilon = " << format_number(best.epsilon)
              << ", tau* = " << format_number(best.result->tau_star) << "\n";
    return 0;
  }

  const ThresholdInputs in = build_threshold_inputs(cfg);
  const ThresholdResult r = tau_star(in);
  write_file(output_path(a.src, "tau_star.csv"), [&](std::ostream& out) { write_tau_star_csv(out, {{in, r}}); });
  print_tau_star(r);
  return 0;
}

// --- certify ---------------------------------------------------------------

struct CertifyArgs {
  Source src;
  std::vector<double> alpha;
  std::vector<double> generator;
  std::optional<double> p;
  std::size_t falsify = 0;
};

int cmd_certify(const CertifyArgs& a) {
  std::optional<RunConfig> cfg;
  if (a.src.given()) cfg = a.src.load();

  Vector alpha;
  if (!a.alpha.empty()) {
    alpha = Eigen::Map<const Vector>(a.alpha.data(), static_cast<Eigen::Index>(a.alpha.size()));
  } else if (cfg && cfg->certify.alpha) {
    alpha = *cfg->certify.alpha;
  } else if (auto design = cfg ? oscillator_design(*cfg) : std::nullopt) {
    alpha = design->alpha;
  } else {
    throw InvalidArgument("--alpha: required (or certify.alpha in the config)");
  }
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!std::isfinite(alpha[i])) throw InvalidArgument("--alpha: entries must be finite");
  }

  Matrix gen_entries;
  if (!a.generator.empty()) {
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(a.generator.size()))));
    if (n * n != static_cast<Eigen::Index>(a.generator.size())) {
      throw InvalidArgument("--generator: needs N^2 entries in row-major order");
    }
    gen_entries = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.generator.data(), n, n);
  } else if (cfg) {
    gen_entries = build_generator(*cfg).entries();
  } else {
    throw InvalidArgument("--generator: required (or generator in the config)");
  }
  const GeneratorMatrix gen(gen_entries);

  MMatrixCertificate cert;
  try {
    cert = certify_M_matrix(build_A(alpha, gen));
  } catch (const NotMMatrix& e) {
    std::cerr << "rejected: " << e.what() << "\n";
    return kExitFailure;
  }
  write_file(output_path(a.src, "certificate.csv"),
             [&](std::ostream& out) { write_certificate_csv(out, alpha, cert); });
  std::cout << "nonsingular M-matrix\n";
  for (Eigen::Index i = 0; i < cert.theta.size(); ++i) {
    std::cout << "theta_" << i + 1 << " = " << format_number(cert.theta[i]) << "\n";
  }
  std::cout << "M = " << format_number(cert.M) << "\ngamma = " << format_number(cert.gamma) << "\n";

  if (a.falsify > 0) {
    if (!cfg) throw InvalidArgument("--falsify: needs a model from --config or --preset");
    const double p = a.p ? *a.p : cfg->certify.p;
    if (!(p > 0.0)) throw InvalidArgument("--p: must be > 0");
    const HybridModel model = build_model(*cfg);
    const FalsificationReport rep = falsify_alpha(model, alpha, p, a.falsify, cfg->seed, cfg->simulation.workers);
    std::cout << "\nfalsification sampling, " << rep.samples << " samples, p = " << format_number(p) << "\n";
    for (std::size_t i = 0; i < rep.max_excess.size(); ++i) {
      std::cout << "  mode " << i + 1 << ": max(form + alpha) = " << format_number(rep.max_excess[i]) << "\n";
    }
    std::cout << "note: a clean sample is evidence, not a proof, that the margins alpha are valid\n";
    if (rep.falsified()) {
      const auto& w = *rep.violation;
      std::cout << "VIOLATED in mode " << w.mode.value() << " at t = " << format_number(w.t) << ", x = (";
      for (Eigen::Index k = 0; k < w.x.size(); ++k) std::cout << (k ? ", " : "") << format_number(w.x[k]);
      std::cout << "), excess " << format_number(w.excess) << "\n";
      return kExitFailure;
    }
    std::cout << "no violation found\n";
  }
  return 0;
}

// --- simulate / moment -----------------------------------------------------

struct SimulateArgs {
  Source src;
  std::optional<double> step, horizon, delay;
  std::optional<std::string> control;
  std::optional<std::size_t> paths, record_points;
  std::optional<double> moment_order;
  std::vector<double> state;
  std::optional<int> mode;
  bool plot = false;
};

RunConfig simulation_config(const SimulateArgs& a) {
  if (!a.src.given()) throw InvalidArgument("--config or --preset: required");
  RunConfig cfg = a.src.load();
  if (a.step) cfg.simulation.step = *a.step;
  if (a.horizon) cfg.simulation.horizon = *a.horizon;
  if (a.control) cfg.control = parse_control_mode(*a.control);
  if (a.delay) cfg.simulation.delay = *a.delay;
  if (cfg.control != ControlMode::delayed && !a.delay) cfg.simulation.delay = 0.0;
  if (a.paths) cfg.simulation.path_count = *a.paths;
  if (a.record_points) {
    cfg.record_points = *a.record_points;
    cfg.simulation.record_times.clear();
  }
  if (a.moment_order) cfg.simulation.moment_order = *a.moment_order;
  if (!a.state.empty()) {
    cfg.initial.state = Eigen::Map<const Vector>(a.state.data(), static_cast<Eigen::Index>(a.state.size()));
  }
  if (a.mode) cfg.initial.mode = *a.mode;
  validate_config(cfg);
  return cfg;
}

int cmd_simulate(const SimulateArgs& a) {
  const RunConfig cfg = simulation_config(a);
  const HybridModel model = build_model(cfg);
  const SimulationConfig sim = build_simulation(cfg);
  const InitialSegment history = build_history(cfg, sim);
  const auto paths = simulate_paths(model, build_generator(cfg), history, sim, cfg.control);
  const int width = static_cast<int>(std::to_string(paths.size()).size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "path_%0*zu.csv", width, k + 1);
    write_file(output_path(a.src, name),
               [&](std::ostream& out) { write_path_csv(out, paths[k], model.dimension()); });
    if (paths[k].exploded_at) {
      std::cout << "path " << k + 1 << " exceeded the explosion cap at t = " << format_number(*paths[k].exploded_at)
                << "\n";
    }
  }
  if (a.plot) {
    const std::vector<Path> shown(paths.begin(), paths.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(3, paths.size())));
    write_file(output_path(a.src, "paths.svg"), [&](std::ostream& out) {
      write_paths_svg(out, shown, model.dimension(), model.name() + " (" + to_string(cfg.control) + ")");
    });
  }
  return 0;
}

int cmd_moment(const SimulateArgs& a) {
  const RunConfig cfg = simulation_config(a);
  const HybridModel model = build_model(cfg);
  const SimulationConfig sim = build_simulation(cfg);
  const InitialSegment history = build_history(cfg, sim);
  const MomentEstimate est = monte_carlo_moment(model, build_generator(cfg), history, sim, cfg.control);
  write_file(output_path(a.src, "moment.csv"), [&](std::ostream& out) { write_moment_csv(out, est); });
  if (a.plot) {
    write_file(output_path(a.src, "moment.svg"), [&](std::ostream& out) {
      write_moment_svg(out, est, model.name() + " (" + to_string(cfg.control) + ")");
    });
  }
  std::cout << "E|x(T)|^" << format_number(est.moment_order) << " = " << format_number(est.mean_moment.back())
            << " +- " << format_number(est.std_error.back()) << ", " << est.exploded_count.back()
            << " of " << est.path_count << " paths capped\n";
  try {
    std::cout << "moment exponent over [0, " << format_number(sim.horizon())
              << "] = " << format_number(estimate_moment_exponent(est, 0.0, sim.horizon())) << "\n";
  } catch (const InvalidArgument& e) {
    std::cout << "moment exponent unavailable: " << e.what() << "\n";
  }
  return 0;
}

// --- counterexample --------------------------------------------------------

struct CounterexampleArgs {
  Source src;
  std::optional<double> epsilon, step, controlled_step;
  std::optional<std::size_t> paths, controlled_paths;
};

int cmd_counterexample(const CounterexampleArgs& a) {
  RunConfig cfg = a.src.load("counterexample");
  if (a.epsilon) cfg.counterexample_epsilon = *a.epsilon;
  if (a.step) cfg.counterexample.step = *a.step;
  if (a.controlled_step) cfg.counterexample.controlled_step = *a.controlled_step;
  if (a.paths) cfg.counterexample.paths = *a.paths;
  if (a.controlled_paths) cfg.counterexample.controlled_paths = *a.controlled_paths;
  validate_config(cfg);

  const double eps = cfg.counterexample_epsilon;
  const InstabilityReport rep = demonstrate_instability(eps, cfg.counterexample);
  write_file(output_path(a.src, "counterexample_delayed_moment.csv"),
             [&](std::ostream& out) { write_moment_csv(out, rep.delayed_second_moment); });
  write_file(output_path(a.src, "counterexample_riccati.csv"),
             [&](std::ostream& out) { write_riccati_csv(out, rep.riccati_times, rep.riccati_curve); });
  write_file(output_path(a.src, "counterexample_controlled_moment.csv"),
             [&](std::ostream& out) { write_moment_csv(out, rep.controlled_fourth_moment); });
  write_file(output_path(a.src, "counterexample_uncontrolled_moment.csv"),
             [&](std::ostream& out) { write_moment_csv(out, rep.uncontrolled_fourth_moment); });
  std::cout << "epsilon = " << format_number(eps) << "\n"
            << "z-bar = " << format_number(rep.z_bar) << "\n"
            << "Riccati lower bound blows up at t* = " << format_number(rep.blowup_time) << "\n"
            << "delayed feedback: " << rep.capped_before_epsilon << " of " << rep.paths
            << " paths hit the explosion cap before t = epsilon\n"
            << "undelayed feedback: E|x(1)|^4 = " << format_number(rep.controlled_fourth_moment.mean_moment.back())
            << " (bound e^-4 = " << format_number(rep.controlled_bound_at_1) << ")\n";
  return 0;
}

// --- reproduce-paper -------------------------------------------------------

struct ReproduceArgs {
  std::string out = "reproduce";
  std::uint64_t seed = 1;
  unsigned workers = 0;
  bool full_scale = false;
};

int cmd_reproduce(const ReproduceArgs& a) {
  ReproduceOptions opts;
  opts.seed = a.seed;
  opts.workers = a.workers;
  opts.full_scale = a.full_scale;
  opts.output_dir = a.out;
  const ReproduceResult result = reproduce_paper(opts);
  std::cout << result.manifest;
  std::cout << "artifacts in " << a.out << "\n";
  return result.all_passed() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay feedback stabilisation of hybrid SDEs: thresholds, certificates and simulation"};
  app.require_subcommand(1);

  TauStarArgs tau;
  auto* tau_cmd = app.add_subcommand("tau-star", "Maximal admissible feedback delay");
  tau.src.attach(tau_cmd);
  tau_cmd->add_option("--p", tau.p, "Moment order");
  tau_cmd->add_option("--epsilon", tau.epsilon, "Contraction target in (0, 1)");
  tau_cmd->add_option("--L1", tau.L1, "Drift Lipschitz constant");
  tau_cmd->add_option("--L2", tau.L2, "Control Lipschitz constant");
  tau_cmd->add_option("--L3", tau.L3, "Diffusion Lipschitz constant");
  tau_cmd->add_option("--M", tau.M, "Moment bound coefficient");
  tau_cmd->add_option("--gamma", tau.gamma, "Moment decay rate");
  tau_cmd->add_option("--sweep", tau.sweep, "Grid search: p=start:stop:step eps=start:stop:step")->expected(2);

  CertifyArgs cert;
  auto* cert_cmd = app.add_subcommand("certify", "M-matrix certificate for margins alpha and generator");
  cert.src.attach(cert_cmd);
  cert_cmd->add_option("--alpha", cert.alpha, "Per-mode margins")->delimiter(',');
  cert_cmd->add_option("--generator", cert.generator, "Generator, N^2 entries row-major")->delimiter(',');
  cert_cmd->add_option("--p", cert.p, "Moment order for --falsify");
  cert_cmd->add_option("--falsify", cert.falsify, "Sample the margin condition at n random states");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Euler-Maruyama sample paths");
  auto* mom_cmd = app.add_subcommand("moment", "Monte Carlo pth moment");
  for (auto* cmd : {sim_cmd, mom_cmd}) {
    sim.src.attach(cmd);
    cmd->add_option("--step", sim.step, "Step size h");
    cmd->add_option("--horizon", sim.horizon, "Final time");
    cmd->add_option("--delay", sim.delay, "Feedback delay tau");
    cmd->add_option("--control", sim.control, "uncontrolled, controlled or delayed");
    cmd->add_option("--paths", sim.paths, "Number of paths");
    cmd->add_option("--record-points", sim.record_points, "Uniform record points on [0, horizon]");
    cmd->add_option("--moment-order", sim.moment_order, "Moment order p");
    cmd->add_option("--state", sim.state, "Constant initial state")->delimiter(',');
    cmd->add_option("--mode", sim.mode, "Initial mode (1-based)");
    cmd->add_flag("--plot", sim.plot, "Also write SVG charts");
  }

  CounterexampleArgs ce;
  auto* ce_cmd = app.add_subcommand("counterexample", "Instability of the delayed scalar counterexample");
  ce.src.attach(ce_cmd);
  ce_cmd->add_option("--epsilon", ce.epsilon, "Delay epsilon");
  ce_cmd->add_option("--step", ce.step, "Step size of the delayed run");
  ce_cmd->add_option("--paths", ce.paths, "Paths of the delayed run");
  ce_cmd->add_option("--controlled-step", ce.controlled_step, "Step size of the undelayed runs");
  ce_cmd->add_option("--controlled-paths", ce.controlled_paths, "Paths of the undelayed runs");

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce-paper", "Run the full pipeline and write a manifest");
  rep_cmd->add_option("--out", rep.out, "Output directory")->capture_default_str();
  rep_cmd->add_option("--seed", rep.seed, "Master seed")->capture_default_str();
  rep_cmd->add_option("--workers", rep.workers, "Worker threads (0 = all cores)");
  rep_cmd->add_flag("--full-scale", rep.full_scale, "Use the full-scale step sizes (slow)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (tau_cmd->parsed()) return cmd_tau_star(tau);
    if (cert_cmd->parsed()) return cmd_certify(cert);
    if (sim_cmd->parsed()) return cmd_simulate(sim);
    if (mom_cmd->parsed()) return cmd_moment(sim);
    if (ce_cmd->parsed()) return cmd_counterexample(ce);
    if (rep_cmd->parsed()) return cmd_reproduce(rep);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
