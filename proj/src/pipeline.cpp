#include "hsde/pipeline.hpp"

#include "hsde/output.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace hsde {

bool ReproduceResult::all_passed() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return !checks.empty();
}

FigureRun run_figure(const RunConfig& cfg, std::size_t sample_paths) {
  const HybridModel model = build_model(cfg);
  const GeneratorMatrix gen = build_generator(cfg);
  const SimulationConfig sim = build_simulation(cfg);
  const InitialSegment history = build_history(cfg, sim);

  FigureRun run;
  run.dimension = model.dimension();
  run.moment = monte_carlo_moment(model, gen, history, sim, cfg.control);
  run.slope = estimate_moment_exponent(run.moment, 0.0, sim.horizon());
  std::vector<Path> paths = simulate_paths(model, gen, history, sim, cfg.control);
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const Path& path = paths[k];
    if (path.exploded_at) {
      run.pathwise_exponents.push_back(std::numeric_limits<double>::infinity());
    } else {
      run.pathwise_exponents.push_back(estimate_pathwise_exponent(path, 0.0, sim.horizon()));
    }
  }
  paths.resize(std::min(paths.size(), sample_paths));
  run.sample_paths = std::move(paths);
  return run;
}

namespace {

std::string num(double x) {
  if (!std::isfinite(x)) return format_number(x);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// Half a unit in the last of `digits` significant digits of `reference`.
double significant_tolerance(double reference, int digits) {
  return 0.5 * std::pow(10.0, std::floor(std::log10(std::abs(reference))) - (digits - 1));
}

class Recorder {
 public:
  explicit Recorder(std::vector<Check>& checks) : checks_(checks) {}

  void stage(std::string name) { stage_ = std::move(name); }

  void near(const std::string& name, double computed, double expected, double tol, const std::string& tol_text) {
    add(name, computed, num(expected), tol_text, std::abs(computed - expected) <= tol, false);
  }

  void decimals(const std::string& name, double computed, double expected, int digits) {
    // The slack absorbs representation error at exact half-units such as -0.00125.
    const double tol = 0.5 * std::pow(10.0, -digits) + 1e-12;
    near(name, computed, expected, tol, std::to_string(digits) + " decimals");
  }

  void significant(const std::string& name, double computed, double expected, int digits) {
    near(name, computed, expected, significant_tolerance(expected, digits),
         std::to_string(digits) + " significant digits");
  }

  void relative(const std::string& name, double computed, double expected, double rel) {
    add(name, computed, num(expected), num(100.0 * rel) + "% relative",
        std::abs(computed - expected) <= rel * std::abs(expected), false);
  }

  void bound(const std::string& name, double computed, const std::string& relation, double limit, bool pass,
             bool stochastic) {
    add(name, computed, relation + " " + num(limit), "", pass, stochastic);
  }

 private:
  void add(const std::string& name, double computed, std::string expected, std::string tol, bool pass,
           bool stochastic) {
    checks_.push_back({stage_, name, computed, std::move(expected), std::move(tol), stochastic, pass});
  }

  std::vector<Check>& checks_;
  std::string stage_;
};

template <class F>
void run_stage(const std::string& name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    throw Error("stage '" + name + "' failed: " + e.what());
  }
}

std::string render_manifest(const ReproduceOptions& opts, const std::vector<Check>& checks) {
  std::ostringstream os;
  os << "hsde reproduce-paper manifest\n";
  os << "seed: " << opts.seed << "\n";
  os << "scale: " << (opts.full_scale ? "full" : "reduced") << "\n";
  std::string stage;
  std::size_t passed = 0;
  for (const auto& c : checks) {
    if (c.stage != stage) {
      stage = c.stage;
      os << "\n[" << stage << "]\n";
    }
    char line[256];
    std::snprintf(line, sizeof line, "%s  %-44s computed %-18s expected %s%s%s%s%s\n", c.pass ? "PASS" : "FAIL",
                  c.name.c_str(), num(c.computed).c_str(), c.expected.c_str(), c.tolerance.empty() ? "" : " (",
                  c.tolerance.c_str(), c.tolerance.empty() ? "" : ")", c.stochastic ? "  [monte carlo]" : "");
    os << line;
    if (c.pass) ++passed;
  }
  os << "\nsummary: " << passed << "/" << checks.size() << " checks passed\n";
  return os.str();
}

}  // namespace

ReproduceResult reproduce_paper(const ReproduceOptions& opts) {
  ReproduceResult result;
  Recorder rec(result.checks);
  const auto out_dir = opts.output_dir;
  auto emit = [&](const std::string& file, auto&& writer) {
    if (!out_dir) return;
    auto out = open_output(*out_dir / file);
    writer(out);
  };

  auto load = [&](const std::string& preset) {
    RunConfig cfg = preset_config(preset, opts.full_scale);
    cfg.seed = opts.seed;
    cfg.simulation.master_seed = opts.seed;
    cfg.counterexample.seed = opts.seed;
    if (opts.workers) {
      cfg.simulation.workers = opts.workers;
      cfg.counterexample.workers = opts.workers;
    }
    return cfg;
  };

  const RunConfig oscillator = load("oscillator");
  OscillatorDesign design;
  run_stage("design", [&] {
    rec.stage("design");
    design = *oscillator_design(oscillator);
    rec.decimals("gain d1", design.gains[0], 0.4848, 4);
    rec.decimals("gain d2", design.gains[1], 0.5650, 4);
    const double printed[2][3] = {{-0.3848, -0.4724, -0.3848}, {-0.4650, -0.0012, -0.0013}};
    for (int i = 0; i < 2; ++i) {
      const Matrix& Q = design.Q[static_cast<std::size_t>(i)];
      const std::string q = "Q" + std::to_string(i + 1);
      rec.decimals(q + "(1,1)", Q(0, 0), printed[i][0], 4);
      rec.decimals(q + "(1,2)", Q(0, 1), printed[i][1], 4);
      rec.decimals(q + "(2,2)", Q(1, 1), printed[i][2], 4);
    }
    rec.decimals("alpha_1", design.alpha[0], 0.3848, 4);
    rec.decimals("alpha_2", design.alpha[1], 0.0012, 4);
  });

  run_stage("certificate", [&] {
    rec.stage("certificate");
    const MMatrixCertificate& cert = design.certificate;
    rec.significant("theta_1", cert.theta[0], 3.891286, 5);
    rec.significant("theta_2", cert.theta[1], 4.388653, 5);
    rec.significant("M", cert.M, 1.127816, 5);
    rec.significant("gamma", cert.gamma, 0.2278604, 5);
    emit("certificate.csv", [&](std::ostream& out) { write_certificate_csv(out, design.alpha, cert); });
  });

  ThresholdInputs inputs;
  ThresholdResult threshold;
  run_stage("delay threshold", [&] {
    rec.stage("delay threshold");
    inputs = build_threshold_inputs(oscillator);
    const double T = horizon_T(inputs.p, inputs.M, inputs.gamma, inputs.epsilon);
    rec.near("T", T, 0.7994283, 5e-4, "5e-04 absolute");
    threshold = tau_star(inputs);
    rec.relative("tau*", threshold.tau_star, 2.93e-6, 0.02);
    rec.bound("|phi(tau*)|", std::abs(threshold.residual), "<=", 1e-9, std::abs(threshold.residual) <= 1e-9, false);
    emit("tau_star.csv", [&](std::ostream& out) { write_tau_star_csv(out, {{inputs, threshold}}); });
  });

  const struct {
    const char* preset;
    const char* title;
  } figures[] = {
      {"oscillator-uncontrolled", "uncontrolled oscillator"},
      {"oscillator-controlled", "feedback control"},
      {"oscillator-delayed", "delay feedback control, tau = 1e-6"},
  };
  for (const auto& fig : figures) {
    run_stage(fig.preset, [&] {
      rec.stage(fig.preset);
      const RunConfig cfg = load(fig.preset);
      const FigureRun run = run_figure(cfg);
      const std::string name = "moment exponent, p = " + num(cfg.simulation.moment_order);
      if (cfg.control == ControlMode::uncontrolled) {
        rec.bound(name, run.slope, ">=", 0.0, run.slope >= 0.0, true);
      } else {
        rec.bound(name, run.slope, "<", 0.0, run.slope < 0.0, true);
      }
      if (cfg.control == ControlMode::delayed) {
        std::size_t negative = 0;
        for (double s : run.pathwise_exponents) negative += s < 0.0 ? 1 : 0;
        const double fraction = static_cast<double>(negative) / static_cast<double>(run.pathwise_exponents.size());
        rec.bound("fraction of paths with negative exponent", fraction, ">=", 0.95, fraction >= 0.95, true);
      }
      const std::string stem = fig.preset;
      emit(stem + "_moment.csv", [&](std::ostream& out) { write_moment_csv(out, run.moment); });
      emit(stem + "_path_1.csv", [&](std::ostream& out) { write_path_csv(out, run.sample_paths.front(), 2); });
      emit(stem + "_paths.svg",
           [&](std::ostream& out) { write_paths_svg(out, run.sample_paths, run.dimension, fig.title); });
      emit(stem + "_moment.svg", [&](std::ostream& out) { write_moment_svg(out, run.moment, fig.title); });
    });
  }

  run_stage("counterexample", [&] {
    rec.stage("counterexample");
    const RunConfig cfg = load("counterexample");
    const double eps = cfg.counterexample_epsilon;
    const InstabilityReport report = demonstrate_instability(eps, cfg.counterexample);
    rec.near("z-bar at epsilon = " + num(eps), report.z_bar, 3.96, 0.02, "0.02 absolute");
    rec.near("Riccati blow-up time (= epsilon)", report.blowup_time, eps, 1e-9 * eps, "1e-9 relative");
    rec.bound("fraction of paths capped before epsilon", report.capped_fraction, ">", 0.0,
              report.capped_fraction > 0.0, true);
    const double controlled = report.controlled_fourth_moment.mean_moment.back();
    const double limit = 1.2 * report.controlled_bound_at_1;
    rec.bound("controlled E|x(1)|^4", controlled, "<=", limit, controlled <= limit, true);
    const double slope = estimate_moment_exponent(report.uncontrolled_fourth_moment, 0.0, 1.0);
    rec.bound("uncontrolled 4th moment exponent", slope, ">", -4.0, slope > -4.0, true);
    emit("counterexample_delayed_moment.csv",
         [&](std::ostream& out) { write_moment_csv(out, report.delayed_second_moment); });
    emit("counterexample_riccati.csv",
         [&](std::ostream& out) { write_riccati_csv(out, report.riccati_times, report.riccati_curve); });
    emit("counterexample_controlled_moment.csv",
         [&](std::ostream& out) { write_moment_csv(out, report.controlled_fourth_moment); });
    emit("counterexample_uncontrolled_moment.csv",
         [&](std::ostream& out) { write_moment_csv(out, report.uncontrolled_fourth_moment); });
  });

  result.manifest = render_manifest(opts, result.checks);
  emit("manifest.txt", [&](std::ostream& out) { out << result.manifest; });
  return result;
}

}  // namespace hsde
