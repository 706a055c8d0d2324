#include "hsde/config.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hsde {

namespace {

using nlohmann::json;

const std::map<std::string, std::string>& embedded_presets() {
  static const std::map<std::string, std::string> presets = {
#include "presets.inc"
  };
  return presets;
}

// Reads one JSON object, remembering which keys were consumed so that the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  static void fail(const std::string& key, const std::string& what) {
    throw InvalidArgument(key + ": " + what);
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  bool has(const std::string& name) {
    seen_.insert(name);
    return j_.contains(name);
  }

  const json& raw(const std::string& name) {
    seen_.insert(name);
    if (!j_.contains(name)) fail(key(name), "is required");
    return j_.at(name);
  }

  double number(const std::string& name) {
    const json& v = raw(name);
    if (!v.is_number()) fail(key(name), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key(name), "must be finite");
    return x;
  }

  std::optional<double> opt_number(const std::string& name) {
    if (!has(name)) return std::nullopt;
    return number(name);
  }

  std::uint64_t count(const std::string& name) {
    const json& v = raw(name);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(key(name), "must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  int integer(const std::string& name) {
    const json& v = raw(name);
    if (!v.is_number_integer()) fail(key(name), "must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& name) {
    const json& v = raw(name);
    if (!v.is_boolean()) fail(key(name), "must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& name) {
    const json& v = raw(name);
    if (!v.is_string()) fail(key(name), "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& name) { return read_numbers(raw(name), key(name)); }

  Vector vector(const std::string& name) {
    const auto v = numbers(name);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  Matrix matrix(const std::string& name) { return read_matrix(raw(name), key(name)); }

  Section sub(const std::string& name) { return Section(raw(name), key(name)); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(key(item.key()), "unknown key");
    }
  }

  static std::vector<double> read_numbers(const json& v, const std::string& key) {
    if (!v.is_array()) fail(key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) fail(key, "must contain finite numbers only");
      out.push_back(x.get<double>());
    }
    return out;
  }

  static Matrix read_matrix(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) fail(key, "must be a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    Matrix m;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto row = read_numbers(v[static_cast<std::size_t>(i)], key);
      if (i == 0) m.resize(rows, static_cast<Eigen::Index>(row.size()));
      if (static_cast<Eigen::Index>(row.size()) != m.cols() || row.empty()) fail(key, "rows must have equal nonzero length");
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = row[static_cast<std::size_t>(k)];
    }
    return m;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

LipschitzBounds read_lipschitz(Section s) {
  LipschitzBounds L{s.number("L1"), s.number("L2"), s.number("L3")};
  s.finish();
  return L;
}

ModelConfig read_model(Section s) {
  ModelConfig m;
  m.type = s.string("type");
  if (m.type == "oscillator") {
    if (s.has("design_p")) {
      m.design_p = s.number("design_p");
      if (s.has("alpha_decimals")) m.alpha_decimals = s.integer("alpha_decimals");
      for (const char* k : {"a", "b", "c", "d"}) {
        if (s.has(k)) Section::fail(s.key(k), "cannot be combined with design_p");
      }
    } else {
      m.oscillator.a = s.numbers("a");
      m.oscillator.b = s.numbers("b");
      m.oscillator.c = s.numbers("c");
      m.oscillator.d = s.numbers("d");
    }
  } else if (m.type == "linear") {
    const json& A = s.raw("A");
    const json& G = s.raw("G");
    if (!A.is_array() || !G.is_array()) Section::fail(s.key("A"), "A and G must be arrays over modes");
    for (const auto& a : A) m.linear.A.push_back(Section::read_matrix(a, s.key("A")));
    for (const auto& gs : G) {
      if (!gs.is_array()) Section::fail(s.key("G"), "each mode needs an array of matrices");
      std::vector<Matrix> mode;
      for (const auto& g : gs) mode.push_back(Section::read_matrix(g, s.key("G")));
      m.linear.G.push_back(std::move(mode));
    }
    if (s.has("D")) {
      const json& D = s.raw("D");
      if (!D.is_array()) Section::fail(s.key("D"), "must be an array over modes");
      for (const auto& d : D) m.linear.D.push_back(Section::read_matrix(d, s.key("D")));
    }
  } else if (m.type == "counterexample") {
    m.variant = parse_counterexample_variant(s.string("variant"));
    if (s.has("epsilon")) m.epsilon = s.number("epsilon");
  } else {
    Section::fail(s.key("type"), "must be oscillator, linear or counterexample");
  }
  if (s.has("lipschitz")) {
    const json& L = s.raw("lipschitz");
    if (L.is_string()) {
      const auto v = L.get<std::string>();
      if (v == "rigorous") {
        m.lipschitz_source = LipschitzSource::rigorous;
      } else if (v == "quoted") {
        if (m.type != "oscillator") Section::fail(s.key("lipschitz"), "quoted bounds exist only for the oscillator");
        m.lipschitz_source = LipschitzSource::quoted;
      } else {
        Section::fail(s.key("lipschitz"), "must be \"rigorous\", \"quoted\" or {L1, L2, L3}");
      }
    } else {
      m.lipschitz_source = LipschitzSource::given;
      m.lipschitz = read_lipschitz(s.sub("lipschitz"));
    }
  }
  s.finish();
  return m;
}

void read_simulation(Section s, RunConfig& cfg) {
  SimulationSettings& sim = cfg.simulation;
  if (s.has("control")) cfg.control = parse_control_mode(s.string("control"));
  if (s.has("step")) sim.step = s.number("step");
  if (s.has("horizon")) sim.horizon = s.number("horizon");
  if (s.has("delay")) sim.delay = s.number("delay");
  if (s.has("allow_fractional_delay")) sim.allow_fractional_delay = s.boolean("allow_fractional_delay");
  if (s.has("paths")) sim.path_count = s.count("paths");
  if (s.has("moment_order")) sim.moment_order = s.number("moment_order");
  if (s.has("record_points")) cfg.record_points = s.count("record_points");
  if (s.has("record_times")) sim.record_times = s.numbers("record_times");
  if (s.has("explosion_cap")) sim.explosion_cap = s.number("explosion_cap");
  if (s.has("workers")) sim.workers = static_cast<unsigned>(s.count("workers"));
  s.finish();
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) Section::fail(key, what);
}

// Runs `body` and prefixes any InvalidArgument it raises with `key`.
template <class F>
void check_with(const std::string& key, F&& body) {
  try {
    body();
  } catch (const InvalidArgument& e) {
    Section::fail(key, e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, bool full_scale, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(source + ": " + e.what());
  }
  if (full_scale && doc.contains("full_scale")) {
    json patch = doc["full_scale"];
    doc["simulation"].merge_patch(patch);
  }

  RunConfig cfg;
  Section root(doc, "");
  if (root.has("description")) cfg.description = root.string("description");
  if (root.has("full_scale")) Section(root.raw("full_scale"), "full_scale");
  if (root.has("seed")) cfg.seed = root.count("seed");
  cfg.model = read_model(root.sub("model"));
  if (root.has("generator")) {
    const auto g = root.numbers("generator");
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(g.size()))));
    check(n > 0 && static_cast<std::size_t>(n * n) == g.size(), "generator", "needs N^2 entries in row-major order");
    cfg.generator = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        g.data(), n, n);
  }
  if (cfg.model.type == "counterexample") {
    switch (cfg.model.variant) {
      case CounterexampleVariant::uncontrolled: cfg.control = ControlMode::uncontrolled; break;
      case CounterexampleVariant::controlled: cfg.control = ControlMode::controlled; break;
      case CounterexampleVariant::delayed: cfg.control = ControlMode::delayed; break;
    }
    if (cfg.control == ControlMode::delayed) cfg.simulation.delay = cfg.model.epsilon;
    cfg.counterexample_epsilon = cfg.model.epsilon;
  }
  if (root.has("initial")) {
    Section s = root.sub("initial");
    if (s.has("state")) cfg.initial.state = s.vector("state");
    if (s.has("mode")) cfg.initial.mode = s.integer("mode");
    if (s.has("history")) cfg.initial.history = s.string("history");
    s.finish();
  }
  cfg.simulation.master_seed = cfg.seed;
  cfg.counterexample.seed = cfg.seed;
  if (root.has("simulation")) read_simulation(root.sub("simulation"), cfg);
  if (root.has("thresholds")) {
    Section s = root.sub("thresholds");
    cfg.thresholds.p = s.opt_number("p");
    cfg.thresholds.epsilon = s.opt_number("epsilon");
    cfg.thresholds.M = s.opt_number("M");
    cfg.thresholds.gamma = s.opt_number("gamma");
    if (s.has("lipschitz")) cfg.thresholds.lipschitz = read_lipschitz(s.sub("lipschitz"));
    s.finish();
  }
  if (root.has("certify")) {
    Section s = root.sub("certify");
    if (s.has("alpha")) cfg.certify.alpha = s.vector("alpha");
    if (s.has("p")) cfg.certify.p = s.number("p");
    s.finish();
  }
  if (root.has("counterexample")) {
    Section s = root.sub("counterexample");
    if (s.has("epsilon")) cfg.counterexample_epsilon = s.number("epsilon");
    if (s.has("step")) cfg.counterexample.step = s.number("step");
    if (s.has("paths")) cfg.counterexample.paths = s.count("paths");
    if (s.has("controlled_step")) cfg.counterexample.controlled_step = s.number("controlled_step");
    if (s.has("controlled_paths")) cfg.counterexample.controlled_paths = s.count("controlled_paths");
    if (s.has("explosion_cap")) cfg.counterexample.explosion_cap = s.number("explosion_cap");
    s.finish();
  }
  root.finish();
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, bool full_scale) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), full_scale, path.string());
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, text] : embedded_presets()) out.push_back(name);
    return out;
  }();
  return names;
}

const std::string& preset_text(const std::string& name) {
  const auto& presets = embedded_presets();
  const auto it = presets.find(name);
  if (it == presets.end()) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown preset '" + name + "' (known: " + known + ")");
  }
  return it->second;
}

RunConfig preset_config(const std::string& name, bool full_scale) {
  return parse_config(preset_text(name), full_scale, "preset " + name);
}

void validate_config(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  if (m.type == "oscillator") {
    if (m.design_p) {
      check(*m.design_p > 0.0 && *m.design_p < 1.0, "model.design_p", "must lie in (0, 1)");
      check(m.alpha_decimals >= -1 && m.alpha_decimals <= 15, "model.alpha_decimals", "must be -1 or in [0, 15]");
    } else {
      check_with("model", [&] { m.oscillator.validate(); });
    }
  }
  if (m.type == "counterexample" && m.variant == CounterexampleVariant::delayed) {
    check(m.epsilon > 0.0, "model.epsilon", "must be > 0");
  }
  if (m.lipschitz_source == LipschitzSource::given) check_with("model.lipschitz", [&] { m.lipschitz.validate(); });

  // Building the model runs the constructor checks (dimensions, zero condition).
  int modes = 1;
  int dimension = 1;
  check_with("model", [&] {
    const HybridModel model = build_model(cfg);
    modes = model.modes();
    dimension = model.dimension();
  });

  if (cfg.generator) {
    check_with("generator", [&] { GeneratorMatrix g(*cfg.generator); });
    check(cfg.generator->rows() == modes, "generator",
          "has " + std::to_string(cfg.generator->rows()) + " modes but the model has " + std::to_string(modes));
  } else {
    check(modes == 1, "generator", "is required for multi-mode models");
  }

  check(cfg.initial.mode >= 1 && cfg.initial.mode <= modes, "initial.mode",
        "must lie in 1.." + std::to_string(modes));
  if (cfg.initial.history == "counterexample") {
    check(m.type == "counterexample", "initial.history", "\"counterexample\" needs the counterexample model");
  } else {
    check(cfg.initial.history == "constant", "initial.history", "must be \"constant\" or \"counterexample\"");
    if (cfg.initial.state) {
      check(cfg.initial.state->size() == dimension, "initial.state",
            "must have " + std::to_string(dimension) + " entries");
    }
  }

  check(cfg.control != ControlMode::delayed || cfg.simulation.delay > 0.0, "simulation.delay",
        "must be > 0 for delayed control");
  check(cfg.control == ControlMode::delayed || cfg.simulation.delay == 0.0, "simulation.delay",
        "is only meaningful for delayed control");
  check(cfg.simulation.step > 0.0, "simulation.step", "must be > 0");
  check(cfg.simulation.horizon > 0.0, "simulation.horizon", "must be > 0");
  check(cfg.simulation.path_count >= 1, "simulation.paths", "must be >= 1");
  check(cfg.simulation.explosion_cap > 0.0, "simulation.explosion_cap", "must be > 0");
  check(cfg.record_points >= 2, "simulation.record_points", "must be >= 2");
  check(cfg.simulation.moment_order > 0.0, "simulation.moment_order", "must be > 0");
  check_with("simulation", [&] { build_simulation(cfg); });

  if (cfg.thresholds.p) check(*cfg.thresholds.p > 0.0, "thresholds.p", "must be > 0");
  if (cfg.thresholds.epsilon) {
    check(*cfg.thresholds.epsilon > 0.0 && *cfg.thresholds.epsilon < 1.0, "thresholds.epsilon", "must lie in (0, 1)");
  }
  if (cfg.thresholds.M) check(*cfg.thresholds.M > 0.0, "thresholds.M", "must be > 0");
  if (cfg.thresholds.gamma) check(*cfg.thresholds.gamma > 0.0, "thresholds.gamma", "must be > 0");
  if (cfg.thresholds.lipschitz) check_with("thresholds.lipschitz", [&] { cfg.thresholds.lipschitz->validate(); });

  if (cfg.certify.alpha) {
    check(cfg.certify.alpha->size() == modes, "certify.alpha", "must have one entry per mode");
  }
  check(cfg.certify.p > 0.0, "certify.p", "must be > 0");

  check(cfg.counterexample_epsilon > 0.0, "counterexample.epsilon", "must be > 0");
  check(cfg.counterexample.step > 0.0, "counterexample.step", "must be > 0");
  check(cfg.counterexample.paths >= 1, "counterexample.paths", "must be >= 1");
  check(cfg.counterexample.controlled_step > 0.0 && cfg.counterexample.controlled_step <= 1.0,
        "counterexample.controlled_step", "must lie in (0, 1]");
  check(cfg.counterexample.controlled_paths >= 1, "counterexample.controlled_paths", "must be >= 1");
  check(cfg.counterexample.explosion_cap > 0.0, "counterexample.explosion_cap", "must be > 0");
}

std::optional<OscillatorDesign> oscillator_design(const RunConfig& cfg) {
  if (cfg.model.type != "oscillator" || !cfg.model.design_p) return std::nullopt;
  return design_reference_oscillator(*cfg.model.design_p, QForm::printed, cfg.model.alpha_decimals);
}

namespace {

OscillatorParams configured_oscillator(const RunConfig& cfg) {
  if (!cfg.model.design_p) return cfg.model.oscillator;
  const auto gains = design_oscillator_gains(*cfg.model.design_p);
  return OscillatorParams::reference({gains[0], gains[1]});
}

LipschitzBounds oscillator_bounds(const ModelConfig& m, const OscillatorParams& params) {
  switch (m.lipschitz_source) {
    case LipschitzSource::quoted:
      return quoted_oscillator_lipschitz(params);
    case LipschitzSource::given:
      return m.lipschitz;
    case LipschitzSource::rigorous:
      break;
  }
  return oscillator_lipschitz(params);
}

}  // namespace

HybridModel build_model(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  const std::optional<LipschitzBounds> given =
      m.lipschitz_source == LipschitzSource::given ? std::optional(m.lipschitz) : std::nullopt;
  if (m.type == "oscillator") {
    const OscillatorParams params = configured_oscillator(cfg);
    return oscillator_model(params, oscillator_bounds(m, params));
  }
  if (m.type == "linear") return linear_model(m.linear, given);
  if (m.type == "counterexample") {
    HybridModel model = counterexample_model(m.variant, m.epsilon).model;
    return given ? model.with_lipschitz(*given) : model;
  }
  throw InvalidArgument("model.type: unknown model '" + m.type + "'");
}

GeneratorMatrix build_generator(const RunConfig& cfg) {
  if (cfg.generator) return GeneratorMatrix(*cfg.generator);
  return GeneratorMatrix(Matrix::Zero(1, 1));
}

SimulationConfig build_simulation(const RunConfig& cfg) {
  SimulationSettings s = cfg.simulation;
  if (s.record_times.empty()) {
    const auto n = cfg.record_points;
    for (std::size_t k = 0; k < n; ++k) {
      s.record_times.push_back(s.horizon * static_cast<double>(k) / static_cast<double>(n - 1));
    }
  }
  return SimulationConfig(std::move(s));
}

InitialSegment build_history(const RunConfig& cfg, const SimulationConfig& sim) {
  const ModeIndex mode(cfg.initial.mode);
  const double delay = sim.delay();
  if (cfg.initial.history == "counterexample") {
    const double eps = cfg.model.epsilon;
    return InitialSegment::from_function(counterexample_history(eps, zbar(eps)), delay, sim.step(), mode);
  }
  const int n = build_model(cfg).dimension();
  const Vector x0 = cfg.initial.state ? *cfg.initial.state : Vector::Ones(n);
  return InitialSegment::constant(x0, delay, sim.step(), mode);
}

ThresholdInputs build_threshold_inputs(const RunConfig& cfg) {
  ThresholdInputs in;
  const auto design = oscillator_design(cfg);
  in.p = cfg.thresholds.p ? *cfg.thresholds.p : (design ? design->p : 0.0);
  if (!cfg.thresholds.p && !design) throw InvalidArgument("thresholds.p: required");
  if (!cfg.thresholds.epsilon) throw InvalidArgument("thresholds.epsilon: required");
  in.epsilon = *cfg.thresholds.epsilon;

  if (cfg.thresholds.lipschitz) {
    in.lipschitz = *cfg.thresholds.lipschitz;
  } else {
    const HybridModel model = build_model(cfg);
    if (!model.globally_lipschitz()) {
      throw InvalidArgument("model: '" + model.name() +
                            "' is not globally Lipschitz, so the delay threshold does not apply to it");
    }
    in.lipschitz = model.lipschitz();
  }

  if (cfg.thresholds.M && cfg.thresholds.gamma) {
    in.M = *cfg.thresholds.M;
    in.gamma = *cfg.thresholds.gamma;
  } else if (design) {
    in.M = design->certificate.M;
    in.gamma = design->certificate.gamma;
  } else if (cfg.certify.alpha) {
    const MMatrixCertificate cert = certify_M_matrix(build_A(*cfg.certify.alpha, build_generator(cfg)));
    in.M = cert.M;
    in.gamma = cert.gamma;
  } else {
    throw InvalidArgument("thresholds: M and gamma are required (or certify.alpha, or an oscillator design_p)");
  }
  in.validate();
  return in;
}

LipschitzFn sweep_lipschitz(const RunConfig& cfg) {
  if (cfg.thresholds.lipschitz) return [L = *cfg.thresholds.lipschitz](double) { return L; };
  if (cfg.model.type == "oscillator" && cfg.model.design_p) {
    return [m = cfg.model](double p) {
      const auto gains = design_oscillator_gains(p);
      return oscillator_bounds(m, OscillatorParams::reference({gains[0], gains[1]}));
    };
  }
  const LipschitzBounds L = build_threshold_inputs(cfg).lipschitz;
  return [L](double) { return L; };
}

MomentCertificateFn sweep_certificate(const RunConfig& cfg) {
  if (!(cfg.thresholds.M && cfg.thresholds.gamma) && cfg.model.type == "oscillator" && cfg.model.design_p) {
    return [decimals = cfg.model.alpha_decimals](double p) {
      const auto design = design_reference_oscillator(p, QForm::printed, decimals);
      return std::make_pair(design.certificate.M, design.certificate.gamma);
    };
  }
  const ThresholdInputs in = build_threshold_inputs(cfg);
  return [M = in.M, gamma = in.gamma](double) { return std::make_pair(M, gamma); };
}

}  // namespace hsde
