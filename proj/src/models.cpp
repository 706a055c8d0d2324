#include "hsde/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsde {

namespace {

constexpr double kParamMatch = 1e-12;

std::size_t at(ModeIndex mode) { return mode.index(); }

double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace

// --- oscillator ------------------------------------------------------------

void OscillatorParams::validate() const {
  const std::size_t n = a.size();
  if (n == 0 || b.size() != n || c.size() != n || d.size() != n) {
    throw InvalidArgument("oscillator parameters a, b, c, d must have the same nonzero length");
  }
  for (const auto* v : {&a, &b, &c, &d}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw InvalidArgument("oscillator parameters must be finite");
    }
  }
  for (double x : d) {
    if (x < 0.0) throw InvalidArgument("oscillator gains d must be >= 0");
  }
}

OscillatorParams OscillatorParams::reference(std::vector<double> d) {
  return {{0.5, 0.1}, {0.4, 0.5}, {0.1, -0.1}, std::move(d)};
}

GeneratorMatrix reference_generator() { return GeneratorMatrix((Matrix(2, 2) << -1.0, 1.0, 2.0, -2.0).finished()); }

HybridModel oscillator_model(const OscillatorParams& params, std::optional<LipschitzBounds> lipschitz) {
  params.validate();
  HybridModelSpec spec;
  spec.name = "oscillator";
  spec.dimension = 2;
  spec.modes = params.modes();
  spec.brownian_dim = 1;
  spec.drift = [a = params.a, c = params.c](const ConstVectorRef& x, ModeIndex i, double, VectorRef out) {
    out[0] = x[1];
    out[1] = -x[0] - c[at(i)] * std::sin(x[0]) - a[at(i)] * x[1];
  };
  spec.diffusion = [b = params.b](const ConstVectorRef& x, ModeIndex i, double, MatrixRef out) {
    out(0, 0) = 0.0;
    out(1, 0) = -b[at(i)] * x[1];
  };
  spec.control = [d = params.d](const ConstVectorRef& x, ModeIndex i, double, VectorRef out) {
    out[0] = -d[at(i)] * x[0];
    out[1] = 0.0;
  };
  spec.lipschitz = lipschitz.value_or(oscillator_lipschitz(params));
  return HybridModel(std::move(spec));
}

std::array<double, 2> design_oscillator_gains(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("gain design needs p in (0, 1)");
  return {0.564 - 0.08 * p, 0.5625 + 0.25 * (1.0 - p)};
}

Matrix oscillator_Q(ModeIndex mode, double p, const OscillatorParams& params, QForm form) {
  params.validate();
  check_mode(mode, params.modes());
  const std::size_t i = at(mode);
  const double a = params.a[i], b = params.b[i], c = params.c[i], d = params.d[i];
  Matrix Q(2, 2);
  if (form == QForm::general) {
    const double off = 0.5 * (-a + 0.25 * b * b - d);
    Q << std::abs(c) - d, off, off, std::abs(c) - a - 0.5 * (1.0 - p) * b * b;
    return Q;
  }
  const OscillatorParams ref = OscillatorParams::reference(params.d);
  if (params.modes() != 2 || std::abs(a - ref.a[i]) > kParamMatch || std::abs(b - ref.b[i]) > kParamMatch ||
      std::abs(c - ref.c[i]) > kParamMatch) {
    throw InvalidArgument("the printed Q matrices exist only for the reference oscillator coefficients");
  }
  if (i == 0) {
    Q << 0.1 - d, -0.23 - 0.5 * d, -0.23 - 0.5 * d, -0.464 + 0.08 * p;
  } else {
    Q << 0.1 - d, 0.28125 - 0.5 * d, 0.28125 - 0.5 * d, -0.125 * (1.0 - p);
  }
  return Q;
}

bool quadrant_negativity(const Matrix& Q, double alpha) {
  if (Q.rows() != 2 || Q.cols() != 2) throw InvalidArgument("quadrant_negativity expects a 2x2 matrix");
  const double r11 = Q(0, 0) + alpha;
  const double r22 = Q(1, 1) + alpha;
  const double r12 = 0.5 * (Q(0, 1) + Q(1, 0)) + alpha;
  // Entries that vanish in exact arithmetic may round to a few ulps above zero.
  const double tol = 1e-12 * std::max({1.0, std::abs(Q(0, 0)), std::abs(Q(1, 1)), std::abs(Q(0, 1)), std::abs(alpha)});
  return r11 <= tol && r22 <= tol && (r12 <= tol || r12 * r12 <= r11 * r22 + tol * tol);
}

double max_quadrant_alpha(const Matrix& Q) {
  double hi = std::min(-Q(0, 0), -Q(1, 1));
  if (quadrant_negativity(Q, hi)) return hi;
  double lo = hi - (std::abs(Q(0, 1)) + std::abs(Q(1, 0)) + 1.0);
  while (!quadrant_negativity(Q, lo)) lo -= 2.0 * (hi - lo);
  while (hi - lo > 1e-14 * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (quadrant_negativity(Q, mid) ? lo : hi) = mid;
  }
  return lo;
}

LipschitzBounds oscillator_lipschitz(const OscillatorParams& params) {
  params.validate();
  LipschitzBounds L;
  for (int i = 0; i < params.modes(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    // The Jacobian is affine in cos(x1), so its norm peaks at cos = +-1.
    for (double s : {-1.0, 1.0}) {
      Matrix J(2, 2);
      J << 0.0, 1.0, -1.0 - params.c[k] * s, -params.a[k];
      L.drift = std::max(L.drift, spectral_norm(J));
    }
    L.control = std::max(L.control, params.d[k]);
    L.diffusion = std::max(L.diffusion, std::abs(params.b[k]));
  }
  return L;
}

LipschitzBounds quoted_oscillator_lipschitz(const OscillatorParams& params) {
  LipschitzBounds L = oscillator_lipschitz(params);
  L.drift = kQuotedOscillatorDriftLipschitz;
  return L;
}

OscillatorDesign design_reference_oscillator(double p, QForm form, int alpha_decimals) {
  OscillatorDesign design;
  design.p = p;
  design.gains = design_oscillator_gains(p);
  const OscillatorParams params = OscillatorParams::reference({design.gains[0], design.gains[1]});
  design.alpha.resize(2);
  for (int i = 0; i < 2; ++i) {
    design.Q[static_cast<std::size_t>(i)] = oscillator_Q(ModeIndex(i + 1), p, params, form);
    double alpha = max_quadrant_alpha(design.Q[static_cast<std::size_t>(i)]);
    if (alpha_decimals >= 0) {
      const double scale = std::pow(10.0, alpha_decimals);
      // The 1e-9 slack absorbs representation error in values like 0.3848.
      alpha = std::floor(alpha * scale + 1e-9) / scale;
    }
    design.alpha[i] = alpha;
  }
  design.certificate = certify_M_matrix(build_A(design.alpha, reference_generator()));
  return design;
}

// --- linear ----------------------------------------------------------------

LipschitzBounds linear_lipschitz(const LinearModelParams& params) {
  LipschitzBounds L;
  for (const auto& A : params.A) L.drift = std::max(L.drift, spectral_norm(A));
  for (const auto& D : params.D) L.control = std::max(L.control, spectral_norm(D));
  for (const auto& Gs : params.G) {
    if (Gs.empty()) continue;
    Matrix gram = Matrix::Zero(Gs.front().cols(), Gs.front().cols());
    for (const auto& G : Gs) gram += G.transpose() * G;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    L.diffusion = std::max(L.diffusion, std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff())));
  }
  return L;
}

HybridModel linear_model(const LinearModelParams& params, std::optional<LipschitzBounds> lipschitz) {
  const std::size_t modes = params.A.size();
  if (modes == 0) throw InvalidArgument("linear model needs at least one mode");
  if (params.G.size() != modes) throw InvalidArgument("linear model needs diffusion matrices for every mode");
  if (!params.D.empty() && params.D.size() != modes) throw InvalidArgument("control matrices must cover every mode");
  const Eigen::Index n = params.A.front().rows();
  const std::size_t m = params.G.front().size();
  if (n < 1 || m < 1) throw InvalidArgument("linear model needs n >= 1 and at least one diffusion matrix");
  auto square = [n](const Matrix& M) { return M.rows() == n && M.cols() == n; };
  for (std::size_t i = 0; i < modes; ++i) {
    if (!square(params.A[i])) throw InvalidArgument("every A_i must be n x n");
    if (params.G[i].size() != m) throw InvalidArgument("every mode needs the same number of diffusion matrices");
    for (const auto& G : params.G[i]) {
      if (!square(G)) throw InvalidArgument("every G_i^k must be n x n");
    }
    if (!params.D.empty() && !square(params.D[i])) throw InvalidArgument("every D_i must be n x n");
  }

  HybridModelSpec spec;
  spec.name = "linear";
  spec.dimension = static_cast<int>(n);
  spec.modes = static_cast<int>(modes);
  spec.brownian_dim = static_cast<int>(m);
  spec.drift = [A = params.A](const ConstVectorRef& x, ModeIndex i, double, VectorRef out) {
    out.noalias() = A[at(i)] * x;
  };
  spec.diffusion = [G = params.G](const ConstVectorRef& x, ModeIndex i, double, MatrixRef out) {
    const auto& Gs = G[at(i)];
    for (std::size_t k = 0; k < Gs.size(); ++k) out.col(static_cast<Eigen::Index>(k)).noalias() = Gs[k] * x;
  };
  if (!params.D.empty()) {
    spec.control = [D = params.D](const ConstVectorRef& x, ModeIndex i, double, VectorRef out) {
      out.noalias() = -(D[at(i)] * x);
    };
  }
  spec.lipschitz = lipschitz.value_or(linear_lipschitz(params));
  return HybridModel(std::move(spec));
}

// --- counterexample --------------------------------------------------------

CounterexampleVariant parse_counterexample_variant(const std::string& name) {
  if (name == "uncontrolled") return CounterexampleVariant::uncontrolled;
  if (name == "controlled") return CounterexampleVariant::controlled;
  if (name == "delayed") return CounterexampleVariant::delayed;
  throw InvalidArgument("unknown counterexample variant '" + name + "'");
}

CounterexampleSystem counterexample_model(CounterexampleVariant variant, double epsilon) {
  if (variant == CounterexampleVariant::delayed && !(epsilon > 0.0)) {
    throw InvalidArgument("the delayed counterexample needs epsilon > 0");
  }
  HybridModelSpec spec;
  spec.name = "counterexample";
  spec.dimension = 1;
  spec.modes = 1;
  spec.brownian_dim = 1;
  spec.globally_lipschitz = false;
  spec.drift = [](const ConstVectorRef& x, ModeIndex, double, VectorRef out) { out[0] = -x[0]; };
  spec.diffusion = [](const ConstVectorRef& x, ModeIndex, double, MatrixRef out) { out(0, 0) = x[0] * x[0]; };
  if (variant != CounterexampleVariant::uncontrolled) {
    spec.control = [](const ConstVectorRef& x, ModeIndex, double, VectorRef out) {
      out[0] = -2.0 * x[0] * x[0] * x[0];
    };
  }
  switch (variant) {
    case CounterexampleVariant::uncontrolled:
      return {HybridModel(std::move(spec)), ControlMode::uncontrolled, 0.0};
    case CounterexampleVariant::controlled:
      return {HybridModel(std::move(spec)), ControlMode::controlled, 0.0};
    case CounterexampleVariant::delayed:
      break;
  }
  return {HybridModel(std::move(spec)), ControlMode::delayed, epsilon};
}

namespace {

double zbar_residual(double z, double epsilon) {
  return 0.5 - 2.0 / (z * z) - std::exp(-epsilon * (2.0 + 0.5 * z * z));
}

}  // namespace

double zbar(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be > 0");
  double lo = 2.0;
  if (!(zbar_residual(lo, epsilon) < 0.0)) throw Error("no root above z = 2");
  double hi = 4.0;
  while (!(zbar_residual(hi, epsilon) > 0.0)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e150) throw Error("z-bar bracket failed");
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (zbar_residual(mid, epsilon) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void CounterexampleParams::validate() const {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
  if (!(z_bar >= 2.0)) throw InvalidArgument("z_bar must be >= 2");
  if (std::abs(zbar_residual(z_bar, epsilon)) > 1e-10) throw InvalidArgument("z_bar is not a root of the equation");
}

RiccatiValue riccati_u(double t, double z_bar) {
  if (!(t >= 0.0)) throw InvalidArgument("t must be >= 0");
  const double z2 = z_bar * z_bar;
  const double a = 2.0 + 0.5 * z2;
  // e^{at}(1/z^2 + (e^{-at} - 1)/a) rewritten to avoid cancellation.
  const double bracket = 1.0 / z2 + std::expm1(a * t) * (1.0 / z2 - 1.0 / a);
  if (!(bracket > 0.0)) return {true, std::numeric_limits<double>::infinity()};
  return {false, 1.0 / bracket};
}

double riccati_blowup_time(double z_bar) {
  const double z2 = z_bar * z_bar;
  const double a = 2.0 + 0.5 * z2;
  if (!(a < z2)) return std::numeric_limits<double>::infinity();
  return -std::log1p(-a / z2) / a;
}

std::function<Vector(double)> counterexample_history(double epsilon, double z_bar) {
  const double plateau = std::min(z_bar, std::cbrt(z_bar * z_bar / 8.0));
  return [=](double theta) {
    Vector x(1);
    if (theta <= -0.5 * epsilon) {
      x[0] = plateau;
    } else {
      const double w = (theta + 0.5 * epsilon) / (0.5 * epsilon);
      x[0] = plateau + (z_bar - plateau) * std::min(1.0, w);
    }
    return x;
  };
}

InstabilityReport demonstrate_instability(double epsilon, const InstabilityOptions& opts) {
  InstabilityReport report;
  report.epsilon = epsilon;
  report.z_bar = zbar(epsilon);
  report.blowup_time = riccati_blowup_time(report.z_bar);
  report.paths = opts.paths;
  const GeneratorMatrix single(Matrix::Zero(1, 1));

  {
    const CounterexampleSystem sys = counterexample_model(CounterexampleVariant::delayed, epsilon);
    SimulationSettings s;
    s.step = opts.step;
    s.horizon = epsilon;
    s.delay = epsilon;
    s.path_count = opts.paths;
    s.master_seed = opts.seed;
    s.moment_order = 2.0;
    s.explosion_cap = opts.explosion_cap;
    s.workers = opts.workers;
    for (int k = 0; k <= 100; ++k) s.record_times.push_back(epsilon * k / 100.0);
    const SimulationConfig cfg(s);
    const InitialSegment history = InitialSegment::from_function(
        counterexample_history(epsilon, report.z_bar), cfg.delay(), cfg.step(), ModeIndex(1));
    report.delayed_second_moment = monte_carlo_moment(sys.model, single, history, cfg, sys.control_mode);
    report.capped_before_epsilon = report.delayed_second_moment.exploded_count.back();
    report.capped_fraction = static_cast<double>(report.capped_before_epsilon) / static_cast<double>(opts.paths);
    report.riccati_times = report.delayed_second_moment.times;
    for (double t : report.riccati_times) report.riccati_curve.push_back(riccati_u(t, report.z_bar));
  }

  auto fourth_moment = [&](CounterexampleVariant variant) {
    const CounterexampleSystem sys = counterexample_model(variant);
    SimulationSettings s;
    s.step = opts.controlled_step;
    s.horizon = 1.0;
    s.path_count = opts.controlled_paths;
    s.master_seed = opts.seed;
    s.moment_order = 4.0;
    s.explosion_cap = opts.explosion_cap;
    s.workers = opts.workers;
    for (int k = 0; k <= 100; ++k) s.record_times.push_back(k / 100.0);
    const SimulationConfig cfg(s);
    const InitialSegment x0 = InitialSegment::constant(Vector::Ones(1), 0.0, cfg.step(), ModeIndex(1));
    return monte_carlo_moment(sys.model, single, x0, cfg, sys.control_mode);
  };
  report.controlled_fourth_moment = fourth_moment(CounterexampleVariant::controlled);
  report.uncontrolled_fourth_moment = fourth_moment(CounterexampleVariant::uncontrolled);
  report.controlled_bound_at_1 = std::exp(-4.0);
  return report;
}

}  // namespace hsde
