#include "hsde/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace hsde {

const char* const kTauStarHeader = "p,epsilon,L1,L2,L3,M,gamma,T,tau_star,lambda,residual";
const char* const kMomentHeader = "t,mean_moment,std_error,exploded_count";
const char* const kCertificateHeader = "mode,alpha,theta,beta1,beta2,M,gamma";
const char* const kRiccatiHeader = "t,u,blown_up";

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string path_header(int dimension) {
  std::string h = "t";
  for (int k = 1; k <= dimension; ++k) h += ",x_" + std::to_string(k);
  return h + ",mode";
}

namespace {

void write_inputs(std::ostream& out, double p, double epsilon, const LipschitzBounds& L, double M, double gamma) {
  out << format_number(p) << ',' << format_number(epsilon) << ',' << format_number(L.drift) << ','
      << format_number(L.control) << ',' << format_number(L.diffusion) << ',' << format_number(M) << ','
      << format_number(gamma);
}

void write_result(std::ostream& out, const ThresholdResult& r) {
  out << ',' << format_number(r.T) << ',' << format_number(r.tau_star) << ',' << format_number(r.lambda) << ','
      << format_number(r.residual);
}

}  // namespace

void write_tau_star_csv(std::ostream& out, const std::vector<TauStarRow>& rows) {
  out << kTauStarHeader << '\n';
  for (const auto& row : rows) {
    const auto& in = row.inputs;
    write_inputs(out, in.p, in.epsilon, in.lipschitz, in.M, in.gamma);
    write_result(out, row.result);
    out << '\n';
  }
}

void write_tau_star_sweep_csv(std::ostream& out, const TauStarSweep& sweep, const LipschitzFn& lipschitz) {
  out << kTauStarHeader << '\n';
  for (const auto& pt : sweep.table) {
    write_inputs(out, pt.p, pt.epsilon, lipschitz(pt.p), pt.M, pt.gamma);
    if (pt.result) {
      write_result(out, *pt.result);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

void write_path_csv(std::ostream& out, const Path& path, int dimension) {
  out << path_header(dimension) << '\n';
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    out << format_number(path.times[k]);
    for (int j = 0; j < dimension; ++j) out << ',' << format_number(path.states[k][j]);
    out << ',' << path.modes[k].value() << '\n';
  }
}

void write_moment_csv(std::ostream& out, const MomentEstimate& est) {
  out << kMomentHeader << '\n';
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    out << format_number(est.times[k]) << ',' << format_number(est.mean_moment[k]) << ','
        << format_number(est.std_error[k]) << ',' << est.exploded_count[k] << '\n';
  }
}

void write_certificate_csv(std::ostream& out, const Vector& alpha, const MMatrixCertificate& cert) {
  out << kCertificateHeader << '\n';
  for (Eigen::Index i = 0; i < cert.theta.size(); ++i) {
    out << i + 1 << ',' << format_number(alpha[i]) << ',' << format_number(cert.theta[i]) << ','
        << format_number(cert.beta1) << ',' << format_number(cert.beta2) << ',' << format_number(cert.M) << ','
        << format_number(cert.gamma) << '\n';
  }
}

void write_riccati_csv(std::ostream& out, const std::vector<double>& times, const std::vector<RiccatiValue>& values) {
  out << kRiccatiHeader << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << format_number(times[k]) << ',' << (values[k].blown_up ? "" : format_number(values[k].value)) << ','
        << (values[k].blown_up ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Panel {
  double left, top, width, height;
  double x0, x1, y0, y1;

  double sx(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double sy(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

void widen(double& lo, double& hi) {
  if (!(lo < hi)) {
    const double pad = std::max(1.0, std::abs(lo)) * 0.5;
    lo -= pad;
    hi += pad;
  }
}

std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

void svg_begin(std::ostream& out, double width, double height, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
}

void draw_axes(std::ostream& out, const Panel& p, const std::string& xlabel, const std::string& ylabel,
               bool log_y = false) {
  out << "<rect x=\"" << fixed(p.left) << "\" y=\"" << fixed(p.top) << "\" width=\"" << fixed(p.width)
      << "\" height=\"" << fixed(p.height) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = p.x0 + (p.x1 - p.x0) * k / 4.0;
    const double y = p.y0 + (p.y1 - p.y0) * k / 4.0;
    out << "<text x=\"" << fixed(p.sx(x)) << "\" y=\"" << fixed(p.top + p.height + 14)
        << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
    out << "<text x=\"" << fixed(p.left - 4) << "\" y=\"" << fixed(p.sy(y) + 4) << "\" text-anchor=\"end\">"
        << (log_y ? "1e" + tick_label(y) : tick_label(y)) << "</text>\n";
  }
  out << "<text x=\"" << fixed(p.left + p.width / 2) << "\" y=\"" << fixed(p.top + p.height + 30)
      << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  out << "<text transform=\"translate(" << fixed(p.left - 48) << "," << fixed(p.top + p.height / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
}

void polyline(std::ostream& out, const Panel& p, const std::vector<double>& xs, const std::vector<double>& ys,
              const char* colour) {
  out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!std::isfinite(ys[k])) continue;
    out << fixed(p.sx(xs[k])) << ',' << fixed(p.sy(ys[k])) << ' ';
  }
  out << "\"/>\n";
}

}  // namespace

void write_paths_svg(std::ostream& out, const std::vector<Path>& paths, int dimension, const std::string& title) {
  const double width = 800, height = 560;
  double t1 = 0.0, ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  int max_mode = 1;
  for (const auto& path : paths) {
    if (!path.times.empty()) t1 = std::max(t1, path.times.back());
    for (std::size_t k = 0; k < path.states.size(); ++k) {
      for (int j = 0; j < dimension; ++j) {
        ylo = std::min(ylo, path.states[k][j]);
        yhi = std::max(yhi, path.states[k][j]);
      }
      max_mode = std::max(max_mode, path.modes[k].value());
    }
  }
  if (!std::isfinite(ylo)) ylo = yhi = 0.0;
  double t0 = 0.0;
  widen(t0, t1);
  widen(ylo, yhi);

  svg_begin(out, width, height, title);
  const Panel states{70, 35, 700, 330, t0, t1, ylo, yhi};
  const Panel modes{70, 420, 700, 90, t0, t1, 0.5, max_mode + 0.5};
  draw_axes(out, states, "t", "x(t)");
  draw_axes(out, modes, "t", "r(t)");

  for (std::size_t n = 0; n < paths.size(); ++n) {
    const Path& path = paths[n];
    for (int j = 0; j < dimension; ++j) {
      std::vector<double> ys;
      for (const auto& x : path.states) ys.push_back(x[j]);
      polyline(out, states, path.times, ys, kPalette[static_cast<std::size_t>(j) % std::size(kPalette)]);
    }
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
      if (k > 0) {
        xs.push_back(path.times[k]);
        ys.push_back(path.modes[k - 1].value());
      }
      xs.push_back(path.times[k]);
      ys.push_back(path.modes[k].value());
    }
    polyline(out, modes, xs, ys, "black");
  }
  for (int j = 0; j < dimension; ++j) {
    out << "<text x=\"" << 80 + 50 * j << "\" y=\"" << 52 << "\" fill=\""
        << kPalette[static_cast<std::size_t>(j) % std::size(kPalette)] << "\">x_" << j + 1 << "</text>\n";
  }
  out << "</svg>\n";
}

void write_moment_svg(std::ostream& out, const MomentEstimate& est, const std::string& title) {
  std::vector<double> logs;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double m : est.mean_moment) {
    const double v = m > 0.0 ? std::log10(m) : std::numeric_limits<double>::quiet_NaN();
    logs.push_back(v);
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  double t0 = est.times.empty() ? 0.0 : est.times.front();
  double t1 = est.times.empty() ? 1.0 : est.times.back();
  widen(t0, t1);
  widen(lo, hi);
  svg_begin(out, 800, 420, title);
  const Panel panel{80, 35, 690, 330, t0, t1, lo, hi};
  draw_axes(out, panel, "t", "E|x(t)|^" + tick_label(est.moment_order), true);
  polyline(out, panel, est.times, logs, kPalette[0]);
  out << "</svg>\n";
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace hsde
