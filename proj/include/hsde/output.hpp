#pragma once

#include "hsde/certify.hpp"
#include "hsde/models.hpp"
#include "hsde/simulate.hpp"
#include "hsde/thresholds.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace hsde {

// CSV files are UTF-8, comma separated, with one header row. The column
// order is part of the interface:
//
//   tau_star.csv      p,epsilon,L1,L2,L3,M,gamma,T,tau_star,lambda,residual
//   path CSV          t,x_1,...,x_n,mode
//   moment CSV        t,mean_moment,std_error,exploded_count
//   certificate CSV   mode,alpha,theta,beta1,beta2,M,gamma
//   riccati CSV       t,u,blown_up

/// Shortest decimal form that round-trips (%.17g trimmed), or inf/nan.
std::string format_number(double x);

struct TauStarRow {
  ThresholdInputs inputs;
  ThresholdResult result;
};

extern const char* const kTauStarHeader;
extern const char* const kMomentHeader;
extern const char* const kCertificateHeader;
extern const char* const kRiccatiHeader;

std::string path_header(int dimension);

void write_tau_star_csv(std::ostream& out, const std::vector<TauStarRow>& rows);
/// Sweep table in grid order, with the tau_star.csv columns; infeasible
/// points leave T through residual empty.
void write_tau_star_sweep_csv(std::ostream& out, const TauStarSweep& sweep, const LipschitzFn& lipschitz);
void write_path_csv(std::ostream& out, const Path& path, int dimension);
void write_moment_csv(std::ostream& out, const MomentEstimate& est);
void write_certificate_csv(std::ostream& out, const Vector& alpha, const MMatrixCertificate& cert);
void write_riccati_csv(std::ostream& out, const std::vector<double>& times, const std::vector<RiccatiValue>& values);

/// Line charts in SVG: the state components over time above the mode
/// staircase, for one or more paths.
void write_paths_svg(std::ostream& out, const std::vector<Path>& paths, int dimension, const std::string& title);
/// Moment estimate on a log axis.
void write_moment_svg(std::ostream& out, const MomentEstimate& est, const std::string& title);

/// Opens `path` for writing, creating parent directories; throws Error on failure.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace hsde
