// File formats of the command-line tools: CSV sample ingestion, JSON system
// and experiment configuration, deterministic results emission (every number
// at 17 significant digits), and the SVG scatter renderer.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "otube/apps.hpp"
#include "otube/lti.hpp"
#include "otube/types.hpp"

namespace otube::io {

/// Configuration-level failure (bad schema, unreadable file); the CLI maps
/// this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest exact decimal representation used everywhere we emit numbers:
/// 17 significant digits round-trip any double.
std::string format_real(double value);

/// Reads a rectangular CSV of reals, one row per line. `header` skips the
/// first line.
MatrixXd read_csv(const std::string& path, bool header = false);

/// Writes a matrix as CSV rows (17 significant digits), optional header line.
void write_csv(const std::string& path, const MatrixXd& rows,
               const std::string& header = "");

/// Parses the JSON system description
///   {"A": [[..]], "B": [[..]], "D": [[..]],
///    "K": [[..]] | {"lqr": {"Q": [[..]], "R": [[..]]}}, "x0": [..]}
/// from raw JSON text. Gains requested via "lqr" are synthesized on the spot.
LtiSystemd parse_system_json(const std::string& text);

/// Parses a full experiment configuration; `base_dir` anchors relative sample
/// file paths, `force_csv_header` makes sample CSV ingestion skip a header
/// line regardless of the config. Schema violations throw ConfigError.
ExperimentConfigd parse_experiment_json(const std::string& text, const std::string& base_dir,
                                        bool force_csv_header = false);

/// Reads a whole file into a string (ConfigError when unreadable).
std::string slurp(const std::string& path);

struct SweepEvaluation {
  double epsilon = 0;
  std::string status;
  double objective = 0;
  double lambda = 0;
  bool lambda_analytic = false;
  VectorXd decision;
  double post_hoc_worst_case = 0;
  double empirical_cvar = 0;
  double violation_fraction = 0;
  double runtime_ms = 0;
};

/// Deterministic results JSON for a sweep (reach/plan/cvar share the shape;
/// `decision_key` names the decision block, empty to omit it). Runtime goes
/// to the separate timings document so results bytes depend only on config
/// and seed.
std::string results_json(const std::string& command, const ExperimentConfigd& config,
                         const std::vector<SweepEvaluation>& sweep,
                         const std::string& decision_key);

/// Per-epsilon wall-clock milliseconds.
std::string timings_json(const std::string& command, const std::vector<SweepEvaluation>& sweep);

/// Summary of a propagated state ambiguity set (cost matrix, radius,
/// exactness); the center atoms travel separately as CSV.
std::string ambiguity_json(const AmbiguitySetd& ball, int horizon, double epsilon);

/// Scatter CSV with columns (set_kind, x1, .., xd) for train/test points.
std::string scatter_csv(const MatrixXd& train, const MatrixXd& test);

/// Axis-annotated SVG scatter of train/test points with the polytope edges
/// (2-D only; the polytope is omitted in other dimensions).
std::string scatter_svg(const MatrixXd& train, const MatrixXd& test, const Polytoped* poly,
                        const std::string& title);

void write_text(const std::string& path, const std::string& content);

}  // namespace otube::io
