#include "otube/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace otube::io {

using nlohmann::json;

std::string format_real(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

MatrixXd read_csv(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) throw ConfigError("CSV parse error in " + path + ": " + field);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("CSV rows have inconsistent lengths in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("CSV file is empty: " + path);
  MatrixXd M(Index(rows.size()), Index(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) M(i, j) = rows[i][j];
  return M;
}

void write_csv(const std::string& path, const MatrixXd& rows, const std::string& header) {
  std::string out;
  if (!header.empty()) out += header + "\n";
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j) {
      if (j) out += ",";
      out += format_real(rows(i, j));
    }
    out += "\n";
  }
  write_text(path, out);
}

namespace {

MatrixXd parse_matrix(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ConfigError("expected a matrix (array of arrays) for " + name);
  const Index rows = Index(j.size()), cols = Index(j.front().size());
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (Index(j[i].size()) != cols) throw ConfigError("ragged matrix for " + name);
    for (Index k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ConfigError("non-numeric entry in " + name);
      M(i, k) = j[i][k].get<double>();
    }
  }
  return M;
}

VectorXd parse_vector(const json& j, const std::string& name) {
  if (!j.is_array()) throw ConfigError("expected a vector (array) for " + name);
  VectorXd v(Index(j.size()));
  for (Index i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("non-numeric entry in " + name);
    v(i) = j[i].get<double>();
  }
  return v;
}

LtiSystemd parse_system(const json& j) {
  for (const char* key : {"A", "B", "D", "K", "x0"})
    if (!j.contains(key)) throw ConfigError(std::string("system: missing field ") + key);
  const MatrixXd A = parse_matrix(j["A"], "A");
  const MatrixXd B = parse_matrix(j["B"], "B");
  const MatrixXd D = parse_matrix(j["D"], "D");
  const VectorXd x0 = parse_vector(j["x0"], "x0");

  MatrixXd K;
  if (j["K"].is_object()) {
    if (!j["K"].contains("lqr")) throw ConfigError("system: K object must hold an lqr block");
    const json& lqr = j["K"]["lqr"];
    if (!lqr.contains("Q") || !lqr.contains("R"))
      throw ConfigError("system: lqr block needs Q and R");
    K = lqr_gain(A, B, parse_matrix(lqr["Q"], "Q"), parse_matrix(lqr["R"], "R"));
  } else {
    K = parse_matrix(j["K"], "K");
  }
  try {
    return LtiSystemd(A, B, D, K, x0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
}

json parse_root(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("invalid JSON");
  return j;
}

std::string join_path(const std::string& base, const std::string& path) {
  if (path.empty() || path.front() == '/' || base.empty()) return path;
  return base + "/" + path;
}

}  // namespace

LtiSystemd parse_system_json(const std::string& text) { return parse_system(parse_root(text)); }

ExperimentConfigd parse_experiment_json(const std::string& text, const std::string& base_dir,
                                        bool force_csv_header) {
  const json j = parse_root(text);
  if (!j.is_object()) throw ConfigError("config root must be an object");
  if (!j.contains("system")) throw ConfigError("config: missing system");
  if (!j.contains("horizon")) throw ConfigError("config: missing horizon");
  if (!j.contains("gamma")) throw ConfigError("config: missing gamma");

  ExperimentConfigd config{parse_system(j["system"])};
  if (!j["horizon"].is_number_integer() || j["horizon"].get<int>() < 1)
    throw ConfigError("config: horizon must be a positive integer");
  config.horizon = j["horizon"].get<int>();
  config.gamma = j["gamma"].get<double>();
  if (!(config.gamma > 0.0 && config.gamma < 1.0))
    throw ConfigError("config: gamma must lie in (0, 1)");

  if (j.contains("epsilons")) {
    for (const auto& e : j["epsilons"]) {
      const double eps = e.get<double>();
      if (eps < 0) throw ConfigError("config: epsilons must be >= 0");
      config.epsilons.push_back(eps);
    }
  }
  if (j.contains("directions")) config.directions = parse_matrix(j["directions"], "directions");
  if (j.contains("offsets")) config.offsets = parse_vector(j["offsets"], "offsets");
  if (j.contains("target")) {
    const json& t = j["target"];
    if (!t.contains("directions") || !t.contains("offsets"))
      throw ConfigError("config: target needs directions and offsets");
    try {
      config.target = Polytoped(parse_matrix(t["directions"], "target.directions"),
                                parse_vector(t["offsets"], "target.offsets"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: target: ") + e.what());
    }
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    if (t.contains("file")) {
      const bool header = force_csv_header || (t.contains("header") && t["header"].get<bool>());
      const MatrixXd rows = read_csv(join_path(base_dir, t["file"].get<std::string>()), header);
      // one row per trajectory, stacked latest-first
      try {
        config.training = TrajectoryBatchd(rows.transpose(), config.horizon,
                                           config.system.noise_dim());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: training file: ") + e.what());
      }
    } else if (t.contains("count")) {
      config.training_count = t["count"].get<Index>();
      if (config.training_count < 1) throw ConfigError("config: training count must be >= 1");
    } else {
      throw ConfigError("config: training needs either file or count");
    }
  }
  if (j.contains("test_count")) {
    config.test_count = j["test_count"].get<Index>();
    if (config.test_count < 1) throw ConfigError("config: test_count must be >= 1");
  }
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("v")) config.feedforward = parse_vector(j["v"], "v");
  if (j.contains("mode")) {
    const std::string mode = j["mode"].get<std::string>();
    if (mode == "trajectory")
      config.mode = LiftMode::Trajectory;
    else if (mode == "product")
      config.mode = LiftMode::ProductEnumerate;
    else
      throw ConfigError("config: mode must be trajectory or product");
  }
  return config;
}

namespace {

std::string json_vector(const VectorXd& v) {
  std::string out = "[";
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_real(v(i));
  }
  return out + "]";
}

std::string json_matrix(const MatrixXd& M) {
  std::string out = "[";
  for (Index i = 0; i < M.rows(); ++i) {
    if (i) out += ",";
    out += json_vector(M.row(i).transpose());
  }
  return out + "]";
}

std::string json_lambda(const SweepEvaluation& e) {
  if (e.lambda_analytic) return "null";
  return format_real(e.lambda);
}

}  // namespace

std::string results_json(const std::string& command, const ExperimentConfigd& config,
                         const std::vector<SweepEvaluation>& sweep,
                         const std::string& decision_key) {
  std::string out = "{\n";
  out += "  \"command\": \"" + command + "\",\n";
  out += "  \"horizon\": " + std::to_string(config.horizon) + ",\n";
  out += "  \"gamma\": " + format_real(config.gamma) + ",\n";
  out += "  \"mode\": \"" + std::string(to_string(config.mode)) + "\",\n";
  out += "  \"seed\": " + std::to_string(config.seed) + ",\n";
  out += "  \"results\": [\n";
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const auto& e = sweep[k];
    out += "    {\n";
    out += "      \"epsilon\": " + format_real(e.epsilon) + ",\n";
    out += "      \"status\": \"" + e.status + "\",\n";
    if (!decision_key.empty())
      out += "      \"" + decision_key + "\": " + json_vector(e.decision) + ",\n";
    out += "      \"objective\": " + format_real(e.objective) + ",\n";
    out += "      \"lambda\": " + json_lambda(e) + ",\n";
    out += "      \"post_hoc_worst_case\": " + format_real(e.post_hoc_worst_case) + ",\n";
    out += "      \"empirical_cvar\": " + format_real(e.empirical_cvar) + ",\n";
    out += "      \"violation_fraction\": " + format_real(e.violation_fraction) + "\n";
    out += k + 1 < sweep.size() ? "    },\n" : "    }\n";
  }
  out += "  ]\n}\n";
  return out;
}

std::string timings_json(const std::string& command, const std::vector<SweepEvaluation>& sweep) {
  std::string out = "{\n  \"command\": \"" + command + "\",\n  \"timings\": [\n";
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    out += "    {\"epsilon\": " + format_real(sweep[k].epsilon) +
           ", \"runtime_ms\": " + format_real(sweep[k].runtime_ms) + "}";
    out += k + 1 < sweep.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

std::string ambiguity_json(const AmbiguitySetd& ball, int horizon, double epsilon) {
  std::string out = "{\n";
  out += "  \"horizon\": " + std::to_string(horizon) + ",\n";
  out += "  \"epsilon\": " + format_real(epsilon) + ",\n";
  out += "  \"radius\": " + format_real(ball.radius) + ",\n";
  out += "  \"exactness\": \"" + std::string(to_string(ball.exactness)) + "\",\n";
  out += "  \"atom_count\": " + std::to_string(ball.center.size()) + ",\n";
  out += "  \"cost_matrix\": " + json_matrix(ball.cost.matrix()) + "\n";
  out += "}\n";
  return out;
}

std::string scatter_csv(const MatrixXd& train, const MatrixXd& test) {
  const Index d = train.rows() ? train.rows() : test.rows();
  std::string out = "set_kind";
  for (Index k = 0; k < d; ++k) out += ",x" + std::to_string(k + 1);
  out += "\n";
  auto append = [&](const char* kind, const MatrixXd& points) {
    for (Index i = 0; i < points.cols(); ++i) {
      out += kind;
      for (Index k = 0; k < points.rows(); ++k) out += "," + format_real(points(k, i));
      out += "\n";
    }
  };
  append("train", train);
  append("test", test);
  return out;
}

namespace {

// vertices of {x : Ax + b <= 0} in the plane, ordered counter-clockwise
std::vector<VectorXd> polytope_vertices(const Polytoped& poly) {
  std::vector<VectorXd> vertices;
  const Index J = poly.count();
  for (Index i = 0; i < J; ++i)
    for (Index j = i + 1; j < J; ++j) {
      MatrixXd A(2, 2);
      A.row(0) = poly.directions.row(i);
      A.row(1) = poly.directions.row(j);
      Eigen::FullPivLU<MatrixXd> lu(A);
      if (!lu.isInvertible()) continue;
      VectorXd rhs(2);
      rhs << -poly.offsets(i), -poly.offsets(j);
      VectorXd x = lu.solve(rhs);
      if (((poly.directions * x + poly.offsets).array() <= 1e-7).all()) vertices.push_back(x);
    }
  if (vertices.size() < 3) return vertices;
  VectorXd centroid = VectorXd::Zero(2);
  for (const auto& v : vertices) centroid += v;
  centroid /= double(vertices.size());
  std::sort(vertices.begin(), vertices.end(), [&](const VectorXd& a, const VectorXd& b) {
    return std::atan2(a(1) - centroid(1), a(0) - centroid(0)) <
           std::atan2(b(1) - centroid(1), b(0) - centroid(0));
  });
  return vertices;
}

}  // namespace

std::string scatter_svg(const MatrixXd& train, const MatrixXd& test, const Polytoped* poly,
                        const std::string& title) {
  const double width = 640, height = 640, margin = 60;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  auto widen = [&](const MatrixXd& pts) {
    for (Index i = 0; i < pts.cols(); ++i) {
      lo_x = std::min(lo_x, pts(0, i));
      hi_x = std::max(hi_x, pts(0, i));
      lo_y = std::min(lo_y, pts(1, i));
      hi_y = std::max(hi_y, pts(1, i));
    }
  };
  std::vector<VectorXd> vertices;
  if (train.rows() >= 2) widen(train);
  if (test.rows() >= 2) widen(test);
  if (poly && poly->dimension() == 2) {
    vertices = polytope_vertices(*poly);
    for (const auto& v : vertices) {
      lo_x = std::min(lo_x, v(0));
      hi_x = std::max(hi_x, v(0));
      lo_y = std::min(lo_y, v(1));
      hi_y = std::max(hi_y, v(1));
    }
  }
  if (lo_x > hi_x) {
    lo_x = lo_y = -1;
    hi_x = hi_y = 1;
  }
  const double pad_x = 0.05 * (hi_x - lo_x + 1e-9), pad_y = 0.05 * (hi_y - lo_y + 1e-9);
  lo_x -= pad_x;
  hi_x += pad_x;
  lo_y -= pad_y;
  hi_y += pad_y;

  auto map_x = [&](double x) {
    return margin + (x - lo_x) / (hi_x - lo_x) * (width - 2 * margin);
  };
  auto map_y = [&](double y) {
    return height - margin - (y - lo_y) / (hi_y - lo_y) * (height - 2 * margin);
  };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_real(width) + "\" height=\"" +
      format_real(height) + "\" viewBox=\"0 0 " + format_real(width) + " " + format_real(height) +
      "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + format_real(width / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title + "</text>\n";

  // axes with min/max annotations
  svg += "<line x1=\"" + format_real(margin) + "\" y1=\"" + format_real(height - margin) +
         "\" x2=\"" + format_real(width - margin) + "\" y2=\"" + format_real(height - margin) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + format_real(margin) + "\" y1=\"" + format_real(margin) + "\" x2=\"" +
         format_real(margin) + "\" y2=\"" + format_real(height - margin) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + format_real(margin) + "\" y=\"" + format_real(height - margin + 18) +
         "\" font-size=\"11\">" + format_real(lo_x) + "</text>\n";
  svg += "<text x=\"" + format_real(width - margin) + "\" y=\"" +
         format_real(height - margin + 18) + "\" text-anchor=\"end\" font-size=\"11\">" +
         format_real(hi_x) + "</text>\n";
  svg += "<text x=\"" + format_real(margin - 6) + "\" y=\"" + format_real(height - margin) +
         "\" text-anchor=\"end\" font-size=\"11\">" + format_real(lo_y) + "</text>\n";
  svg += "<text x=\"" + format_real(margin - 6) + "\" y=\"" + format_real(margin) +
         "\" text-anchor=\"end\" font-size=\"11\">" + format_real(hi_y) + "</text>\n";

  if (vertices.size() >= 3) {
    svg += "<polygon points=\"";
    for (std::size_t k = 0; k < vertices.size(); ++k) {
      if (k) svg += " ";
      svg += format_real(map_x(vertices[k](0))) + "," + format_real(map_y(vertices[k](1)));
    }
    svg += "\" fill=\"#dddddd\" stroke=\"#444444\"/>\n";
  }
  auto dots = [&](const MatrixXd& pts, const char* color, double r) {
    for (Index i = 0; i < pts.cols(); ++i)
      svg += "<circle cx=\"" + format_real(map_x(pts(0, i))) + "\" cy=\"" +
             format_real(map_y(pts(1, i))) + "\" r=\"" + format_real(r) + "\" fill=\"" + color +
             "\"/>\n";
  };
  if (test.rows() >= 2) dots(test, "#3366cc", 2.0);
  if (train.rows() >= 2) dots(train, "#cc3333", 4.0);
  svg += "</svg>\n";
  return svg;
}

}  // namespace otube::io
