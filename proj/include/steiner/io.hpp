#pragma once

// Problem files, run summaries and density artifacts.
//
// Problem file grammar (JSON object, unknown keys rejected):
//   points     array of [x, y] pairs in the open unit square, at least two
//   root       integer index of the sink (optional, default: last point)
//   alpha      number in [0, 1] (optional, default 0)
//   grid_size  integer S >= 8 (optional, default 64)

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "steiner/density.hpp"
#include "steiner/errors.hpp"
#include "steiner/geometry.hpp"

namespace steiner {

inline TerminalProblem parse_problem(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("problem must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "points" && key != "root" && key != "alpha" && key != "grid_size")
      throw ConfigError("unknown problem field '" + key + "'");
  }
  TerminalProblem p;
  if (!j.contains("points") || !j["points"].is_array()) throw ConfigError("problem needs a 'points' array");
  for (const auto& pt : j["points"]) {
    if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
      throw ConfigError("every point must be a pair [x, y] of numbers");
    p.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  if (j.contains("root")) {
    if (!j["root"].is_number_integer()) throw ConfigError("'root' must be an integer");
    p.root = j["root"].get<int>();
  }
  if (j.contains("alpha")) {
    if (!j["alpha"].is_number()) throw ConfigError("'alpha' must be a number");
    p.alpha = j["alpha"].get<double>();
  }
  if (j.contains("grid_size")) {
    if (!j["grid_size"].is_number_integer()) throw ConfigError("'grid_size' must be an integer");
    p.grid_size = j["grid_size"].get<int>();
  }
  return p;
}

inline TerminalProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open problem file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed problem file " + path.string() + ": " + e.what());
  }
  return parse_problem(j);
}

inline nlohmann::json problem_to_json(const TerminalProblem& p) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& q : p.points) pts.push_back({q.x, q.y});
  return {{"points", pts}, {"root", p.root_index()}, {"alpha", p.alpha}, {"grid_size", p.grid_size}};
}

// Rounds to a multiple of 1e-12 so summaries do not carry round-off noise.
inline double quantize(double x) {
  if (!std::isfinite(x)) return x;
  const double q = std::round(x * 1e12) / 1e12;
  return q == 0.0 ? 0.0 : q;
}

inline nlohmann::json quantized(const nlohmann::json& j) {
  if (j.is_number_float()) return quantize(j.get<double>());
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : j.items()) out[k] = quantized(v);
    return out;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : j) out.push_back(quantized(v));
    return out;
  }
  return j;
}

// Summary of one solver run.
struct SolverSummary {
  std::string solver;  // "gamma" or "convex"
  double alpha = 0.0;
  double cost = 0.0;             // energy (gamma) or relaxed cost (convex)
  double length_estimate = 0.0;  // cost / c0 for gamma, the cost itself for convex
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  double gap = 0.0;  // convex only
};

inline nlohmann::json to_json(const SolverSummary& s) {
  nlohmann::json j{{"solver", s.solver},     {"alpha", s.alpha},         {"cost", s.cost},
                   {"length_estimate", s.length_estimate}, {"iterations", s.iterations},
                   {"converged", s.converged}, {"residual", s.residual}};
  if (s.solver == "convex") j["gap"] = s.gap;
  return j;
}

// Deterministic text for a JSON value: sorted keys (nlohmann objects are
// ordered maps), 1e-12 quantization, shortest round-trip floats.
inline std::string summary_text(const nlohmann::json& j) { return quantized(j).dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

// Binary portable graymap.
inline void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels, int width,
                      int height) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) throw ContractViolation("pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

// One row per triangle: index, barycenter, theta, per-component densities.
inline std::string density_csv(const TriMesh& mesh, const DensityField& d) {
  std::ostringstream out;
  out << "triangle,x,y,theta";
  for (std::size_t i = 0; i < d.flux.size(); ++i) out << ",density_" << (i + 1);
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.12e", quantize(v));
    out << buf;
  };
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const Point2 b = mesh.barycenter(t);
    out << t;
    put(b.x);
    put(b.y);
    put(d.theta[t]);
    for (const auto& f : d.flux) put(f[t]);
    out << "\n";
  }
  return out.str();
}

}  // namespace steiner
