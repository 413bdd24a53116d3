#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "conebound/certificate.hpp"
#include "conebound/model.hpp"

namespace conebound {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// matrices <-> JSON (row-major nested arrays; scalars accepted as 1x1)
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty())
    throw Error(field + ": expected a number or a nonempty array of rows");
  if (!j[0].is_array()) throw Error(field + ": matrix rows must be arrays (nested [[...]])");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  if (cols == 0) throw Error(field + ": matrix rows must be nonempty");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw Error(field + ": row " + std::to_string(i) + " has inconsistent length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number())
        throw Error(field + ": entry (" + std::to_string(i) + "," + std::to_string(c) +
                    ") is not a number");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// certificate serialization
// ---------------------------------------------------------------------------

inline json certificate_to_json(const AnalysisCertificate& c) {
  json j;
  j["Q"] = matrix_to_json(c.Q);
  j["X"] = matrix_to_json(c.X);
  j["Y"] = matrix_to_json(c.Y);
  j["R"] = matrix_to_json(c.R);
  if (c.lambda) j["lambda"] = *c.lambda;
  return j;
}

inline AnalysisCertificate certificate_from_json(const json& j) {
  AnalysisCertificate c;
  for (const char* f : {"Q", "X", "Y", "R"})
    if (!j.contains(f)) throw Error(std::string("certificate: missing field \"") + f + "\"");
  c.Q = matrix_from_json(j.at("Q"), "certificate.Q");
  c.X = matrix_from_json(j.at("X"), "certificate.X");
  c.Y = matrix_from_json(j.at("Y"), "certificate.Y");
  c.R = matrix_from_json(j.at("R"), "certificate.R");
  if (j.contains("lambda")) {
    if (!j.at("lambda").is_number()) throw Error("certificate.lambda must be a number");
    c.lambda = j.at("lambda").get<double>();
  }
  return c;
}

// ---------------------------------------------------------------------------
// problem files
// ---------------------------------------------------------------------------

struct ProblemOptions {
  double lambda_min = 1e-3;
  double lambda_max = 1e3;
  int lambda_points = 16;
  int refine_iters = 20;
  std::string objective = "min_trace_q";
  double eps_margin = -1.0;
  double dt = 0.0;
  double t_final = 0.0;
  int runs = 100;
  std::uint64_t seed = 1;
  double tol = 0.01;
};

struct ProblemFile {
  SystemModel model;
  MultiplierStructure structure;
  double disturbance_bound = 0.0;
  ProblemOptions options;
  std::string uncertainty_type;  // norm_bounded | sector_scalar | explicit
  double gain = 0.0;             // norm_bounded
  double sector_k = 0.0;         // sector_scalar
};

namespace detail {

inline double number_field(const json& j, const std::string& field, double fallback,
                           bool required = false) {
  if (!j.contains(field)) {
    if (required) throw Error("problem file: missing required field \"" + field + "\"");
    return fallback;
  }
  if (!j.at(field).is_number()) throw Error("problem file: \"" + field + "\" must be a number");
  return j.at(field).get<double>();
}

inline NSet parse_nset(const json& j) {
  if (!j.contains("variant") || !j.at("variant").is_string())
    throw Error("problem file: uncertainty.nset.variant must be a string");
  const std::string v = j.at("variant").get<std::string>();
  if (v == "fixed_pair")
    return NSet::fixed_pair(matrix_from_json(j.at("X"), "nset.X"),
                            matrix_from_json(j.at("Y"), "nset.Y"));
  if (v == "scalar_scaled_pair")
    return NSet::scalar_scaled_pair(matrix_from_json(j.at("X_hat"), "nset.X_hat"),
                                    matrix_from_json(j.at("Y_hat"), "nset.Y_hat"));
  if (v == "diagonal_pd") return NSet::diagonal_pd();
  if (v == "block_diagonal_pd") {
    if (!j.contains("x_blocks") || !j.contains("y_blocks"))
      throw Error("problem file: block_diagonal_pd needs x_blocks and y_blocks");
    return NSet::block_diagonal_pd(j.at("x_blocks").get<std::vector<int>>(),
                                   j.at("y_blocks").get<std::vector<int>>());
  }
  if (v == "free_pd") return NSet::free_pd();
  throw Error("problem file: unknown nset variant \"" + v + "\"");
}

}  // namespace detail

inline ProblemFile parse_problem(const json& j) {
  if (!j.contains("system") || !j.at("system").is_object())
    throw Error("problem file: missing \"system\" object");
  const json& sys = j.at("system");
  if (!sys.contains("A")) throw Error("problem file: system.A is required");

  ProblemFile pf;
  pf.model.A = matrix_from_json(sys.at("A"), "system.A");
  const int n = static_cast<int>(pf.model.A.rows());
  if (pf.model.A.cols() != n) throw Error("problem file: system.A must be square");

  // absent uncertainty/disturbance channels get 1-dimensional zero placeholders
  pf.model.E = sys.contains("E") ? matrix_from_json(sys.at("E"), "system.E")
                                 : Matrix::Zero(n, 1);
  pf.model.G = sys.contains("G") ? matrix_from_json(sys.at("G"), "system.G")
                                 : Matrix::Zero(n, 1);
  pf.model.Cq = sys.contains("C_q") ? matrix_from_json(sys.at("C_q"), "system.C_q")
                                    : Matrix::Zero(1, n);
  pf.model.D = sys.contains("D")
                   ? matrix_from_json(sys.at("D"), "system.D")
                   : Matrix::Zero(pf.model.Cq.rows(), pf.model.E.cols());

  const int nq = pf.model.nq(), np = pf.model.np();
  if (j.contains("uncertainty")) {
    const json& u = j.at("uncertainty");
    if (!u.contains("type") || !u.at("type").is_string())
      throw Error("problem file: uncertainty.type must be a string");
    pf.uncertainty_type = u.at("type").get<std::string>();
    if (pf.uncertainty_type == "norm_bounded") {
      pf.gain = detail::number_field(u, "gain", 0.0, true);
      if (!(pf.gain > 0.0)) throw Error("problem file: uncertainty.gain must be > 0");
      pf.structure = norm_bounded(pf.gain, nq, np);
    } else if (pf.uncertainty_type == "sector_scalar") {
      pf.sector_k = detail::number_field(u, "k", 0.0, true);
      if (!(pf.sector_k > 0.0)) throw Error("problem file: uncertainty.k must be > 0");
      if (nq != 1 || np != 1)
        throw Error("problem file: sector_scalar requires scalar p and q channels");
      pf.structure = sector_scalar(pf.sector_k);
    } else if (pf.uncertainty_type == "explicit") {
      pf.structure.T11 = matrix_from_json(u.at("T11"), "uncertainty.T11");
      pf.structure.T12 = matrix_from_json(u.at("T12"), "uncertainty.T12");
      pf.structure.T21 = matrix_from_json(u.at("T21"), "uncertainty.T21");
      pf.structure.T22 = matrix_from_json(u.at("T22"), "uncertainty.T22");
      if (!u.contains("nset")) throw Error("problem file: explicit uncertainty needs nset");
      pf.structure.nset = detail::parse_nset(u.at("nset"));
    } else {
      throw Error("problem file: unknown uncertainty.type \"" + pf.uncertainty_type + "\"");
    }
  } else {
    pf.uncertainty_type = "norm_bounded";
    pf.gain = 1.0;
    pf.structure = norm_bounded(1.0, nq, np);
  }

  pf.disturbance_bound = detail::number_field(j, "disturbance_bound", 0.0);
  if (pf.disturbance_bound < 0.0)
    throw Error("problem file: disturbance_bound must be >= 0");

  if (j.contains("options")) {
    const json& o = j.at("options");
    ProblemOptions& po = pf.options;
    po.lambda_min = detail::number_field(o, "lambda_min", po.lambda_min);
    po.lambda_max = detail::number_field(o, "lambda_max", po.lambda_max);
    po.lambda_points =
        static_cast<int>(detail::number_field(o, "lambda_points", po.lambda_points));
    po.refine_iters =
        static_cast<int>(detail::number_field(o, "refine_iters", po.refine_iters));
    po.eps_margin = detail::number_field(o, "eps_margin", po.eps_margin);
    po.dt = detail::number_field(o, "dt", po.dt);
    po.t_final = detail::number_field(o, "t_final", po.t_final);
    po.runs = static_cast<int>(detail::number_field(o, "runs", po.runs));
    po.seed = static_cast<std::uint64_t>(detail::number_field(o, "seed", 1.0));
    po.tol = detail::number_field(o, "tol", po.tol);
    if (o.contains("objective")) {
      if (!o.at("objective").is_string())
        throw Error("problem file: options.objective must be a string");
      po.objective = o.at("objective").get<std::string>();
    }
  }
  return pf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(what + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline ProblemFile load_problem(const std::string& path) {
  return parse_problem(parse_json_text(read_file(path), path));
}

inline AnalysisCertificate load_certificate(const std::string& path) {
  return certificate_from_json(parse_json_text(read_file(path), path));
}

inline std::string fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline Objective objective_from_string(const std::string& s) {
  if (s == "pure_feasibility") return Objective::PureFeasibility;
  if (s == "min_trace_q") return Objective::MinTraceQ;
  if (s == "max_trace_r") return Objective::MaxTraceR;
  throw Error("unknown objective \"" + s +
              "\" (expected pure_feasibility, min_trace_q or max_trace_r)");
}

}  // namespace conebound
