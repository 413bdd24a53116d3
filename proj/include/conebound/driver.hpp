#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include "conebound/problem_io.hpp"
#include "conebound/simulate.hpp"
#include "conebound/version.hpp"

namespace conebound {
namespace driver {

// exit codes: 0 success / feasible, 2 sound negative (infeasible or a failed
// check), 1 error
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNegative = 2;

struct CommonOptions {
  std::string out_dir;  // empty: no files written
  std::optional<double> lambda_min, lambda_max;
  std::optional<int> lambda_points, refine_iters;
  std::optional<std::string> objective;
  std::optional<double> eps_margin;
  std::optional<double> dt, t_final;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

struct CmdResult {
  int exit_code = kExitOk;
  json report;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline ProblemOptions merge_options(ProblemOptions po, const CommonOptions& c) {
  if (c.lambda_min) po.lambda_min = *c.lambda_min;
  if (c.lambda_max) po.lambda_max = *c.lambda_max;
  if (c.lambda_points) po.lambda_points = *c.lambda_points;
  if (c.refine_iters) po.refine_iters = *c.refine_iters;
  if (c.objective) po.objective = *c.objective;
  if (c.eps_margin) po.eps_margin = *c.eps_margin;
  if (c.dt) po.dt = *c.dt;
  if (c.t_final) po.t_final = *c.t_final;
  if (c.runs) po.runs = *c.runs;
  if (c.seed) po.seed = *c.seed;
  if (c.tol) po.tol = *c.tol;
  return po;
}

inline json check_items_json(const std::vector<CheckItem>& items) {
  json arr = json::array();
  for (const auto& c : items) {
    json e;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["value"] = c.value;
    if (!c.detail.empty()) e["detail"] = c.detail;
    arr.push_back(std::move(e));
  }
  return arr;
}

inline json certificate_report_json(const CertificateReport& r) {
  json j;
  j["pass"] = r.pass;
  j["lmi_max_eig"] = r.lmi_max_eig;
  j["tolerance"] = r.tolerance;
  j["checks"] = check_items_json(r.checks);
  return j;
}

inline json proof_chain_json(const ProofChainReport& r) {
  json j;
  j["pass"] = r.pass;
  j["tolerance"] = r.tolerance;
  json steps = json::array();
  for (const auto& s : r.steps) {
    json e;
    e["name"] = s.name;
    e["pass"] = s.pass;
    e["max_eig"] = s.max_eig;
    e["residual"] = s.residual;
    steps.push_back(std::move(e));
  }
  j["steps"] = std::move(steps);
  return j;
}

inline json spotcheck_json(const SpotcheckReport& r) {
  json j;
  j["pass"] = r.pass;
  j["samples"] = r.samples;
  j["max_form_value"] = r.max_form_value;
  j["matrix_max_eig"] = r.matrix_max_eig;
  j["implication_checked"] = r.implication_checked;
  j["implication_worst"] = r.implication_worst;
  j["tolerance"] = r.tolerance;
  return j;
}

inline json bound_json(const UltimateBound& b) {
  json j;
  j["P"] = matrix_to_json(b.P);
  j["w_bound"] = b.w_bound;
  j["ellipsoid_level"] = b.level;
  j["radius"] = b.radius;
  j["decay_rate"] = b.decay_rate;
  return j;
}

inline json lambda_eval_json(const LambdaEval& e) {
  json j;
  j["lambda"] = e.lambda;
  j["status"] = to_string(e.status);
  j["margin"] = e.margin;
  j["objective_value"] = e.objective_value;
  j["trace_Q"] = e.trace_q;
  return j;
}

inline json monte_carlo_json(const MonteCarloReport& r) {
  json j;
  j["all_pass"] = r.all_pass;
  j["runs_total"] = static_cast<int>(r.runs.size());
  j["runs_ok"] = r.n_ok;
  j["invariance_passes"] = r.invariance_passes;
  j["limsup_passes"] = r.limsup_passes;
  j["decrement_passes"] = r.decrement_passes;
  j["empirical_tightest_level"] = r.empirical_tightest_level;
  j["certified_level"] = r.level;
  j["decay_rate"] = r.decay_rate;
  j["dt"] = r.dt_used;
  j["t_final"] = r.t_final_used;
  json runs = json::array();
  for (const auto& rr : r.runs) {
    json e;
    e["index"] = rr.index;
    e["sampler"] = rr.sampler;
    e["disturbance"] = rr.disturbance;
    e["within_lemma_hypotheses"] = rr.within_lemma_hypotheses;
    e["ok"] = rr.ok;
    if (!rr.error.empty()) e["error"] = rr.error;
    e["V0"] = rr.V0;
    e["tail_max"] = rr.tail_max;
    e["invariance_pass"] = rr.invariance_pass;
    e["limsup_pass"] = rr.limsup_pass;
    e["limsup_applicable"] = rr.limsup_applicable;
    e["decrement_pass"] = rr.decrement_pass;
    e["decrement_checked"] = rr.decrement_checked;
    runs.push_back(std::move(e));
  }
  j["runs"] = std::move(runs);
  return j;
}

inline json base_report(const std::string& command, const std::string& input_path,
                        const std::string& input_bytes) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["input"] = {{"path", input_path}, {"digest", fnv1a_digest(input_bytes)}};
  return j;
}

inline void write_out_file(const std::string& out_dir, const std::string& name,
                           const std::string& content) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path p = fs::path(out_dir) / name;
  std::ofstream f(p);
  if (!f) throw Error("cannot write output file: " + p.string());
  f << content;
}

inline void maybe_write_report(const std::string& out_dir, const json& rep) {
  if (!out_dir.empty()) write_out_file(out_dir, "report.json", rep.dump(2) + "\n");
}

// Samplers and disturbances for the empirical validation path, derived from
// the problem's uncertainty class and disturbance bound.
inline void default_scenarios(const ProblemFile& pf, const AnalysisCertificate& cert,
                              double w_bound, MonteCarloConfig* cfg) {
  const Matrix P = pd_inverse(cert.Q, "simulate setup: Q");
  if (pf.uncertainty_type == "norm_bounded") {
    cfg->samplers.push_back(ConicSampler::norm_bounded(pf.gain));
    cfg->samplers.push_back(ConicSampler::adversarial(pf.gain, P, pf.model.E));
  } else if (pf.uncertainty_type == "sector_scalar") {
    cfg->samplers.push_back(ConicSampler::sector_scalar(pf.sector_k));
  } else {
    // No admissibility oracle for explicit multiplier classes: simulate the
    // nominal p = 0 selection only.
    cfg->samplers.push_back(ConicSampler::norm_bounded(1e-12));
  }
  const int nw = pf.model.nw();
  if (w_bound > 0.0) {
    const Vector dir = Vector::Constant(nw, 1.0 / std::sqrt(static_cast<double>(nw)));
    cfg->disturbances.push_back(DisturbanceSignal::constant(w_bound * dir));
    Vector freq(nw), phase(nw);
    for (int i = 0; i < nw; ++i) {
      freq(i) = 0.25 * (i + 1);
      phase(i) = 0.5 * i;
    }
    cfg->disturbances.push_back(DisturbanceSignal::sinusoid(w_bound * dir, freq, phase));
    const double alpha = std::max(ultimate_bound(cert, w_bound).decay_rate, 1e-6);
    const double horizon = std::min(std::max(10.0 / alpha, 1.0), 1e5);
    cfg->disturbances.push_back(
        DisturbanceSignal::piecewise_constant_random(nw, w_bound, horizon / 25.0, 77));
  } else {
    cfg->disturbances.push_back(DisturbanceSignal::zero(nw));
  }
}

}  // namespace detail

// -------------------------------------------------------------------------
// validate
// -------------------------------------------------------------------------
inline CmdResult cmd_validate(const std::string& problem_path, const CommonOptions& opts = {}) {
  const std::string bytes = read_file(problem_path);
  const ProblemFile pf = parse_problem(parse_json_text(bytes, problem_path));
  const ValidationReport rep = validate_model(pf.model, pf.structure);

  CmdResult res;
  res.report = detail::base_report("validate", problem_path, bytes);
  res.report["pass"] = rep.pass;
  res.report["checks"] = detail::check_items_json(rep.checks);
  res.exit_code = rep.pass ? kExitOk : kExitError;
  detail::maybe_write_report(opts.out_dir, res.report);
  return res;
}

namespace detail {

// shared tail of analyze/stability: check the fresh certificate, replay the
// proof chain, spot-check the final inequality, report
inline CmdResult finish_feasible(const std::string& command, const std::string& problem_path,
                                 const std::string& bytes, const ProblemFile& pf,
                                 const AnalysisCertificate& cert, json solver_info,
                                 double solve_ms, const CommonOptions& opts) {
  Stopwatch check_timer;
  const CertificateReport crep = check_certificate(pf.model, pf.structure, cert);
  json checks;
  checks["certificate"] = certificate_report_json(crep);
  bool all_ok = crep.pass;
  if (crep.pass) {
    const ProofChainReport chain = replay_proof_chain(pf.model, pf.structure, cert);
    checks["proof_chain"] = proof_chain_json(chain);
    const SpotcheckReport spot =
        sprocedure_spotcheck(pf.model, pf.structure, cert, 2000, pf.options.seed);
    checks["sprocedure_spotcheck"] = spotcheck_json(spot);
    all_ok = chain.pass && spot.pass;
  }

  CmdResult res;
  res.report = base_report(command, problem_path, bytes);
  res.report["feasible"] = true;
  res.report["solver"] = std::move(solver_info);
  res.report["certificate"] = certificate_to_json(cert);
  res.report["checks"] = std::move(checks);
  if (command == "analyze") {
    res.report["ultimate_bound"] = bound_json(ultimate_bound(cert, pf.disturbance_bound));
  } else {
    res.report["quadratically_stable"] = all_ok;
    const UltimateBound b = ultimate_bound(cert, 0.0);
    res.report["lyapunov"] = {{"P", matrix_to_json(b.P)}, {"decay_rate", b.decay_rate}};
  }
  res.report["timings"] = {{"solve_ms", solve_ms}, {"check_ms", check_timer.ms()}};
  res.exit_code = all_ok ? kExitOk : kExitError;
  if (!all_ok) res.report["error"] = "solver returned a certificate that failed verification";
  if (!opts.out_dir.empty()) {
    write_out_file(opts.out_dir, "certificate.json", certificate_to_json(cert).dump(2) + "\n");
    maybe_write_report(opts.out_dir, res.report);
  }
  return res;
}

}  // namespace detail

// -------------------------------------------------------------------------
// analyze: ultimate-boundedness path (lambda search + solve + verify + bound)
// -------------------------------------------------------------------------
inline CmdResult cmd_analyze(const std::string& problem_path, const CommonOptions& opts = {}) {
  const std::string bytes = read_file(problem_path);
  ProblemFile pf = parse_problem(parse_json_text(bytes, problem_path));
  pf.options = detail::merge_options(pf.options, opts);

  const ValidationReport vrep = validate_model(pf.model, pf.structure);
  if (!vrep.pass) {
    CmdResult res;
    res.report = detail::base_report("analyze", problem_path, bytes);
    res.report["error"] = "model validation failed";
    res.report["checks"] = detail::check_items_json(vrep.checks);
    res.exit_code = kExitError;
    detail::maybe_write_report(opts.out_dir, res.report);
    return res;
  }

  SolverOptions sopt;
  sopt.objective = objective_from_string(pf.options.objective);
  sopt.eps_margin = pf.options.eps_margin;
  BuildOptions bopt;
  bopt.r_mode = sopt.objective == Objective::MaxTraceR ? RMode::Variable : RMode::Fixed;
  LambdaGrid grid{pf.options.lambda_min, pf.options.lambda_max, pf.options.lambda_points,
                  pf.options.refine_iters};

  detail::Stopwatch solve_timer;
  const LambdaSearchResult search = lambda_search(pf.model, pf.structure, sopt, grid, bopt);
  const double solve_ms = solve_timer.ms();

  json solver_info;
  solver_info["objective"] = pf.options.objective;
  solver_info["solver_calls"] = search.solver_calls;
  json grid_json = json::array();
  for (const auto& e : search.grid) grid_json.push_back(detail::lambda_eval_json(e));
  solver_info["lambda_grid"] = std::move(grid_json);
  json refine_json = json::array();
  for (const auto& e : search.refinement) refine_json.push_back(detail::lambda_eval_json(e));
  solver_info["lambda_refinement"] = std::move(refine_json);

  if (!search.any_feasible) {
    CmdResult res;
    res.report = detail::base_report("analyze", problem_path, bytes);
    res.report["feasible"] = false;
    res.report["message"] = "infeasible at all lambda grid points";
    res.report["solver"] = std::move(solver_info);
    res.report["timings"] = {{"solve_ms", solve_ms}};
    res.exit_code = kExitNegative;
    detail::maybe_write_report(opts.out_dir, res.report);
    return res;
  }

  solver_info["best_lambda"] = search.best_lambda;
  solver_info["margin"] = search.best_outcome.solution->margin;
  const AnalysisCertificate cert = certificate_from_solution(*search.best_outcome.solution);
  return detail::finish_feasible("analyze", problem_path, bytes, pf, cert,
                                 std::move(solver_info), solve_ms, opts);
}

// -------------------------------------------------------------------------
// stability: quadratic-stability path (no lambda row, w = 0)
// -------------------------------------------------------------------------
inline CmdResult cmd_stability(const std::string& problem_path,
                               const CommonOptions& opts = {}) {
  const std::string bytes = read_file(problem_path);
  ProblemFile pf = parse_problem(parse_json_text(bytes, problem_path));
  pf.options = detail::merge_options(pf.options, opts);

  const ValidationReport vrep = validate_model(pf.model, pf.structure);
  if (!vrep.pass) {
    CmdResult res;
    res.report = detail::base_report("stability", problem_path, bytes);
    res.report["error"] = "model validation failed";
    res.report["checks"] = detail::check_items_json(vrep.checks);
    res.exit_code = kExitError;
    detail::maybe_write_report(opts.out_dir, res.report);
    return res;
  }

  SolverOptions sopt;
  sopt.objective = objective_from_string(pf.options.objective);
  sopt.eps_margin = pf.options.eps_margin;
  BuildOptions bopt;
  bopt.r_mode = sopt.objective == Objective::MaxTraceR ? RMode::Variable : RMode::Fixed;

  detail::Stopwatch solve_timer;
  const AffineLmiProblem prob = build_affine_problem(pf.model, pf.structure, std::nullopt, bopt);
  const SolveOutcome outcome = solve(prob, sopt);
  const double solve_ms = solve_timer.ms();

  json solver_info;
  solver_info["objective"] = pf.options.objective;
  solver_info["status"] = to_string(outcome.status);
  solver_info["margin"] = outcome.best_margin;
  solver_info["required_margin"] = outcome.required_margin;
  solver_info["message"] = outcome.message;

  if (outcome.status != SolveStatus::Feasible) {
    CmdResult res;
    res.report = detail::base_report("stability", problem_path, bytes);
    res.report["feasible"] = false;
    res.report["quadratically_stable"] = false;
    res.report["solver"] = std::move(solver_info);
    res.report["timings"] = {{"solve_ms", solve_ms}};
    res.exit_code =
        outcome.status == SolveStatus::Infeasible ? kExitNegative : kExitError;
    detail::maybe_write_report(opts.out_dir, res.report);
    return res;
  }

  const AnalysisCertificate cert = certificate_from_solution(*outcome.solution);
  return detail::finish_feasible("stability", problem_path, bytes, pf, cert,
                                 std::move(solver_info), solve_ms, opts);
}

// -------------------------------------------------------------------------
// certify: re-verify an existing certificate (no solving)
// -------------------------------------------------------------------------
inline CmdResult cmd_certify(const std::string& problem_path, const std::string& cert_path,
                             const CommonOptions& opts = {}) {
  const std::string bytes = read_file(problem_path);
  const ProblemFile pf = parse_problem(parse_json_text(bytes, problem_path));
  const AnalysisCertificate cert = load_certificate(cert_path);

  CmdResult res;
  res.report = detail::base_report("certify", problem_path, bytes);
  res.report["certificate_input"] = {{"path", cert_path},
                                     {"digest", fnv1a_digest(read_file(cert_path))}};

  detail::Stopwatch timer;
  const CertificateReport crep = check_certificate(pf.model, pf.structure, cert);
  json checks;
  checks["certificate"] = detail::certificate_report_json(crep);
  bool all_ok = crep.pass;
  if (!crep.dims_ok) {
    res.report["checks"] = std::move(checks);
    res.report["error"] = "certificate dimensions do not match the problem";
    res.report["timings"] = {{"check_ms", timer.ms()}};
    res.exit_code = kExitError;
    detail::maybe_write_report(opts.out_dir, res.report);
    return res;
  }
  if (crep.pass) {
    const ProofChainReport chain = replay_proof_chain(pf.model, pf.structure, cert);
    checks["proof_chain"] = detail::proof_chain_json(chain);
    const SpotcheckReport spot =
        sprocedure_spotcheck(pf.model, pf.structure, cert, 2000, pf.options.seed);
    checks["sprocedure_spotcheck"] = detail::spotcheck_json(spot);
    all_ok = chain.pass && spot.pass;
  }
  res.report["checks"] = std::move(checks);
  res.report["pass"] = all_ok;
  if (cert.lambda)
    res.report["ultimate_bound"] = detail::bound_json(ultimate_bound(cert, pf.disturbance_bound));
  res.report["timings"] = {{"check_ms", timer.ms()}};
  res.exit_code = all_ok ? kExitOk : kExitNegative;
  detail::maybe_write_report(opts.out_dir, res.report);
  return res;
}

// -------------------------------------------------------------------------
// simulate: empirical validation of a certificate by Monte-Carlo integration
// -------------------------------------------------------------------------
inline CmdResult cmd_simulate(const std::string& problem_path, const std::string& cert_path,
                              const CommonOptions& opts = {}) {
  const std::string bytes = read_file(problem_path);
  ProblemFile pf = parse_problem(parse_json_text(bytes, problem_path));
  pf.options = detail::merge_options(pf.options, opts);
  const AnalysisCertificate cert = load_certificate(cert_path);

  CmdResult res;
  res.report = detail::base_report("simulate", problem_path, bytes);
  res.report["certificate_input"] = {{"path", cert_path},
                                     {"digest", fnv1a_digest(read_file(cert_path))}};

  const CertificateReport crep = check_certificate(pf.model, pf.structure, cert);
  if (!crep.pass) {
    res.report["checks"] = {{"certificate", detail::certificate_report_json(crep)}};
    res.report["error"] = "certificate failed verification; not simulating";
    res.exit_code = crep.dims_ok ? kExitNegative : kExitError;
    detail::maybe_write_report(opts.out_dir, res.report);
    return res;
  }

  // stability certificates are validated under w = 0
  const double w_bound = cert.lambda ? pf.disturbance_bound : 0.0;

  MonteCarloConfig cfg;
  cfg.n_runs = pf.options.runs;
  cfg.w_bound = w_bound;
  cfg.seed = pf.options.seed;
  cfg.dt = pf.options.dt;
  cfg.t_final = pf.options.t_final;
  cfg.limsup_tol = pf.options.tol;
  cfg.keep_trajectories = opts.out_dir.empty() ? 0 : std::min(pf.options.runs, 5);
  detail::default_scenarios(pf, cert, w_bound, &cfg);

  detail::Stopwatch timer;
  const MonteCarloReport mc = monte_carlo(pf.model, cert, cfg);
  res.report["monte_carlo"] = detail::monte_carlo_json(mc);
  res.report["timings"] = {{"simulate_ms", timer.ms()}};
  res.exit_code = mc.all_pass ? kExitOk : kExitNegative;
  if (!opts.out_dir.empty()) {
    for (std::size_t i = 0; i < mc.trajectories.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "traj_%03zu.csv", i);
      std::ostringstream ss;
      write_trajectory_csv(mc.trajectories[i], ss);
      detail::write_out_file(opts.out_dir, name, ss.str());
    }
    detail::maybe_write_report(opts.out_dir, res.report);
  }
  return res;
}

// -------------------------------------------------------------------------
// sweep: feasibility boundary of the class parameter via bisection
// -------------------------------------------------------------------------
struct SweepOptions {
  std::string parameter = "gain";  // "gain" (norm_bounded) or "k" (sector_scalar)
  double min = 0.05;
  double max = 4.0;
  double bisection_tol = 0.01;
  std::string mode = "stability";  // "stability" (no disturbance row) or "ultimate"
};

inline CmdResult cmd_sweep(const std::string& problem_path, const SweepOptions& sweep,
                           const CommonOptions& opts = {}) {
  const std::string bytes = read_file(problem_path);
  ProblemFile pf = parse_problem(parse_json_text(bytes, problem_path));
  pf.options = detail::merge_options(pf.options, opts);

  if (!(sweep.min > 0.0) || !(sweep.max > sweep.min))
    throw Error("sweep: need 0 < min < max");
  if (sweep.mode != "stability" && sweep.mode != "ultimate")
    throw Error("sweep: mode must be stability or ultimate");
  const bool sector = pf.uncertainty_type == "sector_scalar";
  if (pf.uncertainty_type != "norm_bounded" && !sector)
    throw Error("sweep: requires a built-in uncertainty class (norm_bounded or sector_scalar)");
  if (sweep.parameter != "gain" && sweep.parameter != "k")
    throw Error("sweep: unknown parameter \"" + sweep.parameter + "\"");

  SolverOptions sopt;
  sopt.objective = Objective::PureFeasibility;
  sopt.eps_margin = pf.options.eps_margin;
  LambdaGrid grid{pf.options.lambda_min, pf.options.lambda_max, pf.options.lambda_points,
                  pf.options.refine_iters};

  struct Eval {
    double value;
    bool feasible;
    double lambda_best;
    double trace_q;
  };
  std::vector<Eval> evals;
  const auto evaluate = [&](double v) -> bool {
    const MultiplierStructure st =
        sector ? sector_scalar(v) : norm_bounded(v, pf.model.nq(), pf.model.np());
    Eval e{v, false, std::numeric_limits<double>::quiet_NaN(),
           std::numeric_limits<double>::quiet_NaN()};
    if (sweep.mode == "stability") {
      const SolveOutcome o = solve(build_affine_problem(pf.model, st, std::nullopt), sopt);
      e.feasible = o.status == SolveStatus::Feasible;
      if (e.feasible) e.trace_q = o.solution->Q.trace();
    } else {
      LambdaGrid coarse = grid;
      coarse.refine_iters = 0;  // boundary location only needs grid feasibility
      const LambdaSearchResult r = lambda_search(pf.model, st, sopt, coarse);
      e.feasible = r.any_feasible;
      if (e.feasible) {
        e.lambda_best = r.best_lambda;
        e.trace_q = r.best_outcome.solution->Q.trace();
      }
    }
    evals.push_back(e);
    return e.feasible;
  };

  detail::Stopwatch timer;
  CmdResult res;
  res.report = detail::base_report("sweep", problem_path, bytes);
  res.report["parameter"] = sweep.parameter;
  res.report["mode"] = sweep.mode;

  const bool lo_feasible = evaluate(sweep.min);
  json boundary;
  if (!lo_feasible) {
    boundary["feasible_interval_empty"] = true;
    boundary["message"] = "already infeasible at the sweep minimum";
  } else if (evaluate(sweep.max)) {
    boundary["feasible_interval_empty"] = false;
    boundary["boundary"] = sweep.max;
    boundary["boundary_uncertainty"] = 0.0;
    boundary["message"] = "feasible on the whole sweep range; boundary beyond max";
  } else {
    double lo = sweep.min, hi = sweep.max;
    while (hi - lo > sweep.bisection_tol) {
      const double mid = 0.5 * (lo + hi);
      if (evaluate(mid))
        lo = mid;
      else
        hi = mid;
    }
    boundary["feasible_interval_empty"] = false;
    boundary["boundary"] = 0.5 * (lo + hi);
    boundary["boundary_uncertainty"] = 0.5 * (hi - lo);
  }

  std::sort(evals.begin(), evals.end(),
            [](const Eval& a, const Eval& b) { return a.value < b.value; });
  std::ostringstream csv;
  csv << "gain,feasible,lambda_best,trace_Q\n";
  char buf[40];
  for (const auto& e : evals) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.value);
    csv << buf << "," << (e.feasible ? 1 : 0) << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.lambda_best);
    csv << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.trace_q);
    csv << buf << "\n";
  }

  json evs = json::array();
  for (const auto& e : evals)
    evs.push_back({{"value", e.value},
                   {"feasible", e.feasible},
                   {"lambda_best", e.lambda_best},
                   {"trace_Q", e.trace_q}});
  res.report["evaluations"] = std::move(evs);
  res.report["boundary"] = std::move(boundary);
  res.report["timings"] = {{"sweep_ms", timer.ms()}};
  res.exit_code = kExitOk;
  if (!opts.out_dir.empty()) {
    detail::write_out_file(opts.out_dir, "sweep.csv", csv.str());
    detail::maybe_write_report(opts.out_dir, res.report);
  }
  return res;
}

}  // namespace driver
}  // namespace conebound
