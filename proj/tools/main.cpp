#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "conebound/driver.hpp"

namespace {

struct Flags {
  std::string problem;
  std::string certificate;
  conebound::driver::CommonOptions common;
  conebound::driver::SweepOptions sweep;
};

void add_common(CLI::App* cmd, Flags* f) {
  cmd->add_option("--out-dir", f->common.out_dir, "directory for report/certificate/CSV files");
  cmd->add_option("--lambda-min", f->common.lambda_min, "lambda grid lower end");
  cmd->add_option("--lambda-max", f->common.lambda_max, "lambda grid upper end");
  cmd->add_option("--lambda-points", f->common.lambda_points, "lambda grid size");
  cmd->add_option("--refine-iters", f->common.refine_iters, "golden-section refinements");
  cmd->add_option("--objective", f->common.objective,
                  "pure_feasibility | min_trace_q | max_trace_r");
  cmd->add_option("--eps-margin", f->common.eps_margin, "strict-feasibility margin");
  cmd->add_option("--dt", f->common.dt, "integration step");
  cmd->add_option("--t-final", f->common.t_final, "integration horizon");
  cmd->add_option("--runs", f->common.runs, "Monte-Carlo run count");
  cmd->add_option("--seed", f->common.seed, "random seed");
  cmd->add_option("--tol", f->common.tol, "tail-bound tolerance");
}

int run(int argc, char** argv) {
  CLI::App app{"certification of ultimate boundedness and quadratic stability for systems "
               "with conic uncertainty"};
  app.require_subcommand(1);
  Flags f;

  auto* validate = app.add_subcommand("validate", "check problem data invariants");
  validate->add_option("problem", f.problem, "problem JSON file")->required();
  add_common(validate, &f);

  auto* analyze = app.add_subcommand("analyze", "ultimate-boundedness certification");
  analyze->add_option("problem", f.problem, "problem JSON file")->required();
  add_common(analyze, &f);

  auto* stability = app.add_subcommand("stability", "quadratic-stability certification");
  stability->add_option("problem", f.problem, "problem JSON file")->required();
  add_common(stability, &f);

  auto* certify = app.add_subcommand("certify", "re-verify a stored certificate");
  certify->add_option("problem", f.problem, "problem JSON file")->required();
  certify->add_option("certificate", f.certificate, "certificate JSON file")->required();
  add_common(certify, &f);

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo validation of a certificate");
  simulate->add_option("problem", f.problem, "problem JSON file")->required();
  simulate->add_option("certificate", f.certificate, "certificate JSON file")->required();
  add_common(simulate, &f);

  auto* sweep = app.add_subcommand("sweep", "feasibility boundary of the class parameter");
  sweep->add_option("problem", f.problem, "problem JSON file")->required();
  sweep->add_option("--param", f.sweep.parameter, "gain | k");
  sweep->add_option("--min", f.sweep.min, "sweep lower end");
  sweep->add_option("--max", f.sweep.max, "sweep upper end");
  sweep->add_option("--btol", f.sweep.bisection_tol, "bisection tolerance");
  sweep->add_option("--mode", f.sweep.mode, "stability | ultimate");
  add_common(sweep, &f);

  CLI11_PARSE(app, argc, argv);

  conebound::driver::CmdResult res;
  if (validate->parsed())
    res = conebound::driver::cmd_validate(f.problem, f.common);
  else if (analyze->parsed())
    res = conebound::driver::cmd_analyze(f.problem, f.common);
  else if (stability->parsed())
    res = conebound::driver::cmd_stability(f.problem, f.common);
  else if (certify->parsed())
    res = conebound::driver::cmd_certify(f.problem, f.certificate, f.common);
  else if (simulate->parsed())
    res = conebound::driver::cmd_simulate(f.problem, f.certificate, f.common);
  else if (sweep->parsed())
    res = conebound::driver::cmd_sweep(f.problem, f.sweep, f.common);

  std::cout << res.report.dump(2) << "\n";
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const conebound::Error& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump(2) << "\n";
    return 1;
  }
}
