#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conebound/lmi.hpp"

namespace conebound {

enum class Objective { PureFeasibility, MinTraceQ, MaxTraceR };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::PureFeasibility: return "pure_feasibility";
    case Objective::MinTraceQ: return "min_trace_Q";
    case Objective::MaxTraceR: return "max_trace_R";
  }
  return "?";
}

struct SolverOptions {
  double eps_margin = -1.0;  // strict-feasibility shift; <0: auto = 1e-8 * problem scale
  int max_iters = 800;       // Newton-step cap per phase
  double duality_gap_tol = 1e-8;
  Objective objective = Objective::PureFeasibility;
  // The reference backend is deterministic and draws no randomness; the seed
  // is part of the backend contract for pluggable solvers.
  std::uint64_t deterministic_seed = 0;
  // Run the feasibility-margin maximization to optimality instead of stopping
  // at the first point with sufficient margin (used when margins are compared
  // across problems, e.g. by lambda_search).
  bool maximize_margin = false;
};

struct SolutionPoint {
  Matrix Q, X, Y, R;
  std::optional<double> lambda;
  Vector y;
  double margin = 0.0;  // min over stated constraints of lambda_min
  std::vector<std::pair<std::string, double>> block_margins;
  double objective_value = 0.0;
};

enum class SolveStatus { Feasible, Infeasible, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct SolveOutcome {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::optional<SolutionPoint> solution;
  std::string message;
  double best_margin = -std::numeric_limits<double>::infinity();
  double required_margin = 0.0;
  int newton_iterations = 0;
};

namespace detail {

inline bool strictly_feasible(const std::vector<ConstraintBlock>& blocks, const Vector& y) {
  for (const auto& b : blocks) {
    Eigen::LLT<Matrix> llt(b.eval(y));
    if (llt.info() != Eigen::Success) return false;
  }
  return true;
}

inline double log_barrier(const std::vector<ConstraintBlock>& blocks, const Vector& y) {
  double phi = 0.0;
  for (const auto& b : blocks) {
    Eigen::LLT<Matrix> llt(b.eval(y));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Matrix& l = llt.matrixLLT();
    for (int i = 0; i < l.rows(); ++i) {
      if (!(l(i, i) > 0.0)) return std::numeric_limits<double>::infinity();
      phi -= 2.0 * std::log(l(i, i));
    }
  }
  return phi;
}

struct BarrierResult {
  Vector y;
  bool converged = false;
  int newton_iters = 0;
  bool stopped_early = false;
  std::string message;
};

// Path-following interior-point minimization of c'y over the intersection of
// the blocks' PSD cones, via the log-det barrier with a geometric schedule on
// the path parameter and damped Newton centering.
inline BarrierResult minimize_barrier(const std::vector<ConstraintBlock>& blocks, int nv,
                                      const Vector& c, const Vector& y_start,
                                      double gap_target, int newton_cap,
                                      const std::function<bool(const Vector&)>& stop_early) {
  BarrierResult res;
  res.y = y_start;
  if (!strictly_feasible(blocks, res.y)) {
    res.message = "barrier start point is not strictly feasible";
    return res;
  }

  double m_total = 0.0;
  for (const auto& b : blocks) m_total += b.dim();

  double t = 1.0;
  const double mu = 10.0;
  Vector grad(nv), step(nv);
  Matrix hess(nv, nv);

  while (true) {
    // center at the current t
    for (int inner = 0;; ++inner) {
      if (res.newton_iters >= newton_cap) {
        res.message = "Newton iteration cap reached";
        return res;
      }
      grad = t * c;
      hess.setZero();
      double phi = 0.0;
      bool ok = true;
      for (const auto& b : blocks) {
        Eigen::LLT<Matrix> llt(b.eval(res.y));
        if (llt.info() != Eigen::Success) {
          ok = false;
          break;
        }
        const Matrix l = llt.matrixL();
        for (int i = 0; i < l.rows(); ++i) phi -= 2.0 * std::log(l(i, i));
        const auto lt = l.triangularView<Eigen::Lower>();
        std::vector<Matrix> u(b.var_idx.size());
        for (std::size_t k = 0; k < b.var_idx.size(); ++k) {
          Matrix tmp = lt.solve(b.coeff[k]);                 // L^-1 A
          u[k] = lt.solve(tmp.transpose()).transpose();      // L^-1 A L^-T
          grad(b.var_idx[k]) -= u[k].trace();
        }
        for (std::size_t k = 0; k < b.var_idx.size(); ++k)
          for (std::size_t l2 = 0; l2 <= k; ++l2) {
            const double h = u[k].cwiseProduct(u[l2]).sum();
            hess(b.var_idx[k], b.var_idx[l2]) += h;
            if (k != l2) hess(b.var_idx[l2], b.var_idx[k]) += h;
          }
      }
      if (!ok) {
        res.message = "iterate left the feasible cone";
        return res;
      }
      const double f0 = t * c.dot(res.y) + phi;

      // Newton direction with escalating ridge
      double ridge = 0.0;
      bool solved = false;
      for (int attempt = 0; attempt < 8 && !solved; ++attempt) {
        Matrix hr = hess;
        if (ridge > 0.0) hr.diagonal().array() += ridge;
        Eigen::LDLT<Matrix> ldlt(hr);
        if (ldlt.info() == Eigen::Success) {
          step = -ldlt.solve(grad);
          if (step.allFinite() && grad.dot(step) <= 0.0) solved = true;
        }
        if (!solved)
          ridge = (ridge == 0.0) ? 1e-12 * (1.0 + hess.diagonal().maxCoeff()) : ridge * 100.0;
      }
      if (!solved) {
        res.message = "Newton system could not be solved";
        return res;
      }

      const double decrement2 = -grad.dot(step);
      if (decrement2 / 2.0 <= 1e-13 * std::max(1.0, std::abs(f0))) break;  // centered

      double alpha = 1.0;
      int bt = 0;
      while (bt < 90 && !strictly_feasible(blocks, res.y + alpha * step)) {
        alpha *= 0.5;
        ++bt;
      }
      if (bt >= 90) {
        res.message = "line search could not stay in the cone";
        return res;
      }
      const double slope = grad.dot(step);
      while (bt < 120) {
        const double f1 = t * c.dot(res.y + alpha * step) +
                          log_barrier(blocks, res.y + alpha * step);
        if (f1 <= f0 + 0.25 * alpha * slope) break;
        alpha *= 0.5;
        ++bt;
      }
      res.y += alpha * step;
      ++res.newton_iters;
      if (alpha < 1e-18) break;  // stalled; accept current center
    }

    if (stop_early && stop_early(res.y)) {
      res.converged = true;
      res.stopped_early = true;
      return res;
    }
    if (m_total / t <= gap_target) break;
    t *= mu;
  }
  res.converged = true;
  return res;
}

inline ConstraintBlock scalar_block(const std::string& name, double c0, int var, double coeff) {
  ConstraintBlock b;
  b.name = name;
  b.margin = false;
  b.c0 = Matrix::Constant(1, 1, c0);
  b.var_idx = {var};
  b.coeff = {Matrix::Constant(1, 1, coeff)};
  return b;
}

inline std::vector<int> svec_diag_indices(int n) {
  std::vector<int> idx(n);
  int at = 0;
  for (int j = 0; j < n; ++j) {
    idx[j] = at;
    at += n - j;
  }
  return idx;
}

}  // namespace detail

/// Feasibility / optimization over the affine problem. Phase 1 maximizes the
/// uniform strictness margin s over all stated constraints; phase 2 (when an
/// objective is requested) optimizes it subject to the margin floor. The
/// returned point is always re-verified by direct eigenvalue computation; an
/// infeasible point is never reported as Feasible.
inline SolveOutcome solve(const AffineLmiProblem& prob, const SolverOptions& options = {}) {
  SolveOutcome out;
  const int n0 = prob.layout.total;
  const double eps_req =
      options.eps_margin >= 0.0 ? options.eps_margin : 1e-8 * prob.scale;
  out.required_margin = eps_req;

  if (options.objective == Objective::MaxTraceR && !prob.layout.r_variable)
    throw Error("solve: max_trace_R requires a problem built with R variable");

  const auto margin_of = [&](const Vector& y) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : prob.blocks)
      if (b.margin) m = std::min(m, min_eig_sym(b.eval(y)));
    return m;
  };

  // ---- phase 1: maximize the uniform margin s over z = [y; s]
  std::vector<ConstraintBlock> p1;
  for (const auto& b : prob.blocks) {
    ConstraintBlock nb = b;
    if (nb.margin) {
      nb.var_idx.push_back(n0);
      nb.coeff.push_back(-Matrix::Identity(b.dim(), b.dim()));
    }
    nb.margin = false;
    p1.push_back(std::move(nb));
  }
  const double box = prob.box_bound;
  for (int i = 0; i < n0; ++i) {
    p1.push_back(detail::scalar_block("box_hi", box, i, -1.0));
    p1.push_back(detail::scalar_block("box_lo", box, i, +1.0));
  }
  const double s_cap = std::max({1.0, prob.scale, 10.0 * eps_req});
  p1.push_back(detail::scalar_block("margin_cap", s_cap, n0, -1.0));

  Vector z0(n0 + 1);
  z0.head(n0) = prob.y0;
  const double m0 = margin_of(prob.y0);
  z0(n0) = m0 - 0.1 * (1.0 + std::abs(m0));

  Vector c1 = Vector::Zero(n0 + 1);
  c1(n0) = -1.0;

  const double gap1 = std::min(options.duality_gap_tol, 0.25 * std::max(eps_req, 1e-12));
  std::function<bool(const Vector&)> early;
  if (!options.maximize_margin)
    early = [&](const Vector& z) { return margin_of(z.head(n0)) >= 1.25 * eps_req; };

  detail::BarrierResult r1 =
      detail::minimize_barrier(p1, n0 + 1, c1, z0, gap1, options.max_iters, early);
  out.newton_iterations += r1.newton_iters;

  Vector y_best = r1.y.head(n0);
  const double margin1 = margin_of(y_best);
  out.best_margin = margin1;

  const double accept = eps_req - std::min(options.duality_gap_tol, 0.5 * eps_req);
  if (margin1 < accept) {
    if (!r1.converged) {
      out.status = SolveStatus::NumericalFailure;
      out.message = "phase 1 did not converge: " + r1.message;
      return out;
    }
    out.status = SolveStatus::Infeasible;
    out.message = "maximum feasibility margin " + std::to_string(margin1) +
                  " is below the required margin " + std::to_string(eps_req) +
                  " (variables bounded by " + std::to_string(box) + ")";
    return out;
  }

  std::string note = r1.stopped_early ? "phase 1 stopped at sufficient margin" : "phase 1 converged";

  // ---- phase 2: optimize the requested objective at fixed margin floor
  if (options.objective != Objective::PureFeasibility && margin1 > eps_req) {
    Vector c2 = Vector::Zero(n0);
    if (options.objective == Objective::MinTraceQ) {
      for (int k : detail::svec_diag_indices(prob.layout.n)) c2(prob.layout.q_off + k) = 1.0;
    } else {
      for (int k : detail::svec_diag_indices(prob.layout.n)) c2(prob.layout.r_off + k) = -1.0;
    }
    std::vector<ConstraintBlock> p2;
    for (const auto& b : prob.blocks) {
      ConstraintBlock nb = b;
      if (nb.margin) nb.c0 -= eps_req * Matrix::Identity(b.dim(), b.dim());
      nb.margin = false;
      p2.push_back(std::move(nb));
    }
    for (int i = 0; i < n0; ++i) {
      p2.push_back(detail::scalar_block("box_hi", box, i, -1.0));
      p2.push_back(detail::scalar_block("box_lo", box, i, +1.0));
    }
    const double gap2 = options.duality_gap_tol * std::max(1.0, std::abs(c2.dot(y_best)));
    detail::BarrierResult r2 = detail::minimize_barrier(p2, n0, c2, y_best, gap2,
                                                        options.max_iters, nullptr);
    out.newton_iterations += r2.newton_iters;
    if (r2.converged) {
      const double margin2 = margin_of(r2.y);
      if (margin2 >= accept) {
        y_best = r2.y;
        note += "; phase 2 converged";
      } else {
        note += "; phase 2 result rejected by margin re-check, keeping phase 1 point";
      }
    } else {
      note += "; phase 2 failed (" + r2.message + "), keeping phase 1 point";
    }
  }

  SolutionPoint sol;
  sol.y = y_best;
  const EvalPoint p = prob.materialize(y_best);
  sol.Q = symmetrize(p.Q);
  sol.X = symmetrize(p.X);
  sol.Y = symmetrize(p.Y);
  sol.R = symmetrize(p.R);
  sol.lambda = prob.lambda;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& b : prob.blocks) {
    if (!b.margin) continue;
    const double me = min_eig_sym(b.eval(y_best));
    sol.block_margins.emplace_back(b.name, me);
    worst = std::min(worst, me);
  }
  sol.margin = worst;
  switch (options.objective) {
    case Objective::PureFeasibility: sol.objective_value = worst; break;
    case Objective::MinTraceQ: sol.objective_value = sol.Q.trace(); break;
    case Objective::MaxTraceR: sol.objective_value = sol.R.trace(); break;
  }
  out.best_margin = worst;
  if (worst < accept) {  // paranoia: eigenvalue re-check is authoritative
    out.status = SolveStatus::Infeasible;
    out.message = note + "; final margin re-check failed";
    return out;
  }
  out.status = SolveStatus::Feasible;
  out.solution = std::move(sol);
  out.message = note;
  return out;
}

// ---------------------------------------------------------------------------
// One-dimensional search over lambda
// ---------------------------------------------------------------------------

struct LambdaGrid {
  double min = 1e-3;
  double max = 1e3;
  int points = 16;
  int refine_iters = 20;
};

struct LambdaEval {
  double lambda = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  double margin = 0.0;
  double objective_value = 0.0;
  double trace_q = 0.0;
};

struct LambdaSearchResult {
  bool any_feasible = false;
  double best_lambda = 0.0;
  SolveOutcome best_outcome;
  std::vector<LambdaEval> grid;
  std::vector<LambdaEval> refinement;
  int solver_calls = 0;
};

/// Log-grid sweep over lambda followed by golden-section refinement around
/// the best feasible point. The score is the solver objective (margin for
/// pure feasibility, -trace Q / +trace R otherwise).
inline LambdaSearchResult lambda_search(const SystemModel& model, const MultiplierStructure& s,
                                        const SolverOptions& options, const LambdaGrid& grid,
                                        const BuildOptions& bopt = {}) {
  if (grid.points < 1) throw Error("lambda_search: empty grid");
  if (!(grid.min > 0.0)) throw Error("lambda_search: lambda grid min must be > 0");
  if (!(grid.max >= grid.min)) throw Error("lambda_search: grid max must be >= min");

  SolverOptions sopt = options;
  if (sopt.objective == Objective::PureFeasibility) sopt.maximize_margin = true;

  LambdaSearchResult res;
  double best_score = -std::numeric_limits<double>::infinity();

  const auto score_of = [&](const SolveOutcome& o) {
    if (o.status != SolveStatus::Feasible) return -std::numeric_limits<double>::infinity();
    switch (sopt.objective) {
      case Objective::PureFeasibility: return o.solution->margin;
      case Objective::MinTraceQ: return -o.solution->objective_value;
      case Objective::MaxTraceR: return o.solution->objective_value;
    }
    return 0.0;
  };

  const auto evaluate = [&](double lambda) {
    ++res.solver_calls;
    LambdaEval ev;
    ev.lambda = lambda;
    SolveOutcome o;
    try {
      const AffineLmiProblem prob = build_affine_problem(model, s, lambda, bopt);
      o = solve(prob, sopt);
    } catch (const Error& e) {
      o.status = SolveStatus::NumericalFailure;
      o.message = e.what();
    }
    ev.status = o.status;
    ev.margin = o.best_margin;
    if (o.status == SolveStatus::Feasible) {
      ev.objective_value = o.solution->objective_value;
      ev.trace_q = o.solution->Q.trace();
      res.any_feasible = true;
      const double sc = score_of(o);
      if (sc > best_score) {
        best_score = sc;
        res.best_lambda = lambda;
        res.best_outcome = o;
      }
    }
    return ev;
  };

  std::vector<double> lams(grid.points);
  for (int i = 0; i < grid.points; ++i)
    lams[i] = (grid.points == 1)
                  ? grid.min
                  : grid.min * std::pow(grid.max / grid.min,
                                        static_cast<double>(i) / (grid.points - 1));
  int best_i = -1;
  double best_grid_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.points; ++i) {
    res.grid.push_back(evaluate(lams[i]));
    if (res.grid.back().status == SolveStatus::Feasible) {
      const double sc = (sopt.objective == Objective::PureFeasibility)
                            ? res.grid.back().margin
                            : (sopt.objective == Objective::MinTraceQ
                                   ? -res.grid.back().objective_value
                                   : res.grid.back().objective_value);
      if (sc > best_grid_score) {
        best_grid_score = sc;
        best_i = i;
      }
    }
  }
  if (!res.any_feasible || grid.refine_iters <= 0 || grid.points < 2) return res;

  // golden-section on log(lambda) in the bracket around the best grid point
  const double lo = std::log(lams[std::max(0, best_i - 1)]);
  const double hi = std::log(lams[std::min(grid.points - 1, best_i + 1)]);
  if (hi <= lo) return res;
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  LambdaEval e1 = evaluate(std::exp(x1));
  LambdaEval e2 = evaluate(std::exp(x2));
  res.refinement.push_back(e1);
  res.refinement.push_back(e2);
  const auto ev_score = [&](const LambdaEval& e) {
    if (e.status != SolveStatus::Feasible) return -std::numeric_limits<double>::infinity();
    switch (sopt.objective) {
      case Objective::PureFeasibility: return e.margin;
      case Objective::MinTraceQ: return -e.objective_value;
      case Objective::MaxTraceR: return e.objective_value;
    }
    return 0.0;
  };
  for (int it = 2; it < grid.refine_iters; ++it) {
    if (ev_score(e1) < ev_score(e2)) {
      a = x1;
      x1 = x2;
      e1 = e2;
      x2 = a + phi * (b - a);
      e2 = evaluate(std::exp(x2));
      res.refinement.push_back(e2);
    } else {
      b = x2;
      x2 = x1;
      e2 = e1;
      x1 = b - phi * (b - a);
      e1 = evaluate(std::exp(x1));
      res.refinement.push_back(e1);
    }
  }
  return res;
}

}  // namespace conebound
