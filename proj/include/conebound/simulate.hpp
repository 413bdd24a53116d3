#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "conebound/certificate.hpp"

namespace conebound {

/// Worst-case instantaneous choice within the norm-bounded class: maximizes
/// 2 x' P E p subject to ||p|| <= gain * ||q||, i.e. p aligned with E' P x at
/// full allowed magnitude. Returns zero when there is no ascent direction.
inline Vector adversarial_p(double gain, const Matrix& P, const Matrix& E, const Vector& x,
                            const Vector& q) {
  if (gain < 0.0) throw Error("adversarial_p: gain must be >= 0");
  Vector dir = E.transpose() * (P * x);
  const double dn = dir.norm(), qn = q.norm();
  if (dn < 1e-300 || qn == 0.0) return Vector::Zero(E.cols());
  return (gain * qn / dn) * dir;
}

/// Memoryless admissible uncertainty samplers; every emitted p satisfies the
/// class quadratic inequality by construction.
struct ConicSampler {
  enum class Kind { NormBounded, SectorScalar, Adversarial };
  Kind kind = Kind::NormBounded;
  double gain = 0.0;  // NormBounded / Adversarial
  double k = 0.0;     // SectorScalar
  Matrix P, E;        // Adversarial target data
  std::uint64_t rng_seed = 0;

  static ConicSampler norm_bounded(double gain, std::uint64_t seed = 0) {
    ConicSampler s;
    s.kind = Kind::NormBounded;
    s.gain = gain;
    s.rng_seed = seed;
    return s;
  }
  static ConicSampler sector_scalar(double k, std::uint64_t seed = 0) {
    ConicSampler s;
    s.kind = Kind::SectorScalar;
    s.k = k;
    s.rng_seed = seed;
    return s;
  }
  static ConicSampler adversarial(double gain, Matrix P, Matrix E) {
    ConicSampler s;
    s.kind = Kind::Adversarial;
    s.gain = gain;
    s.P = std::move(P);
    s.E = std::move(E);
    return s;
  }

  const char* kind_name() const {
    switch (kind) {
      case Kind::NormBounded: return "norm_bounded";
      case Kind::SectorScalar: return "sector_scalar";
      case Kind::Adversarial: return "adversarial";
    }
    return "?";
  }

  Vector sample(double /*t*/, const Vector& x, const Vector& q, int np, Rng& rng) const {
    switch (kind) {
      case Kind::NormBounded: {
        const double qn = q.norm();
        if (qn == 0.0) return Vector::Zero(np);
        return (rng.uniform() * gain * qn) * rng.unit_vector(np);
      }
      case Kind::SectorScalar: {
        if (np != 1 || q.size() != 1)
          throw Error("ConicSampler: sector_scalar requires scalar p and q");
        return Vector::Constant(1, rng.uniform() * k * q(0));
      }
      case Kind::Adversarial:
        return adversarial_p(gain, P, E, x, q);
    }
    return Vector::Zero(np);
  }
};

struct DisturbanceSignal {
  enum class Kind { Constant, Sinusoid, PiecewiseConstantRandom };
  Kind kind = Kind::Constant;
  Vector value;              // Constant
  Vector amp, freq, phase;   // Sinusoid: w_i = amp_i sin(2 pi freq_i t + phase_i)
  double bound = 0.0;        // PiecewiseConstantRandom magnitude bound
  double switch_period = 1.0;
  std::uint64_t seed = 0;
  int nw = 1;
  double declared_bound = 0.0;

  static DisturbanceSignal zero(int nw) { return constant(Vector::Zero(nw)); }
  static DisturbanceSignal constant(Vector v) {
    DisturbanceSignal d;
    d.kind = Kind::Constant;
    d.declared_bound = v.norm();
    d.value = std::move(v);
    d.nw = static_cast<int>(d.value.size());
    return d;
  }
  static DisturbanceSignal sinusoid(Vector amp, Vector freq, Vector phase) {
    if (amp.size() != freq.size() || amp.size() != phase.size())
      throw Error("DisturbanceSignal: sinusoid parameter sizes must match");
    DisturbanceSignal d;
    d.kind = Kind::Sinusoid;
    d.declared_bound = amp.norm();  // |sin| <= 1 componentwise
    d.amp = std::move(amp);
    d.freq = std::move(freq);
    d.phase = std::move(phase);
    d.nw = static_cast<int>(d.amp.size());
    return d;
  }
  static DisturbanceSignal piecewise_constant_random(int nw, double bound, double switch_period,
                                                     std::uint64_t seed) {
    if (!(switch_period > 0.0)) throw Error("DisturbanceSignal: switch_period must be > 0");
    DisturbanceSignal d;
    d.kind = Kind::PiecewiseConstantRandom;
    d.nw = nw;
    d.bound = bound;
    d.switch_period = switch_period;
    d.seed = seed;
    d.declared_bound = bound;
    return d;
  }

  // Discontinuous signals fall outside the continuity hypothesis of the
  // invariance lemma; results under them are flagged in reports.
  bool continuous_signal() const { return kind != Kind::PiecewiseConstantRandom; }

  const char* kind_name() const {
    switch (kind) {
      case Kind::Constant: return "constant";
      case Kind::Sinusoid: return "sinusoid";
      case Kind::PiecewiseConstantRandom: return "piecewise_constant_random";
    }
    return "?";
  }

  Vector eval(double t) const {
    switch (kind) {
      case Kind::Constant: return value;
      case Kind::Sinusoid: {
        Vector w(nw);
        for (int i = 0; i < nw; ++i)
          w(i) = amp(i) * std::sin(2.0 * M_PI * freq(i) * t + phase(i));
        return w;
      }
      case Kind::PiecewiseConstantRandom: {
        // random-access per segment so RK4 stage queries at arbitrary times
        // inside a step stay deterministic
        const auto seg = static_cast<std::uint64_t>(std::floor(t / switch_period));
        Rng rng = Rng::derived(seed, seg);
        return (bound * rng.uniform()) * rng.unit_vector(nw);
      }
    }
    return Vector::Zero(nw);
  }
};

struct Trajectory {
  Vector times;
  Matrix states;  // (N+1) x n
  Vector V;       // x' P x at each grid point
  Matrix q_hist, p_hist, w_hist;
  double dt = 0.0;
  bool disturbance_continuous = true;

  int steps() const { return static_cast<int>(times.size()) - 1; }
};

/// Fixed-step classical RK4 integration of xdot = A x + E p + G w with the
/// uncertainty re-sampled at every stage from the stage state. Requires
/// D = 0: feedthrough would make p implicit in q.
inline Trajectory integrate(const SystemModel& model, const ConicSampler& sampler,
                            const DisturbanceSignal& w, const Vector& x0, double dt,
                            double t_final, const Matrix& P) {
  if (!model.D.isZero(0.0))
    throw Error(
        "integrate: D != 0 makes p implicit in q (algebraic loop); simulation supports "
        "strictly causal interconnections only");
  if (!(dt > 0.0)) throw Error("integrate: dt must be > 0");
  if (!(t_final > 0.0)) throw Error("integrate: t_final must be > 0");
  if (x0.size() != model.n()) throw Error("integrate: x0 dimension mismatch");
  if (w.nw != model.nw()) throw Error("integrate: disturbance dimension mismatch");
  if (P.rows() != model.n() || P.cols() != model.n())
    throw Error("integrate: P dimension mismatch");

  const int n = model.n(), np = model.np(), nq = model.nq(), nw = model.nw();
  const long long N = std::max(1LL, std::llround(t_final / dt));

  Trajectory traj;
  traj.dt = dt;
  traj.disturbance_continuous = w.continuous_signal();
  traj.times.resize(N + 1);
  traj.states.resize(N + 1, n);
  traj.V.resize(N + 1);
  traj.q_hist.resize(N + 1, nq);
  traj.p_hist.resize(N + 1, np);
  traj.w_hist.resize(N + 1, nw);

  Rng rng(sampler.rng_seed);
  Vector x = x0;
  const auto rhs = [&](double t, const Vector& xs, Vector* q_out, Vector* p_out,
                       Vector* w_out) -> Vector {
    const Vector q = model.Cq * xs;
    const Vector p = sampler.sample(t, xs, q, np, rng);
    const Vector wv = w.eval(t);
    if (q_out) *q_out = q;
    if (p_out) *p_out = p;
    if (w_out) *w_out = wv;
    return model.A * xs + model.E * p + model.G * wv;
  };

  for (long long k = 0; k < N; ++k) {
    const double t = static_cast<double>(k) * dt;
    traj.times(k) = t;
    traj.states.row(k) = x.transpose();
    traj.V(k) = x.dot(P * x);

    Vector q1, p1, w1;
    const Vector f1 = rhs(t, x, &q1, &p1, &w1);
    traj.q_hist.row(k) = q1.transpose();
    traj.p_hist.row(k) = p1.transpose();
    traj.w_hist.row(k) = w1.transpose();

    const Vector f2 = rhs(t + 0.5 * dt, x + (0.5 * dt) * f1, nullptr, nullptr, nullptr);
    const Vector f3 = rhs(t + 0.5 * dt, x + (0.5 * dt) * f2, nullptr, nullptr, nullptr);
    const Vector f4 = rhs(t + dt, x + dt * f3, nullptr, nullptr, nullptr);
    x += (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
  }
  const double tN = static_cast<double>(N) * dt;
  traj.times(N) = tN;
  traj.states.row(N) = x.transpose();
  traj.V(N) = x.dot(P * x);
  Vector qN, pN, wN;
  rhs(tN, x, &qN, &pN, &wN);
  traj.q_hist.row(N) = qN.transpose();
  traj.p_hist.row(N) = pN.transpose();
  traj.w_hist.row(N) = wN.transpose();
  return traj;
}

namespace detail {

inline void require_V_consistent(const Trajectory& traj, const Matrix& P) {
  double worst = 0.0;
  const int N = traj.steps();
  for (int k = 0; k <= N; k += std::max(1, N / 64)) {
    const Vector x = traj.states.row(k).transpose();
    worst = std::max(worst, std::abs(traj.V(k) - x.dot(P * x)) /
                                std::max(1.0, std::abs(traj.V(k))));
  }
  if (worst > 1e-9)
    throw Error("trajectory V values inconsistent with the supplied P (rel err " +
                std::to_string(worst) + ")");
}

}  // namespace detail

struct InvarianceReport {
  bool pass = false;
  bool started_inside = false;
  int first_entry = -1;  // first index with V <= level (-1: never)
  double max_violation = 0.0;
  std::string detail;
};

/// Started inside {V <= level}: must stay within level + margin. Started
/// outside: V must be nonincreasing (within margin per step) until entry and
/// must never exceed level + margin afterwards.
inline InvarianceReport check_invariance(const Trajectory& traj, const Matrix& P, double level,
                                         double margin) {
  detail::require_V_consistent(traj, P);
  InvarianceReport rep;
  const int N = traj.steps();
  rep.started_inside = traj.V(0) <= level;
  if (rep.started_inside) {
    rep.first_entry = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= N; ++k) worst = std::max(worst, traj.V(k) - level);
    rep.max_violation = std::max(0.0, worst);
    rep.pass = worst <= margin;
    return rep;
  }
  int entry = -1;
  for (int k = 0; k <= N; ++k)
    if (traj.V(k) <= level) {
      entry = k;
      break;
    }
  rep.first_entry = entry;
  const int decay_end = entry < 0 ? N : entry;
  double worst = 0.0;
  for (int k = 0; k < decay_end; ++k) worst = std::max(worst, traj.V(k + 1) - traj.V(k));
  if (entry >= 0)
    for (int k = entry; k <= N; ++k) worst = std::max(worst, traj.V(k) - level);
  rep.max_violation = std::max(0.0, worst);
  rep.pass = worst <= margin;
  if (entry < 0) rep.detail = "never entered the sublevel set within the horizon";
  return rep;
}

struct LimsupReport {
  bool pass = false;
  double tail_max = 0.0;
  int tail_start = 0;
  double tail_window = 0.0;
  double window_decay_ratio = 0.0;  // tail window / (5 / decay rate); >= 1 wanted
};

inline LimsupReport check_limsup(const Trajectory& traj, const Matrix& P, double level,
                                 double tail_fraction, double tol, double decay_rate = 0.0) {
  detail::require_V_consistent(traj, P);
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw Error("check_limsup: tail_fraction must be in (0, 1]");
  LimsupReport rep;
  const int N = traj.steps();
  rep.tail_start = std::min(N, static_cast<int>(std::ceil((1.0 - tail_fraction) * N)));
  double mx = -std::numeric_limits<double>::infinity();
  for (int k = rep.tail_start; k <= N; ++k) mx = std::max(mx, traj.V(k));
  rep.tail_max = mx;
  rep.tail_window = traj.times(N) - traj.times(rep.tail_start);
  rep.window_decay_ratio = decay_rate > 0.0 ? rep.tail_window * decay_rate / 5.0 : 0.0;
  rep.pass = mx <= level * (1.0 + tol);
  return rep;
}

struct DecrementReport {
  bool pass = true;
  int checked = 0;
  int excluded = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();
  double max_tol = 0.0;
};

/// Finite-difference check of the dissipation inequality outside the
/// ellipsoid: (V(t+dt) - V(t))/dt + x' S x <= tol with S = Q^-1 R Q^-1 and a
/// per-sample tolerance tol = tol_factor * dt * (local dynamics bound). Pairs
/// within one-step travel of the boundary are excluded: the inequality is
/// only quantified over V >= level.
inline DecrementReport lyapunov_decrement_check(const SystemModel& model,
                                                const Trajectory& traj, const Matrix& P,
                                                const Matrix& R_weighted, double level,
                                                double tol_factor = 10.0) {
  detail::require_V_consistent(traj, P);
  DecrementReport rep;
  const int N = traj.steps();
  const double p_norm = std::max(1e-300, max_eig_sym(P));
  const double s_norm = std::max(R_weighted.size() > 0 ? max_eig_sym(R_weighted) : 0.0, 0.0);
  const double dt = traj.dt;
  for (int k = 0; k < N; ++k) {
    const Vector xk = traj.states.row(k).transpose();
    const Vector xk1 = traj.states.row(k + 1).transpose();
    const Vector fk = model.A * xk + model.E * traj.p_hist.row(k).transpose() +
                      model.G * traj.w_hist.row(k).transpose();
    const Vector fk1 = model.A * xk1 + model.E * traj.p_hist.row(k + 1).transpose() +
                       model.G * traj.w_hist.row(k + 1).transpose();
    const double mx = std::max(xk.norm(), xk1.norm());
    const double mf = std::max(fk.norm(), fk1.norm());
    const double travel = 2.0 * dt * p_norm * mx * mf;
    if (std::min(traj.V(k), traj.V(k + 1)) < level + travel) {
      ++rep.excluded;
      continue;
    }
    const double lhs = (traj.V(k + 1) - traj.V(k)) / dt + xk.dot(R_weighted * xk);
    const double tol = tol_factor * dt * (2.0 * std::max(p_norm, s_norm) * mx * mf);
    rep.max_tol = std::max(rep.max_tol, tol);
    rep.worst_slack = std::max(rep.worst_slack, lhs - tol);
    if (lhs > tol) rep.pass = false;
    ++rep.checked;
  }
  return rep;
}

struct MonteCarloConfig {
  int n_runs = 100;
  std::vector<ConicSampler> samplers;           // cycled across runs
  std::vector<DisturbanceSignal> disturbances;  // cycled across runs
  double x0_inside_fraction = 0.5;
  double x0_outside_factor = 3.0;  // outside starts at V = factor^2 * level
  double dt = 0.0;                 // <= 0: auto from dynamics rate
  double t_final = 0.0;            // <= 0: auto >= 10 / decay rate
  double w_bound = 0.0;
  std::uint64_t seed = 1;
  double invariance_margin_rel = 1e-3;
  double tail_fraction = 0.2;
  double limsup_tol = 0.01;
  double decrement_tol_factor = 10.0;
  int keep_trajectories = 0;  // retain the first k trajectories in the report
};

struct RunRecord {
  int index = 0;
  std::string sampler, disturbance;
  bool within_lemma_hypotheses = true;
  bool ok = false;
  std::string error;
  double V0 = 0.0;
  double tail_max = 0.0;
  bool invariance_pass = false;
  bool limsup_pass = false;
  bool limsup_applicable = true;
  bool decrement_pass = false;
  int decrement_checked = 0;
};

struct MonteCarloReport {
  std::vector<RunRecord> runs;
  std::vector<Trajectory> trajectories;  // first keep_trajectories runs
  int n_ok = 0;
  int invariance_passes = 0;
  int limsup_passes = 0;
  int decrement_passes = 0;
  double empirical_tightest_level = std::numeric_limits<double>::quiet_NaN();
  bool all_pass = true;
  double dt_used = 0.0, t_final_used = 0.0, level = 0.0, decay_rate = 0.0;
};

/// Repeated simulation of the certified system across samplers, disturbances
/// and initial conditions; aggregates invariance / tail / dissipation checks.
/// Fully reproducible from the seed; single-run failures are recorded, not
/// fatal.
inline MonteCarloReport monte_carlo(const SystemModel& model, const AnalysisCertificate& cert,
                                    const MonteCarloConfig& cfg) {
  MonteCarloReport rep;
  if (cfg.n_runs <= 0) return rep;
  if (cfg.samplers.empty()) throw Error("monte_carlo: no samplers configured");
  if (cfg.disturbances.empty()) throw Error("monte_carlo: no disturbances configured");

  const UltimateBound ub = ultimate_bound(cert, cfg.w_bound);
  rep.level = ub.level;
  rep.decay_rate = ub.decay_rate;
  const Matrix& P = ub.P;
  const Matrix S = P * cert.R * P;

  double t_final = cfg.t_final;
  if (t_final <= 0.0) {
    const double alpha = std::max(ub.decay_rate, 1e-6);
    t_final = std::min(std::max(10.0 / alpha, 1.0), 1e5);
  }
  double max_gain = 0.0;
  for (const auto& s : cfg.samplers)
    max_gain = std::max(max_gain, s.kind == ConicSampler::Kind::SectorScalar ? s.k : s.gain);
  const double rate = singular_range(model.A).max +
                      max_gain * singular_range(model.E).max * singular_range(model.Cq).max +
                      1e-6;
  double dt = cfg.dt;
  if (dt <= 0.0) {
    dt = std::min(0.02 / rate, t_final / 2000.0);
    dt = std::max(dt, t_final / 400000.0);
  }
  rep.dt_used = dt;
  rep.t_final_used = t_final;

  const int inside_runs = static_cast<int>(std::floor(cfg.x0_inside_fraction * cfg.n_runs));
  double tightest = std::numeric_limits<double>::infinity();

  for (int i = 0; i < cfg.n_runs; ++i) {
    RunRecord rr;
    rr.index = i;
    ConicSampler sampler = cfg.samplers[i % cfg.samplers.size()];
    sampler.rng_seed = Rng::derived(cfg.seed, 2 * static_cast<std::uint64_t>(i)).next();
    const DisturbanceSignal& dist = cfg.disturbances[i % cfg.disturbances.size()];
    rr.sampler = sampler.kind_name();
    rr.disturbance = dist.kind_name();
    rr.within_lemma_hypotheses = dist.continuous_signal();
    try {
      Rng rng = Rng::derived(cfg.seed, 2 * static_cast<std::uint64_t>(i) + 1);
      const Vector dir = rng.unit_vector(model.n());
      const double quad = dir.dot(P * dir);
      double target_v;
      if (i < inside_runs) {
        target_v = ub.level * rng.uniform(0.5, 1.0);
      } else {
        target_v = (ub.level > 0.0 ? ub.level : 1.0) * cfg.x0_outside_factor *
                   cfg.x0_outside_factor;
      }
      const Vector x0 = dir * std::sqrt(std::max(target_v, 0.0) / quad);

      const Trajectory traj = integrate(model, sampler, dist, x0, dt, t_final, P);
      rr.V0 = traj.V(0);

      const double margin =
          std::max(cfg.invariance_margin_rel * ub.level, 1e-12 * std::max(1.0, rr.V0));
      const InvarianceReport inv = check_invariance(traj, P, ub.level, margin);
      rr.invariance_pass = inv.pass;

      if (ub.level > 0.0) {
        const LimsupReport ls =
            check_limsup(traj, P, ub.level, cfg.tail_fraction, cfg.limsup_tol, ub.decay_rate);
        rr.limsup_pass = ls.pass;
        rr.tail_max = ls.tail_max;
      } else {
        rr.limsup_applicable = false;
        rr.limsup_pass = true;
        double mx = -std::numeric_limits<double>::infinity();
        const int start = static_cast<int>(std::ceil((1.0 - cfg.tail_fraction) * traj.steps()));
        for (int k = start; k <= traj.steps(); ++k) mx = std::max(mx, traj.V(k));
        rr.tail_max = mx;
      }
      tightest = std::min(tightest, rr.tail_max);

      const DecrementReport dec =
          lyapunov_decrement_check(model, traj, P, S, ub.level, cfg.decrement_tol_factor);
      rr.decrement_pass = dec.pass;
      rr.decrement_checked = dec.checked;

      rr.ok = true;
      if (static_cast<int>(rep.trajectories.size()) < cfg.keep_trajectories)
        rep.trajectories.push_back(traj);
    } catch (const Error& e) {
      rr.error = e.what();
    } catch (const std::exception& e) {
      rr.error = e.what();
    }
    rep.n_ok += rr.ok ? 1 : 0;
    rep.invariance_passes += (rr.ok && rr.invariance_pass) ? 1 : 0;
    rep.limsup_passes += (rr.ok && rr.limsup_pass) ? 1 : 0;
    rep.decrement_passes += (rr.ok && rr.decrement_pass) ? 1 : 0;
    rep.all_pass = rep.all_pass && rr.ok && rr.invariance_pass && rr.limsup_pass &&
                   rr.decrement_pass;
    rep.runs.push_back(std::move(rr));
  }
  if (rep.n_ok > 0) rep.empirical_tightest_level = tightest;
  return rep;
}

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  const int n = static_cast<int>(traj.states.cols());
  const int nq = static_cast<int>(traj.q_hist.cols());
  const int np = static_cast<int>(traj.p_hist.cols());
  const int nw = static_cast<int>(traj.w_hist.cols());
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x_" << i;
  os << ",V";
  for (int i = 1; i <= nq; ++i) os << ",q_" << i;
  for (int i = 1; i <= np; ++i) os << ",p_" << i;
  for (int i = 1; i <= nw; ++i) os << ",w_" << i;
  os << "\n";
  char buf[40];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (int k = 0; k <= traj.steps(); ++k) {
    put(traj.times(k));
    for (int i = 0; i < n; ++i) {
      os << ",";
      put(traj.states(k, i));
    }
    os << ",";
    put(traj.V(k));
    for (int i = 0; i < nq; ++i) {
      os << ",";
      put(traj.q_hist(k, i));
    }
    for (int i = 0; i < np; ++i) {
      os << ",";
      put(traj.p_hist(k, i));
    }
    for (int i = 0; i < nw; ++i) {
      os << ",";
      put(traj.w_hist(k, i));
    }
    os << "\n";
  }
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open trajectory file for writing: " + path);
  write_trajectory_csv(traj, f);
}

}  // namespace conebound
