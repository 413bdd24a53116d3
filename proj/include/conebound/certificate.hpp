#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conebound/lmi.hpp"
#include "conebound/sdp.hpp"

namespace conebound {

/// A feasible analysis point: the proof object that everything downstream
/// (verification, bounds, simulation) consumes. lambda is absent for
/// quadratic-stability certificates.
struct AnalysisCertificate {
  Matrix Q, X, Y, R;
  std::optional<double> lambda;
  std::vector<std::pair<std::string, double>> margins;  // informational
};

inline AnalysisCertificate certificate_from_solution(const SolutionPoint& s) {
  AnalysisCertificate c;
  c.Q = s.Q;
  c.X = s.X;
  c.Y = s.Y;
  c.R = s.R;
  c.lambda = s.lambda;
  c.margins = s.block_margins;
  return c;
}

struct CertificateReport {
  std::vector<CheckItem> checks;
  bool pass = true;
  bool dims_ok = true;
  double lmi_max_eig = std::numeric_limits<double>::quiet_NaN();
  double tolerance = 0.0;

  void add(std::string name, bool ok, double value, std::string detail = "") {
    checks.push_back({std::move(name), ok, value, std::move(detail)});
    pass = pass && ok;
  }
  const CheckItem* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline bool cert_dims_ok(const SystemModel& m, const AnalysisCertificate& c, std::string* why) {
  const auto bad = [&](const std::string& s) {
    *why = s;
    return false;
  };
  if (c.Q.rows() != m.n() || c.Q.cols() != m.n()) return bad("Q must be n x n");
  if (c.R.rows() != m.n() || c.R.cols() != m.n()) return bad("R must be n x n");
  if (c.X.rows() != m.nq() || c.X.cols() != m.nq()) return bad("X must be nq x nq");
  if (c.Y.rows() != m.np() || c.Y.cols() != m.np()) return bad("Y must be np x np");
  return true;
}

// Membership of (X, Y) in the declared multiplier-pair set, up to a relative
// tolerance appropriate for round-tripped floating point data.
inline void check_nset_membership(const NSet& nset, const Matrix& X, const Matrix& Y,
                                  CertificateReport* rep) {
  const double tol = 1e-8;
  const auto rel = [](const Matrix& a, const Matrix& b) {
    const double s = std::max(1.0, b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / s;
  };
  switch (nset.kind) {
    case NSetKind::FixedPair: {
      const double r = std::max(rel(X, nset.X0), rel(Y, nset.Y0));
      rep->add("nset_membership", r < tol, r, "fixed pair deviation");
      break;
    }
    case NSetKind::ScalarScaledPair: {
      const double denom = nset.X0.cwiseProduct(nset.X0).sum();
      const double tau = nset.X0.cwiseProduct(X).sum() / std::max(denom, 1e-300);
      const double r = std::max(rel(X, Matrix(tau * nset.X0)), rel(Y, Matrix(tau * nset.Y0)));
      rep->add("nset_membership", tau > 0.0 && r < tol, r,
               "scalar-scaled pair, tau = " + std::to_string(tau));
      break;
    }
    case NSetKind::DiagonalPD: {
      double off = 0.0;
      const double sx = std::max(1.0, X.cwiseAbs().maxCoeff());
      const double sy = std::max(1.0, Y.cwiseAbs().maxCoeff());
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.cols(); ++j)
          if (i != j) off = std::max(off, std::abs(X(i, j)) / sx);
      for (int i = 0; i < Y.rows(); ++i)
        for (int j = 0; j < Y.cols(); ++j)
          if (i != j) off = std::max(off, std::abs(Y(i, j)) / sy);
      rep->add("nset_membership", off < tol, off, "off-diagonal mass");
      break;
    }
    case NSetKind::BlockDiagonalPD: {
      double off = 0.0;
      const auto scan = [&](const Matrix& M, const std::vector<int>& bl) {
        const double s = std::max(1.0, M.cwiseAbs().maxCoeff());
        Matrix mask = Matrix::Zero(M.rows(), M.cols());
        int pos = 0;
        for (int b : bl) {
          mask.block(pos, pos, b, b).setOnes();
          pos += b;
        }
        for (int i = 0; i < M.rows(); ++i)
          for (int j = 0; j < M.cols(); ++j)
            if (mask(i, j) == 0.0) off = std::max(off, std::abs(M(i, j)) / s);
      };
      scan(X, nset.x_blocks);
      scan(Y, nset.y_blocks);
      rep->add("nset_membership", off < tol, off, "off-block mass");
      break;
    }
    case NSetKind::FreePD:
      rep->add("nset_membership", true, 0.0, "free pair");
      break;
  }
}

}  // namespace detail

/// Re-assembles the analysis inequality from raw problem data at the
/// certificate point and verifies definiteness of every certified matrix.
/// Independent of the solver's internal representation; always returns a
/// report rather than throwing.
inline CertificateReport check_certificate(const SystemModel& model,
                                           const MultiplierStructure& s,
                                           const AnalysisCertificate& cert,
                                           double eig_tol_rel = 1e-7) {
  CertificateReport rep;
  std::string why;
  if (!detail::cert_dims_ok(model, cert, &why)) {
    rep.dims_ok = false;
    rep.add("dimensions", false, 0.0, why);
    return rep;
  }
  rep.add("dimensions", true, 0.0);

  const bool finite = cert.Q.allFinite() && cert.X.allFinite() && cert.Y.allFinite() &&
                      cert.R.allFinite() && (!cert.lambda || std::isfinite(*cert.lambda));
  rep.add("finite_entries", finite, 0.0, finite ? "" : "non-finite entry");
  if (!finite) return rep;

  rep.add("Q_pd", min_eig_sym(cert.Q) > 0.0, min_eig_sym(cert.Q));
  rep.add("X_pd", min_eig_sym(cert.X) > 0.0, min_eig_sym(cert.X));
  rep.add("Y_pd", min_eig_sym(cert.Y) > 0.0, min_eig_sym(cert.Y));
  {
    const double r_scale = std::max(1.0, cert.R.cwiseAbs().maxCoeff());
    rep.add("R_psd", min_eig_sym(cert.R) >= -1e-10 * r_scale, min_eig_sym(cert.R));
  }
  if (cert.lambda) rep.add("lambda_positive", *cert.lambda > 0.0, *cert.lambda);

  detail::check_nset_membership(s.nset, cert.X, cert.Y, &rep);

  try {
    const DerivedMaps maps = derived_maps(s, model.D);
    const Matrix lmi =
        cert.lambda
            ? assemble_ultimate_lmi(model, s, maps, cert.Q, cert.X, cert.Y, *cert.lambda, cert.R)
                  .dense()
            : assemble_stability_lmi(model, s, maps, cert.Q, cert.X, cert.Y, cert.R).dense();
    rep.lmi_max_eig = max_eig_sym(lmi);
    rep.tolerance = eig_tol_rel * std::max(1.0, lmi.cwiseAbs().maxCoeff());
    rep.add("lmi_negative_semidefinite", rep.lmi_max_eig <= rep.tolerance, rep.lmi_max_eig,
            "tolerance " + std::to_string(rep.tolerance));
  } catch (const Error& e) {
    rep.add("lmi_negative_semidefinite", false, 0.0, e.what());
  }
  return rep;
}

struct ProofStep {
  std::string name;
  double max_eig = 0.0;
  double residual = 0.0;
  bool pass = true;
  std::string detail;
};

struct ProofChainReport {
  std::vector<ProofStep> steps;
  bool pass = true;
  double tolerance = 0.0;

  void add(std::string name, double max_eig, bool ok, double residual = 0.0,
           std::string detail = "") {
    steps.push_back({std::move(name), max_eig, residual, ok, std::move(detail)});
    pass = pass && ok;
  }
};

/// Numerically replays the congruence / Schur / regrouping / factorization
/// steps that take the analysis inequality to the final multiplier form. Each
/// intermediate matrix is built from the certificate alone. Steps must stay
/// negative semidefinite (to a tolerance 10x looser than the direct check,
/// absorbing congruence rounding); the factorization step is additionally
/// checked as an exact matrix identity.
inline ProofChainReport replay_proof_chain(const SystemModel& model,
                                           const MultiplierStructure& s,
                                           const AnalysisCertificate& cert,
                                           double eig_tol_rel = 1e-7) {
  std::string why;
  if (!detail::cert_dims_ok(model, cert, &why)) throw Error("replay_proof_chain: " + why);

  const int n = model.n(), np = model.np(), nq = model.nq(), nw = model.nw();
  const bool ultimate = cert.lambda.has_value();
  const double lambda = ultimate ? *cert.lambda : 0.0;

  const DerivedMaps maps = derived_maps(s, model.D);
  const Matrix Qi = pd_inverse(cert.Q, "replay_proof_chain step S1: Q");
  const Matrix Yi = pd_inverse(cert.Y, "replay_proof_chain step S1: Y");
  const Matrix Xi = pd_inverse(cert.X, "replay_proof_chain step S2: X");
  const Matrix EGi =
      solve_nonsingular(maps.Gamma.transpose(), model.E.transpose(), "replay_proof_chain: Gamma")
          .transpose();

  const Matrix M0 =
      ultimate
          ? assemble_ultimate_lmi(model, s, maps, cert.Q, cert.X, cert.Y, lambda, cert.R).dense()
          : assemble_stability_lmi(model, s, maps, cert.Q, cert.X, cert.Y, cert.R).dense();

  ProofChainReport rep;
  const double scale = std::max(1.0, M0.cwiseAbs().maxCoeff());
  rep.tolerance = 10.0 * eig_tol_rel * scale;
  // steps are congruences/regroupings of M0; their own magnitude sets the
  // attainable rounding floor
  const auto step_tol = [&](const Matrix& m) {
    return 10.0 * eig_tol_rel * std::max(1.0, m.cwiseAbs().maxCoeff());
  };

  // S1: reorder to [x, p, w, q] (ultimate only) and scale by diag(Q^-1, Y^-1, I, I)
  Matrix M1;
  {
    const int d = n + np + nq + (ultimate ? nw : 0);
    Matrix U = Matrix::Zero(d, d);
    std::vector<int> perm(d);
    int at = 0;
    for (int i = 0; i < n + np; ++i) perm[at++] = i;
    if (ultimate)
      for (int i = 0; i < nw; ++i) perm[at++] = n + np + nq + i;
    for (int i = 0; i < nq; ++i) perm[at++] = n + np + i;
    for (int j = 0; j < d; ++j) U(perm[j], j) = 1.0;

    Matrix S = Matrix::Identity(d, d);
    S.topLeftCorner(n, n) = Qi;
    S.block(n, n, np, np) = Yi;
    M1 = congruence(congruence(M0, U), S);
    rep.add("S1_permute_and_scale", max_eig_sym(M1), max_eig_sym(M1) <= step_tol(M1));
  }

  // S2: Schur complement eliminating the trailing -X block
  Matrix M2;
  {
    const int d = static_cast<int>(M1.rows());
    M2 = schur_complement_nd(M1, d - nq, nq);
    rep.add("S2_schur_eliminate_X", max_eig_sym(M2), max_eig_sym(M2) <= step_tol(M2));
  }

  // S3: regroup the rank terms into the blkdiag(X^-1, -Y^-1) form
  const int base_dim = n + np + (ultimate ? nw : 0);
  Matrix M3;
  {
    Matrix base = Matrix::Zero(base_dim, base_dim);
    Matrix k11 = Qi * (model.A - EGi * s.T21 * model.Cq);
    k11 = k11 + k11.transpose() + Qi * cert.R * Qi;
    if (ultimate) k11 += lambda * Qi;
    base.topLeftCorner(n, n) = symmetrize(k11);
    base.block(0, n, n, np) = Qi * EGi;
    base.block(n, 0, np, n) = (Qi * EGi).transpose();
    if (ultimate) {
      base.block(0, n + np, n, nw) = Qi * model.G;
      base.block(n + np, 0, nw, n) = (Qi * model.G).transpose();
      base.block(n + np, n + np, nw, nw) = -lambda * Matrix::Identity(nw, nw);
    }
    Matrix J = Matrix::Zero(nq + np, base_dim);
    J.topLeftCorner(nq, n) = maps.Sigma * model.Cq;
    J.block(0, n, nq, np) = maps.Lambda;
    J.block(nq, n, np, np) = Matrix::Identity(np, np);
    Matrix core = Matrix::Zero(nq + np, nq + np);
    core.topLeftCorner(nq, nq) = Xi;
    core.bottomRightCorner(np, np) = -Yi;
    M3 = symmetrize(base + J.transpose() * core * J);
    const double resid = (M3 - M2).cwiseAbs().maxCoeff() / std::max(1.0, M2.cwiseAbs().maxCoeff());
    rep.add("S3_regroup_multiplier", max_eig_sym(M3), max_eig_sym(M3) <= step_tol(M3), resid);
  }

  // S4: absorb the loop transform and check the T-factorization identity
  Matrix M4;
  {
    Matrix V = Matrix::Identity(base_dim, base_dim);
    V.block(n, 0, np, n) = s.T21 * model.Cq;
    V.block(n, n, np, np) = maps.Gamma;
    M4 = congruence(M3, V);

    Matrix left = Matrix::Zero(nq + np, nq + np);
    left.topLeftCorner(nq, nq) = maps.Sigma;
    left.block(0, nq, nq, np) = maps.Lambda;
    left.block(nq, nq, np, np) = Matrix::Identity(np, np);
    Matrix inner = Matrix::Zero(nq + np, base_dim);
    inner.topLeftCorner(nq, n) = model.Cq;
    inner.block(nq, 0, np, n) = s.T21 * model.Cq;
    inner.block(nq, n, np, np) = maps.Gamma;
    Matrix factored = Matrix::Zero(nq + np, base_dim);
    factored.topLeftCorner(nq, n) = model.Cq;
    factored.block(0, n, nq, np) = model.D;
    factored.block(nq, n, np, np) = Matrix::Identity(np, np);
    const Matrix lhs = left * inner;
    const Matrix rhs = s.T() * factored;
    const double resid =
        (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
    rep.add("S4_loop_transform", max_eig_sym(M4),
            max_eig_sym(M4) <= step_tol(M4) && resid < 1e-10, resid,
            "T-factorization identity residual");
  }

  // S5: the final multiplier inequality
  {
    Matrix base = Matrix::Zero(base_dim, base_dim);
    Matrix k11 = Qi * model.A;
    k11 = k11 + k11.transpose() + Qi * cert.R * Qi;
    if (ultimate) k11 += lambda * Qi;
    base.topLeftCorner(n, n) = symmetrize(k11);
    base.block(0, n, n, np) = Qi * model.E;
    base.block(n, 0, np, n) = (Qi * model.E).transpose();
    if (ultimate) {
      base.block(0, n + np, n, nw) = Qi * model.G;
      base.block(n + np, 0, nw, n) = (Qi * model.G).transpose();
      base.block(n + np, n + np, nw, nw) = -lambda * Matrix::Identity(nw, nw);
    }
    Matrix W = Matrix::Zero(nq + np, base_dim);
    W.topLeftCorner(nq, n) = model.Cq;
    W.block(0, n, nq, np) = model.D;
    W.block(nq, n, np, np) = Matrix::Identity(np, np);
    const MultiplierMatrix M = multiplier_from_pair(s, cert.X, cert.Y);
    const Matrix M5 = symmetrize(base + W.transpose() * M.M * W);
    const double resid = (M5 - M4).cwiseAbs().maxCoeff() / std::max(1.0, M4.cwiseAbs().maxCoeff());
    rep.add("S5_multiplier_inequality", max_eig_sym(M5), max_eig_sym(M5) <= step_tol(M5),
            resid);
  }
  return rep;
}

struct SpotcheckReport {
  int samples = 0;
  double max_form_value = -std::numeric_limits<double>::infinity();
  double matrix_max_eig = 0.0;
  int implication_checked = 0;
  double implication_worst = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  bool pass = true;
};

/// Samples the final scalar quadratic form of the proof at random (x, p, w)
/// triples and confirms it stays nonpositive, then verifies the dissipation
/// implication directly on admissible samples: whenever the quadratic
/// inequality holds for p and V >= ||w||^2, the directional derivative obeys
/// Vdot <= -x' Q^-1 R Q^-1 x (up to tolerance).
inline SpotcheckReport sprocedure_spotcheck(const SystemModel& model,
                                            const MultiplierStructure& s,
                                            const AnalysisCertificate& cert, int sample_count,
                                            std::uint64_t rng_seed) {
  std::string why;
  if (!detail::cert_dims_ok(model, cert, &why)) throw Error("sprocedure_spotcheck: " + why);

  const int n = model.n(), np = model.np(), nw = model.nw();
  const bool ultimate = cert.lambda.has_value();
  const double lambda = ultimate ? *cert.lambda : 0.0;
  const Matrix P = pd_inverse(cert.Q, "sprocedure_spotcheck: Q");
  const Matrix S = P * cert.R * P;
  const MultiplierMatrix M = multiplier_from_pair(s, cert.X, cert.Y);

  SpotcheckReport rep;
  rep.samples = sample_count;

  // matrix form of the displayed scalar inequality
  {
    const int d = n + np + (ultimate ? nw : 0);
    Matrix base = Matrix::Zero(d, d);
    Matrix k11 = P * model.A;
    k11 = k11 + k11.transpose() + S;
    if (ultimate) k11 += lambda * P;
    base.topLeftCorner(n, n) = symmetrize(k11);
    base.block(0, n, n, np) = P * model.E;
    base.block(n, 0, np, n) = (P * model.E).transpose();
    if (ultimate) {
      base.block(0, n + np, n, nw) = P * model.G;
      base.block(n + np, 0, nw, n) = (P * model.G).transpose();
      base.block(n + np, n + np, nw, nw) = -lambda * Matrix::Identity(nw, nw);
    }
    Matrix W = Matrix::Zero(model.nq() + np, d);
    W.topLeftCorner(model.nq(), n) = model.Cq;
    W.block(0, n, model.nq(), np) = model.D;
    W.block(model.nq(), n, np, np) = Matrix::Identity(np, np);
    const Matrix form = symmetrize(base + W.transpose() * M.M * W);
    rep.matrix_max_eig = max_eig_sym(form);
    rep.tolerance = 1e-8 * std::max(1.0, form.cwiseAbs().maxCoeff());
  }

  Rng rng(rng_seed);
  for (int i = 0; i < sample_count; ++i) {
    Vector x = rng.normal_vector(n);
    Vector p = (i % 2 == 0) ? Vector(Vector::Zero(np)) : Vector(rng.normal_vector(np));
    Vector w = ultimate ? rng.normal_vector(nw) : Vector(Vector::Zero(nw));
    const double nrm = std::sqrt(x.squaredNorm() + p.squaredNorm() + w.squaredNorm());
    if (nrm > 1e-300) {
      x /= nrm;
      p /= nrm;
      w /= nrm;
    }
    const Vector q = model.Cq * x + model.D * p;
    const Vector xdot = model.A * x + model.E * p + model.G * w;
    const double V = x.dot(P * x);
    const double qi = qi_residual(M, q, p);
    double form = 2.0 * x.dot(P * xdot) + x.dot(S * x) + qi;
    if (ultimate) form += lambda * (V - w.squaredNorm());
    rep.max_form_value = std::max(rep.max_form_value, form);

    const bool admissible = qi >= 0.0;
    const bool outside = !ultimate || V >= w.squaredNorm();
    if (admissible && outside) {
      ++rep.implication_checked;
      const double slack = 2.0 * x.dot(P * xdot) + x.dot(S * x);
      rep.implication_worst = std::max(rep.implication_worst, slack);
    }
  }
  rep.pass = rep.matrix_max_eig <= rep.tolerance &&
             (sample_count == 0 || rep.max_form_value <= rep.tolerance) &&
             (rep.implication_checked == 0 || rep.implication_worst <= rep.tolerance);
  return rep;
}

/// The invariant/attractive ellipsoid and derived quantities: P = Q^-1,
/// level = w_bound^2, radius = sqrt(lambda_max(Q)) * w_bound, and the decay
/// rate alpha = largest alpha with R >= alpha Q (so Vdot <= -alpha V outside
/// the ellipsoid).
struct UltimateBound {
  Matrix P;
  double w_bound = 0.0;
  double level = 0.0;
  double radius = 0.0;
  double decay_rate = 0.0;
};

inline UltimateBound ultimate_bound(const AnalysisCertificate& cert, double w_bound) {
  if (w_bound < 0.0) throw Error("ultimate_bound: w_bound must be >= 0");
  UltimateBound ub;
  ub.P = pd_inverse(cert.Q, "ultimate_bound: Q");
  ub.w_bound = w_bound;
  ub.level = w_bound * w_bound;
  ub.radius = std::sqrt(max_eig_sym(cert.Q)) * w_bound;
  Eigen::LLT<Matrix> llt(symmetrize(cert.Q));
  if (llt.info() != Eigen::Success) throw Error("ultimate_bound: Q Cholesky failed");
  const Matrix l = llt.matrixL();
  const auto lt = l.triangularView<Eigen::Lower>();
  const Matrix tmp = lt.solve(cert.R);
  const Matrix pencil = lt.solve(tmp.transpose()).transpose();
  ub.decay_rate = min_eig_sym(symmetrize(pencil));
  return ub;
}

}  // namespace conebound
