#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conebound/linalg.hpp"

namespace conebound {

/// Continuous-time plant  xdot = A x + E p + G w,  q = Cq x + D p.
/// p is the conic uncertain/nonlinear term, w a bounded disturbance.
struct SystemModel {
  Matrix A;   // n x n
  Matrix E;   // n x np
  Matrix G;   // n x nw
  Matrix Cq;  // nq x n
  Matrix D;   // nq x np

  int n() const { return static_cast<int>(A.rows()); }
  int np() const { return static_cast<int>(E.cols()); }
  int nq() const { return static_cast<int>(Cq.rows()); }
  int nw() const { return static_cast<int>(G.cols()); }
};

/// How the convex set of multiplier pairs (X, Y) is parameterized. Every
/// variant reduces to finitely many linear constraints plus positive
/// definiteness, so it can enter a semidefinite program directly.
enum class NSetKind {
  FixedPair,         // X = X0, Y = Y0 (no free parameters)
  ScalarScaledPair,  // (X, Y) = (tau * Xhat, tau * Yhat), tau > 0
  DiagonalPD,        // X, Y positive definite and diagonal
  BlockDiagonalPD,   // X, Y positive definite block diagonal
  FreePD             // X, Y arbitrary symmetric positive definite
};

inline const char* to_string(NSetKind k) {
  switch (k) {
    case NSetKind::FixedPair: return "fixed_pair";
    case NSetKind::ScalarScaledPair: return "scalar_scaled_pair";
    case NSetKind::DiagonalPD: return "diagonal_pd";
    case NSetKind::BlockDiagonalPD: return "block_diagonal_pd";
    case NSetKind::FreePD: return "free_pd";
  }
  return "?";
}

struct NSet {
  NSetKind kind = NSetKind::FreePD;
  Matrix X0, Y0;  // FixedPair: the pair itself; ScalarScaledPair: Xhat, Yhat
  std::vector<int> x_blocks, y_blocks;  // BlockDiagonalPD partition

  static NSet fixed_pair(Matrix x0, Matrix y0) {
    NSet s;
    s.kind = NSetKind::FixedPair;
    s.X0 = std::move(x0);
    s.Y0 = std::move(y0);
    return s;
  }
  static NSet scalar_scaled_pair(Matrix xhat, Matrix yhat) {
    NSet s;
    s.kind = NSetKind::ScalarScaledPair;
    s.X0 = std::move(xhat);
    s.Y0 = std::move(yhat);
    return s;
  }
  static NSet diagonal_pd() {
    NSet s;
    s.kind = NSetKind::DiagonalPD;
    return s;
  }
  static NSet block_diagonal_pd(std::vector<int> xb, std::vector<int> yb) {
    NSet s;
    s.kind = NSetKind::BlockDiagonalPD;
    s.x_blocks = std::move(xb);
    s.y_blocks = std::move(yb);
    return s;
  }
  static NSet free_pd() { return NSet{}; }
};

/// The 2x2-block factorization matrix T together with the multiplier set
/// parameterization: usable multipliers are M = T' blkdiag(X^-1, -Y^-1) T
/// over pairs (X, Y) in the set described by `nset`.
struct MultiplierStructure {
  Matrix T11;  // nq x nq
  Matrix T12;  // nq x np
  Matrix T21;  // np x nq
  Matrix T22;  // np x np
  NSet nset;

  int nq() const { return static_cast<int>(T11.rows()); }
  int np() const { return static_cast<int>(T22.rows()); }

  Matrix T() const {
    Matrix t(nq() + np(), nq() + np());
    t.topLeftCorner(nq(), nq()) = T11;
    t.topRightCorner(nq(), np()) = T12;
    t.bottomLeftCorner(np(), nq()) = T21;
    t.bottomRightCorner(np(), np()) = T22;
    return t;
  }
};

/// Norm-bounded uncertainty ||p|| <= gain * ||q||: T = I and the multiplier
/// ray tau * blkdiag(gain^2 I, -I), encoded as (X, Y) = tau (gain^-2 I, I).
inline MultiplierStructure norm_bounded(double gain, int nq = 1, int np = 1) {
  if (!(gain > 0.0)) throw Error("norm_bounded: gain must be > 0");
  if (nq < 1 || np < 1) throw Error("norm_bounded: dimensions must be >= 1");
  MultiplierStructure s;
  s.T11 = Matrix::Identity(nq, nq);
  s.T12 = Matrix::Zero(nq, np);
  s.T21 = Matrix::Zero(np, nq);
  s.T22 = Matrix::Identity(np, np);
  s.nset = NSet::scalar_scaled_pair(Matrix::Identity(nq, nq) / (gain * gain),
                                    Matrix::Identity(np, np));
  return s;
}

/// Scalar sector [0, K]: p(Kq - p) >= 0. The quadratic form Kqp - p^2 factors
/// as (Kq/2)^2 - (p - Kq/2)^2, giving T = [[K/2, 0], [-K/2, 1]] with the
/// multiplier ray X = Y = tau.
inline MultiplierStructure sector_scalar(double k) {
  if (!(k > 0.0)) throw Error("sector_scalar: k must be > 0");
  MultiplierStructure s;
  s.T11 = Matrix::Constant(1, 1, k / 2.0);
  s.T12 = Matrix::Zero(1, 1);
  s.T21 = Matrix::Constant(1, 1, -k / 2.0);
  s.T22 = Matrix::Identity(1, 1);
  s.nset = NSet::scalar_scaled_pair(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  return s;
}

/// Gamma = T21 D + T22, Lambda = (T11 D + T12) Gamma^-1,
/// Sigma = T11 - (T11 D + T12) Gamma^-1 T21.
struct DerivedMaps {
  Matrix Gamma;   // np x np
  Matrix Lambda;  // nq x np
  Matrix Sigma;   // nq x nq
};

inline DerivedMaps derived_maps(const MultiplierStructure& s, const Matrix& D,
                                double rank_tol = kRankTol) {
  if (D.rows() != s.nq() || D.cols() != s.np())
    throw Error("derived_maps: D must be nq x np to match T blocks");
  DerivedMaps m;
  m.Gamma = s.T21 * D + s.T22;
  const SingularRange sr = singular_range(m.Gamma);
  if (sr.min <= rank_tol * std::max(sr.max, 1e-300))
    throw Error("derived_maps: Gamma = T21*D + T22 is singular (sigma_min " +
                std::to_string(sr.min) + ")");
  const Matrix num = s.T11 * D + s.T12;
  // Lambda = num * Gamma^-1 via solving Gamma' Lambda' = num'
  m.Lambda = solve_nonsingular(m.Gamma.transpose(), num.transpose(), "derived_maps: Gamma",
                               rank_tol)
                 .transpose();
  m.Sigma = s.T11 - m.Lambda * s.T21;
  return m;
}

struct MultiplierMatrix {
  Matrix M;  // symmetric (nq+np) x (nq+np)
};

inline MultiplierMatrix multiplier_from_pair(const MultiplierStructure& s, const Matrix& X,
                                             const Matrix& Y) {
  if (X.rows() != s.nq() || X.cols() != s.nq())
    throw Error("multiplier_from_pair: X must be nq x nq");
  if (Y.rows() != s.np() || Y.cols() != s.np())
    throw Error("multiplier_from_pair: Y must be np x np");
  const Matrix Xi = pd_inverse(X, "multiplier_from_pair: X");
  const Matrix Yi = pd_inverse(Y, "multiplier_from_pair: Y");
  Matrix core = Matrix::Zero(s.nq() + s.np(), s.nq() + s.np());
  core.topLeftCorner(s.nq(), s.nq()) = Xi;
  core.bottomRightCorner(s.np(), s.np()) = -Yi;
  const Matrix t = s.T();
  return MultiplierMatrix{symmetrize(t.transpose() * core * t)};
}

/// [q; p]' M [q; p]. Admissible (q, p) pairs yield a nonnegative value.
inline double qi_residual(const MultiplierMatrix& m, const Vector& q, const Vector& p) {
  if (q.size() + p.size() != m.M.rows())
    throw Error("qi_residual: dim(q) + dim(p) must equal dim(M)");
  Vector z(q.size() + p.size());
  z << q, p;
  return z.dot(m.M * z);
}

struct CheckItem {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckItem> checks;
  bool pass = true;

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

inline bool dims_message(const SystemModel& m, std::string* msg) {
  const auto bad = [&](const std::string& s) {
    *msg = s;
    return false;
  };
  if (m.A.rows() == 0 || m.A.rows() != m.A.cols()) return bad("A must be square and nonempty");
  if (m.E.rows() == 0 || m.E.cols() == 0) return bad("E must be nonempty (n x np)");
  if (m.G.rows() == 0 || m.G.cols() == 0) return bad("G must be nonempty (n x nw)");
  if (m.Cq.rows() == 0 || m.Cq.cols() == 0) return bad("C_q must be nonempty (nq x n)");
  if (m.E.rows() != m.A.rows()) return bad("E rows != A rows");
  if (m.G.rows() != m.A.rows()) return bad("G rows != A rows");
  if (m.Cq.cols() != m.A.rows()) return bad("C_q cols != A rows");
  if (m.D.rows() != m.Cq.rows()) return bad("D rows != C_q rows");
  if (m.D.cols() != m.E.cols()) return bad("D cols != E cols");
  return true;
}

inline bool structure_dims_message(const SystemModel& m, const MultiplierStructure& s,
                                   std::string* msg) {
  const auto bad = [&](const std::string& t) {
    *msg = t;
    return false;
  };
  const int nq = m.nq(), np = m.np();
  if (s.T11.rows() != nq || s.T11.cols() != nq) return bad("T11 must be nq x nq");
  if (s.T12.rows() != nq || s.T12.cols() != np) return bad("T12 must be nq x np");
  if (s.T21.rows() != np || s.T21.cols() != nq) return bad("T21 must be np x nq");
  if (s.T22.rows() != np || s.T22.cols() != np) return bad("T22 must be np x np");
  switch (s.nset.kind) {
    case NSetKind::FixedPair:
    case NSetKind::ScalarScaledPair:
      if (s.nset.X0.rows() != nq || s.nset.X0.cols() != nq) return bad("N-set X must be nq x nq");
      if (s.nset.Y0.rows() != np || s.nset.Y0.cols() != np) return bad("N-set Y must be np x np");
      break;
    case NSetKind::BlockDiagonalPD: {
      int sx = 0, sy = 0;
      for (int b : s.nset.x_blocks) sx += b;
      for (int b : s.nset.y_blocks) sy += b;
      if (sx != nq) return bad("N-set X block sizes must sum to nq");
      if (sy != np) return bad("N-set Y block sizes must sum to np");
      break;
    }
    default:
      break;
  }
  return true;
}

}  // namespace detail

/// Checks every structural invariant of (model, structure): dimensions,
/// finiteness, nonsingularity of T and of Gamma = T21 D + T22, and
/// well-formedness of the multiplier-set parameterization. rank_tol is
/// relative to the largest singular value.
inline ValidationReport validate_model(const SystemModel& model, const MultiplierStructure& s,
                                       double rank_tol = kRankTol) {
  ValidationReport rep;

  std::string msg;
  const bool dims_ok = detail::dims_message(model, &msg);
  rep.add("dimensions", dims_ok, 0.0, dims_ok ? "" : msg);
  if (!dims_ok) return rep;

  const bool finite = model.A.allFinite() && model.E.allFinite() && model.G.allFinite() &&
                      model.Cq.allFinite() && model.D.allFinite();
  rep.add("finite_entries", finite, 0.0, finite ? "" : "non-finite entry in system matrices");

  const bool sdims_ok = detail::structure_dims_message(model, s, &msg);
  rep.add("structure_dimensions", sdims_ok, 0.0, sdims_ok ? "" : msg);
  if (!sdims_ok || !finite) return rep;

  {
    const SingularRange sr = singular_range(s.T());
    const bool ok = sr.min > rank_tol * std::max(sr.max, 1e-300);
    rep.add("T_nonsingular", ok, sr.min,
            ok ? "" : "T singular (sigma_min " + std::to_string(sr.min) + ")");
  }
  {
    const Matrix gamma = s.T21 * model.D + s.T22;
    const SingularRange sr = singular_range(gamma);
    const bool ok = sr.min > rank_tol * std::max(sr.max, 1e-300);
    rep.add("Gamma_nonsingular", ok, sr.min,
            ok ? "" : "Gamma singular (sigma_min " + std::to_string(sr.min) + ")");
  }

  switch (s.nset.kind) {
    case NSetKind::FixedPair: {
      const bool ok = is_pd(s.nset.X0) && is_pd(s.nset.Y0) && sym_error(s.nset.X0) < 1e-10 &&
                      sym_error(s.nset.Y0) < 1e-10;
      rep.add("nset_fixed_pair_pd", ok, 0.0,
              ok ? "" : "FixedPair (X0, Y0) must be symmetric positive definite");
      break;
    }
    case NSetKind::ScalarScaledPair: {
      const bool ok = is_pd(s.nset.X0) && is_pd(s.nset.Y0) && sym_error(s.nset.X0) < 1e-10 &&
                      sym_error(s.nset.Y0) < 1e-10;
      rep.add("nset_scaled_pair_pd", ok, 0.0,
              ok ? "" : "ScalarScaledPair (Xhat, Yhat) must be symmetric positive definite");
      break;
    }
    default:
      break;
  }
  return rep;
}

}  // namespace conebound
