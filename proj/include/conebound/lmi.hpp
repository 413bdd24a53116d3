#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conebound/model.hpp"

namespace conebound {

/// Symmetric matrix stored as its lower block triangle plus block row sizes;
/// dense() mirrors the lower part so the assembled matrix is exactly
/// symmetric by construction.
struct BlockSymmetricMatrix {
  std::vector<int> row_dims;
  std::vector<std::vector<Matrix>> blocks;  // blocks[i][j], j <= i

  explicit BlockSymmetricMatrix(std::vector<int> dims) : row_dims(std::move(dims)) {
    blocks.resize(row_dims.size());
    for (std::size_t i = 0; i < row_dims.size(); ++i) blocks[i].resize(i + 1);
  }

  int dim() const {
    int d = 0;
    for (int r : row_dims) d += r;
    return d;
  }

  int offset(int i) const {
    int o = 0;
    for (int k = 0; k < i; ++k) o += row_dims[k];
    return o;
  }

  Matrix& at(int i, int j) { return blocks[i][j]; }
  const Matrix& at(int i, int j) const { return blocks[i][j]; }

  Matrix dense() const {
    Matrix m = Matrix::Zero(dim(), dim());
    for (std::size_t i = 0; i < row_dims.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const Matrix& b = blocks[i][j];
        if (b.size() == 0) continue;
        m.block(offset(static_cast<int>(i)), offset(static_cast<int>(j)), row_dims[i],
                row_dims[j]) = b;
        if (i != j)
          m.block(offset(static_cast<int>(j)), offset(static_cast<int>(i)), row_dims[j],
                  row_dims[i]) = b.transpose();
      }
    }
    return m;
  }
};

/// The 4x4 block matrix of the ultimate-boundedness inequality, block rows
/// ordered [state, p, q, w]:
///   [ Acl Q + Q Acl' + lambda Q + R   E G^-1 Y   Q Cq' Sigma'   G      ]
///   [ *                               -Y         Y Lambda'      0      ]
///   [ *                               *          -X             0      ]
///   [ *                               *          *              -l I   ]
/// with Acl = A - E Gamma^-1 T21 Cq.
inline BlockSymmetricMatrix assemble_ultimate_lmi(const SystemModel& model,
                                                  const MultiplierStructure& s,
                                                  const DerivedMaps& maps, const Matrix& Q,
                                                  const Matrix& X, const Matrix& Y,
                                                  double lambda, const Matrix& R) {
  if (!(lambda > 0.0)) throw Error("assemble_ultimate_lmi: lambda must be > 0");
  const int n = model.n(), np = model.np(), nq = model.nq(), nw = model.nw();
  if (Q.rows() != n || Q.cols() != n) throw Error("assemble_ultimate_lmi: Q must be n x n");
  if (R.rows() != n || R.cols() != n) throw Error("assemble_ultimate_lmi: R must be n x n");
  if (X.rows() != nq || X.cols() != nq) throw Error("assemble_ultimate_lmi: X must be nq x nq");
  if (Y.rows() != np || Y.cols() != np) throw Error("assemble_ultimate_lmi: Y must be np x np");

  const Matrix Qs = symmetrize(Q), Rs = symmetrize(R), Xs = symmetrize(X), Ys = symmetrize(Y);
  // E Gamma^-1 via Gamma' z = E'
  const Matrix EGi =
      solve_nonsingular(maps.Gamma.transpose(), model.E.transpose(), "assemble: Gamma")
          .transpose();
  const Matrix Acl = model.A - EGi * s.T21 * model.Cq;

  BlockSymmetricMatrix out({n, np, nq, nw});
  const Matrix AQ = Acl * Qs;
  out.at(0, 0) = AQ + AQ.transpose() + lambda * Qs + Rs;
  out.at(1, 0) = Ys * EGi.transpose();          // mirror of E Gamma^-1 Y
  out.at(1, 1) = -Ys;
  out.at(2, 0) = maps.Sigma * model.Cq * Qs;    // mirror of Q Cq' Sigma'
  out.at(2, 1) = maps.Lambda * Ys;              // mirror of Y Lambda'
  out.at(2, 2) = -Xs;
  out.at(3, 0) = model.G.transpose();
  out.at(3, 1) = Matrix::Zero(nw, np);
  out.at(3, 2) = Matrix::Zero(nw, nq);
  out.at(3, 3) = -lambda * Matrix::Identity(nw, nw);
  return out;
}

/// The 3x3 quadratic-stability form: the ultimate-boundedness matrix with the
/// disturbance row removed and no lambda Q term.
inline BlockSymmetricMatrix assemble_stability_lmi(const SystemModel& model,
                                                   const MultiplierStructure& s,
                                                   const DerivedMaps& maps, const Matrix& Q,
                                                   const Matrix& X, const Matrix& Y,
                                                   const Matrix& R) {
  const int n = model.n(), np = model.np(), nq = model.nq();
  if (Q.rows() != n || Q.cols() != n) throw Error("assemble_stability_lmi: Q must be n x n");
  if (R.rows() != n || R.cols() != n) throw Error("assemble_stability_lmi: R must be n x n");
  if (X.rows() != nq || X.cols() != nq) throw Error("assemble_stability_lmi: X must be nq x nq");
  if (Y.rows() != np || Y.cols() != np) throw Error("assemble_stability_lmi: Y must be np x np");

  const Matrix Qs = symmetrize(Q), Rs = symmetrize(R), Xs = symmetrize(X), Ys = symmetrize(Y);
  const Matrix EGi =
      solve_nonsingular(maps.Gamma.transpose(), model.E.transpose(), "assemble: Gamma")
          .transpose();
  const Matrix Acl = model.A - EGi * s.T21 * model.Cq;

  BlockSymmetricMatrix out({n, np, nq});
  const Matrix AQ = Acl * Qs;
  out.at(0, 0) = AQ + AQ.transpose() + Rs;
  out.at(1, 0) = Ys * EGi.transpose();
  out.at(1, 1) = -Ys;
  out.at(2, 0) = maps.Sigma * model.Cq * Qs;
  out.at(2, 1) = maps.Lambda * Ys;
  out.at(2, 2) = -Xs;
  return out;
}

/// U' M U for nonsingular U; preserves inertia (Sylvester).
inline Matrix congruence(const Matrix& m, const Matrix& u, double rank_tol = kRankTol) {
  if (m.rows() != m.cols()) throw Error("congruence: matrix must be square");
  if (u.rows() != m.rows() || u.cols() != u.rows())
    throw Error("congruence: U must be square and match the matrix dimension");
  const SingularRange sr = singular_range(u);
  if (sr.min <= rank_tol * std::max(sr.max, 1e-300))
    throw Error("congruence: U is singular (sigma_min " + std::to_string(sr.min) + ")");
  return symmetrize(u.transpose() * symmetrize(m) * u);
}

/// Schur complement of a dense symmetric matrix with respect to the
/// rows/columns [off, off+len); the pivot block must be negative definite.
inline Matrix schur_complement_nd(const Matrix& m, int off, int len,
                                  double rank_tol = kRankTol) {
  const int d = static_cast<int>(m.rows());
  if (off < 0 || len <= 0 || off + len > d) throw Error("schur_complement: pivot out of range");
  const Matrix piv = symmetrize(m.block(off, off, len, len));
  const double scale = std::max(1.0, piv.cwiseAbs().maxCoeff());
  if (max_eig_sym(piv) >= -rank_tol * scale)
    throw Error("schur_complement: pivot block not negative definite");

  std::vector<int> keep;
  keep.reserve(d - len);
  for (int i = 0; i < d; ++i)
    if (i < off || i >= off + len) keep.push_back(i);
  const int r = static_cast<int>(keep.size());
  Matrix mrr(r, r), mrp(r, len);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) mrr(i, j) = m(keep[i], keep[j]);
    for (int j = 0; j < len; ++j) mrp(i, j) = m(keep[i], off + j);
  }
  Eigen::LDLT<Matrix> ldlt(piv);
  return symmetrize(mrr - mrp * ldlt.solve(mrp.transpose()));
}

/// Schur complement with respect to one diagonal block of a block matrix.
inline Matrix schur_reduce(const BlockSymmetricMatrix& m, int pivot_block,
                           double rank_tol = kRankTol) {
  if (pivot_block < 0 || pivot_block >= static_cast<int>(m.row_dims.size()))
    throw Error("schur_reduce: pivot block index out of range");
  return schur_complement_nd(m.dense(), m.offset(pivot_block), m.row_dims[pivot_block],
                             rank_tol);
}

// ---------------------------------------------------------------------------
// Affine decomposition for the semidefinite solver
// ---------------------------------------------------------------------------

/// One constraint of the canonical problem: require c0 + sum_k y[var_idx[k]]
/// * coeff[k]  to be positive semidefinite. `margin` marks constraints that
/// take part in the strict-feasibility margin (everything stated by the
/// analysis conditions, as opposed to internal bounding boxes).
struct ConstraintBlock {
  std::string name;
  Matrix c0;
  std::vector<int> var_idx;
  std::vector<Matrix> coeff;
  bool margin = true;

  int dim() const { return static_cast<int>(c0.rows()); }

  Matrix eval(const Vector& y) const {
    Matrix m = c0;
    for (std::size_t k = 0; k < var_idx.size(); ++k) m += y(var_idx[k]) * coeff[k];
    return m;
  }
};

enum class RMode { Fixed, Variable };

struct BuildOptions {
  RMode r_mode = RMode::Fixed;
  double r_fixed_scale = -1.0;  // <0: auto = 1e-6 * max(1, ||A||)
  double eps_pd = -1.0;         // floor for variable R; <0: auto = r scale
  double box_bound = 1e4;       // |y_i| <= box_bound keeps feasible sets bounded
};

struct VariableLayout {
  int n = 0, nq = 0, np = 0;
  bool r_variable = false;
  NSetKind nkind = NSetKind::FreePD;
  int q_off = 0, q_cnt = 0;
  int r_off = 0, r_cnt = 0;
  int n_off = 0, n_cnt = 0;
  int total = 0;
};

struct EvalPoint {
  Matrix Q, X, Y, R;
};

/// Feasibility problem in canonical affine form: find y with every block PSD
/// (shifted by the strictness margin inside the solver). Affine in y by
/// construction for the fixed lambda recorded here.
struct AffineLmiProblem {
  VariableLayout layout;
  std::optional<double> lambda;  // engaged: ultimate form; empty: stability form
  NSet nset;
  Matrix R_fixed;
  std::vector<ConstraintBlock> blocks;
  Vector y0;          // strictly interior suggestion for the PD blocks
  double box_bound = 1e4;
  double scale = 1.0;  // data magnitude, used for default margins

  EvalPoint materialize(const Vector& y) const {
    EvalPoint p;
    p.Q = smat(y.segment(layout.q_off, layout.q_cnt), layout.n);
    p.R = layout.r_variable ? smat(y.segment(layout.r_off, layout.r_cnt), layout.n) : R_fixed;
    const int nq = layout.nq, np = layout.np;
    switch (layout.nkind) {
      case NSetKind::FixedPair:
        p.X = nset.X0;
        p.Y = nset.Y0;
        break;
      case NSetKind::ScalarScaledPair: {
        const double tau = y(layout.n_off);
        p.X = tau * nset.X0;
        p.Y = tau * nset.Y0;
        break;
      }
      case NSetKind::DiagonalPD: {
        p.X = Matrix::Zero(nq, nq);
        p.Y = Matrix::Zero(np, np);
        for (int i = 0; i < nq; ++i) p.X(i, i) = y(layout.n_off + i);
        for (int i = 0; i < np; ++i) p.Y(i, i) = y(layout.n_off + nq + i);
        break;
      }
      case NSetKind::BlockDiagonalPD: {
        p.X = Matrix::Zero(nq, nq);
        p.Y = Matrix::Zero(np, np);
        int at = layout.n_off, pos = 0;
        for (int b : nset.x_blocks) {
          p.X.block(pos, pos, b, b) = smat(y.segment(at, svec_size(b)), b);
          at += svec_size(b);
          pos += b;
        }
        pos = 0;
        for (int b : nset.y_blocks) {
          p.Y.block(pos, pos, b, b) = smat(y.segment(at, svec_size(b)), b);
          at += svec_size(b);
          pos += b;
        }
        break;
      }
      case NSetKind::FreePD:
        p.X = smat(y.segment(layout.n_off, svec_size(nq)), nq);
        p.Y = smat(y.segment(layout.n_off + svec_size(nq), svec_size(np)), np);
        break;
    }
    return p;
  }

  const ConstraintBlock* find_block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return &b;
    return nullptr;
  }
};

namespace detail {

inline int nset_param_count(const NSet& nset, int nq, int np) {
  switch (nset.kind) {
    case NSetKind::FixedPair: return 0;
    case NSetKind::ScalarScaledPair: return 1;
    case NSetKind::DiagonalPD: return nq + np;
    case NSetKind::BlockDiagonalPD: {
      int c = 0;
      for (int b : nset.x_blocks) c += svec_size(b);
      for (int b : nset.y_blocks) c += svec_size(b);
      return c;
    }
    case NSetKind::FreePD: return svec_size(nq) + svec_size(np);
  }
  throw Error("unsupported N-set variant");
}

// Probes an affine matrix-valued map at unit vectors to recover its constant
// part and per-variable coefficients exactly.
inline ConstraintBlock probe_affine_block(const std::string& name, int nvar,
                                          const std::vector<int>& candidates,
                                          const std::function<Matrix(const Vector&)>& fn,
                                          bool margin) {
  ConstraintBlock blk;
  blk.name = name;
  blk.margin = margin;
  const Vector zero = Vector::Zero(nvar);
  blk.c0 = fn(zero);
  for (int i : candidates) {
    Vector e = zero;
    e(i) = 1.0;
    Matrix ci = fn(e) - blk.c0;
    if (!ci.isZero(0.0)) {
      blk.var_idx.push_back(i);
      blk.coeff.push_back(std::move(ci));
    }
  }
  return blk;
}

}  // namespace detail

/// Maps the analysis inequality (ultimate form when lambda is engaged,
/// stability form otherwise) plus the definiteness and multiplier-set
/// constraints into canonical affine form. Evaluating the resulting blocks at
/// a packed point reproduces the assemblers exactly.
inline AffineLmiProblem build_affine_problem(const SystemModel& model,
                                             const MultiplierStructure& s,
                                             std::optional<double> lambda,
                                             const BuildOptions& opt = {}) {
  if (lambda && !(*lambda > 0.0)) throw Error("build_affine_problem: lambda must be > 0");
  {
    const ValidationReport v = validate_model(model, s);
    if (!v.pass) {
      std::string why;
      for (const auto& c : v.checks)
        if (!c.pass) why += (why.empty() ? "" : "; ") + c.name + (c.detail.empty() ? "" : ": " + c.detail);
      throw Error("build_affine_problem: invalid model/structure (" + why + ")");
    }
  }

  AffineLmiProblem prob;
  prob.lambda = lambda;
  prob.nset = s.nset;
  prob.box_bound = opt.box_bound;

  VariableLayout& L = prob.layout;
  L.n = model.n();
  L.nq = model.nq();
  L.np = model.np();
  L.nkind = s.nset.kind;
  L.r_variable = (opt.r_mode == RMode::Variable);
  L.q_off = 0;
  L.q_cnt = svec_size(L.n);
  int at = L.q_cnt;
  if (L.r_variable) {
    L.r_off = at;
    L.r_cnt = svec_size(L.n);
    at += L.r_cnt;
  }
  L.n_off = at;
  L.n_cnt = detail::nset_param_count(s.nset, L.nq, L.np);
  at += L.n_cnt;
  L.total = at;

  const double a_norm = singular_range(model.A).max;
  const double r_scale =
      opt.r_fixed_scale > 0.0 ? opt.r_fixed_scale : 1e-6 * std::max(1.0, a_norm);
  const double eps_pd = opt.eps_pd > 0.0 ? opt.eps_pd : r_scale;
  prob.R_fixed = r_scale * Matrix::Identity(L.n, L.n);

  prob.scale = std::max({1.0, a_norm, singular_range(model.E).max, singular_range(model.G).max,
                         singular_range(model.Cq).max, singular_range(model.D).max,
                         lambda ? *lambda : 0.0});

  const DerivedMaps maps = derived_maps(s, model.D);

  std::vector<int> all(L.total);
  for (int i = 0; i < L.total; ++i) all[i] = i;
  std::vector<int> q_vars(L.q_cnt);
  for (int i = 0; i < L.q_cnt; ++i) q_vars[i] = L.q_off + i;
  std::vector<int> r_vars(L.r_cnt);
  for (int i = 0; i < L.r_cnt; ++i) r_vars[i] = L.r_off + i;
  std::vector<int> n_vars(L.n_cnt);
  for (int i = 0; i < L.n_cnt; ++i) n_vars[i] = L.n_off + i;

  // main inequality, negated so the solver sees a PSD requirement
  prob.blocks.push_back(detail::probe_affine_block(
      "lmi", L.total, all,
      [&](const Vector& y) -> Matrix {
        const EvalPoint p = prob.materialize(y);
        const BlockSymmetricMatrix b =
            lambda ? assemble_ultimate_lmi(model, s, maps, p.Q, p.X, p.Y, *lambda, p.R)
                   : assemble_stability_lmi(model, s, maps, p.Q, p.X, p.Y, p.R);
        return Matrix(-b.dense());
      },
      true));

  prob.blocks.push_back(detail::probe_affine_block(
      "Q_pd", L.total, q_vars,
      [&](const Vector& y) { return prob.materialize(y).Q; }, true));

  if (L.r_variable) {
    prob.blocks.push_back(detail::probe_affine_block(
        "R_floor", L.total, r_vars,
        [&](const Vector& y) -> Matrix {
          return prob.materialize(y).R - eps_pd * Matrix::Identity(L.n, L.n);
        },
        true));
  }

  switch (s.nset.kind) {
    case NSetKind::FixedPair:
      // constant pair; definiteness was validated above, nothing variable
      break;
    case NSetKind::ScalarScaledPair:
      prob.blocks.push_back(detail::probe_affine_block(
          "tau_positive", L.total, n_vars,
          [&](const Vector& y) { return Matrix::Constant(1, 1, y(L.n_off)); }, true));
      break;
    default:
      prob.blocks.push_back(detail::probe_affine_block(
          "X_pd", L.total, n_vars, [&](const Vector& y) { return prob.materialize(y).X; },
          true));
      prob.blocks.push_back(detail::probe_affine_block(
          "Y_pd", L.total, n_vars, [&](const Vector& y) { return prob.materialize(y).Y; },
          true));
      break;
  }

  // interior suggestion: identity-scale Q, unit multipliers, R above floor
  prob.y0 = Vector::Zero(L.total);
  prob.y0.segment(L.q_off, L.q_cnt) = svec(Matrix::Identity(L.n, L.n));
  if (L.r_variable)
    prob.y0.segment(L.r_off, L.r_cnt) = svec(2.0 * eps_pd * Matrix::Identity(L.n, L.n));
  switch (s.nset.kind) {
    case NSetKind::FixedPair:
      break;
    case NSetKind::ScalarScaledPair:
      prob.y0(L.n_off) = 1.0;
      break;
    case NSetKind::DiagonalPD:
      prob.y0.segment(L.n_off, L.n_cnt).setOnes();
      break;
    case NSetKind::BlockDiagonalPD: {
      int a2 = L.n_off;
      for (int b : s.nset.x_blocks) {
        prob.y0.segment(a2, svec_size(b)) = svec(Matrix::Identity(b, b));
        a2 += svec_size(b);
      }
      for (int b : s.nset.y_blocks) {
        prob.y0.segment(a2, svec_size(b)) = svec(Matrix::Identity(b, b));
        a2 += svec_size(b);
      }
      break;
    }
    case NSetKind::FreePD:
      prob.y0.segment(L.n_off, svec_size(L.nq)) = svec(Matrix::Identity(L.nq, L.nq));
      prob.y0.segment(L.n_off + svec_size(L.nq), svec_size(L.np)) =
          svec(Matrix::Identity(L.np, L.np));
      break;
  }
  return prob;
}

}  // namespace conebound
