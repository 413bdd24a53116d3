// Test-side reference computations. Everything here is deliberately written
// from the block formulas directly (no calls into the library's assembly or
// solver paths) so tests can compare two independent routes.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "conebound/model.hpp"

namespace oracle {

using conebound::Matrix;
using conebound::Vector;

inline double max_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Scalar norm-bounded stability value after Schur elimination of the p and q
// rows: 2 a Q + R + e^2 Y + c^2 Q^2 / X  (feasible candidate iff <= 0).
inline double scalar_stability_schur(double a, double e, double c, double q, double r,
                                     double x, double y) {
  return 2.0 * a * q + r + e * e * y + c * c * q * q / x;
}

// Scalar ultimate-boundedness value with the disturbance row eliminated as
// well: adds lambda Q and g^2 / lambda.
inline double scalar_ultimate_schur(double a, double e, double c, double g, double q,
                                    double r, double x, double y, double lambda) {
  return (2.0 * a + lambda) * q + r + e * e * y + c * c * q * q / x + g * g / lambda;
}

// Hand-assembled ultimate-boundedness block matrix for the norm-bounded
// class (T = I, D = 0, so Gamma = I, Lambda = 0, Sigma = I).
inline Matrix norm_bounded_ultimate_lmi(const Matrix& A, const Matrix& E, const Matrix& G,
                                        const Matrix& Cq, const Matrix& Q, const Matrix& X,
                                        const Matrix& Y, double lambda, const Matrix& R) {
  const int n = static_cast<int>(A.rows());
  const int np = static_cast<int>(E.cols());
  const int nq = static_cast<int>(Cq.rows());
  const int nw = static_cast<int>(G.cols());
  Matrix m = Matrix::Zero(n + np + nq + nw, n + np + nq + nw);
  m.topLeftCorner(n, n) = A * Q + Q * A.transpose() + lambda * Q + R;
  m.block(0, n, n, np) = E * Y;
  m.block(n, 0, np, n) = (E * Y).transpose();
  m.block(0, n + np, n, nq) = Q * Cq.transpose();
  m.block(n + np, 0, nq, n) = Cq * Q;
  m.block(0, n + np + nq, n, nw) = G;
  m.block(n + np + nq, 0, nw, n) = G.transpose();
  m.block(n, n, np, np) = -Y;
  m.block(n + np, n + np, nq, nq) = -X;
  m.block(n + np + nq, n + np + nq, nw, nw) = -lambda * Matrix::Identity(nw, nw);
  return m;
}

inline Matrix norm_bounded_stability_lmi(const Matrix& A, const Matrix& E, const Matrix& Cq,
                                         const Matrix& Q, const Matrix& X, const Matrix& Y,
                                         const Matrix& R) {
  const int n = static_cast<int>(A.rows());
  const int np = static_cast<int>(E.cols());
  const int nq = static_cast<int>(Cq.rows());
  Matrix m = Matrix::Zero(n + np + nq, n + np + nq);
  m.topLeftCorner(n, n) = A * Q + Q * A.transpose() + R;
  m.block(0, n, n, np) = E * Y;
  m.block(n, 0, np, n) = (E * Y).transpose();
  m.block(0, n + np, n, nq) = Q * Cq.transpose();
  m.block(n + np, 0, nq, n) = Cq * Q;
  m.block(n, n, np, np) = -Y;
  m.block(n + np, n + np, nq, nq) = -X;
  return m;
}

// H-infinity norm of Cq (sI - A)^-1 E by dense frequency sweep; used to pick
// gains with known feasibility headroom when generating random cases.
inline double hinf_norm(const Matrix& A, const Matrix& E, const Matrix& Cq) {
  using CMatrix = Eigen::MatrixXcd;
  const int n = static_cast<int>(A.rows());
  double best = 0.0;
  std::vector<double> omegas = {0.0};
  for (int i = 0; i <= 240; ++i) omegas.push_back(std::pow(10.0, -3.0 + 6.0 * i / 240.0));
  for (double w : omegas) {
    CMatrix s = std::complex<double>(0.0, w) * CMatrix::Identity(n, n) - A.cast<std::complex<double>>();
    const CMatrix h = Cq.cast<std::complex<double>>() * s.lu().solve(E.cast<std::complex<double>>());
    Eigen::JacobiSVD<CMatrix> svd(h);
    best = std::max(best, svd.singularValues()(0));
  }
  return best;
}

// Brute-force feasibility probe for a 2-state norm-bounded ultimate
// boundedness problem: multi-resolution grid over the three entries of Q
// (scale, off-diagonal ratio, diagonal ratio), the multiplier scaling tau and
// lambda. Returns the best margin -max_eig found (> 0 means feasible).
inline double two_state_grid_margin(const Matrix& A, const Matrix& E, const Matrix& G,
                                    const Matrix& Cq, double gamma, double r_scale) {
  const auto margin_at = [&](double qs, double c, double dr, double tau,
                             double lambda) -> double {
    Matrix Q(2, 2);
    const double q11 = qs, q22 = qs * dr;
    const double q12 = c * std::sqrt(q11 * q22);
    Q << q11, q12, q12, q22;
    if (q11 <= 0.0 || q22 <= 0.0 || q11 * q22 - q12 * q12 <= 0.0) return -1e30;
    const Matrix X = (tau / (gamma * gamma)) * Matrix::Identity(Cq.rows(), Cq.rows());
    const Matrix Y = tau * Matrix::Identity(E.cols(), E.cols());
    const Matrix R = r_scale * Matrix::Identity(2, 2);
    return -max_eig(norm_bounded_ultimate_lmi(A, E, G, Cq, Q, X, Y, lambda, R));
  };

  struct Range {
    double lo, hi;
    bool log;
  };
  std::vector<Range> ranges = {{1e-2, 1e2, true},   // Q scale
                               {-0.95, 0.95, false},  // off-diagonal ratio
                               {1e-1, 1e1, true},   // diagonal ratio
                               {1e-2, 1e2, true},   // tau
                               {1e-2, 1e2, true}};  // lambda
  const int pts = 7;
  std::array<double, 5> best{};
  double best_margin = -1e30;
  for (int round = 0; round < 4; ++round) {
    std::array<std::vector<double>, 5> axes;
    for (int d = 0; d < 5; ++d) {
      axes[d].resize(pts);
      for (int i = 0; i < pts; ++i) {
        const double f = static_cast<double>(i) / (pts - 1);
        axes[d][i] = ranges[d].log
                         ? ranges[d].lo * std::pow(ranges[d].hi / ranges[d].lo, f)
                         : ranges[d].lo + f * (ranges[d].hi - ranges[d].lo);
      }
    }
    for (double qs : axes[0])
      for (double c : axes[1])
        for (double dr : axes[2])
          for (double tau : axes[3])
            for (double lambda : axes[4]) {
              const double m = margin_at(qs, c, dr, tau, lambda);
              if (m > best_margin) {
                best_margin = m;
                best = {qs, c, dr, tau, lambda};
              }
            }
    // zoom in around the best point
    for (int d = 0; d < 5; ++d) {
      if (ranges[d].log) {
        const double span = std::pow(ranges[d].hi / ranges[d].lo, 0.25);
        ranges[d].lo = best[d] / span;
        ranges[d].hi = best[d] * span;
      } else {
        const double span = 0.25 * (ranges[d].hi - ranges[d].lo);
        ranges[d].lo = std::max(-0.99, best[d] - span);
        ranges[d].hi = std::min(0.99, best[d] + span);
      }
    }
  }
  return best_margin;
}

// Bisection for the boundary of a monotone feasibility predicate on (0, hi].
inline double bisect_boundary(const std::function<bool(double)>& feasible, double lo, double hi,
                              double tol) {
  if (!feasible(lo)) return lo;
  if (feasible(hi)) return hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
