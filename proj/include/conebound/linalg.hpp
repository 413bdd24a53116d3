#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace conebound {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Relative threshold on sigma_min/sigma_max below which a matrix is treated
// as singular.
inline constexpr double kRankTol = 1e-9;

// Condition-number ceiling for inversions; beyond this we refuse rather than
// return garbage.
inline constexpr double kCondLimit = 1e12;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double sym_error(const Matrix& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline Vector eigvals_sym(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("symmetric eigensolver failed");
  return es.eigenvalues();
}

inline double max_eig_sym(const Matrix& m) { return eigvals_sym(m).maxCoeff(); }
inline double min_eig_sym(const Matrix& m) { return eigvals_sym(m).minCoeff(); }

struct SingularRange {
  double min = 0.0;
  double max = 0.0;
};

inline SingularRange singular_range(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return {0.0, 0.0};
  return {s(s.size() - 1), s(0)};
}

inline bool is_nonsingular(const Matrix& m, double rank_tol = kRankTol) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  const SingularRange sr = singular_range(m);
  return sr.min > rank_tol * std::max(sr.max, 1e-300);
}

// Cholesky-based positive definiteness test of the symmetric part.
inline bool is_pd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  Eigen::LLT<Matrix> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

struct Inertia {
  int negative = 0;
  int zero = 0;
  int positive = 0;
};

inline Inertia inertia(const Matrix& m, double tol) {
  Inertia out;
  const Vector ev = eigvals_sym(m);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > tol)
      ++out.positive;
    else if (ev(i) < -tol)
      ++out.negative;
    else
      ++out.zero;
  }
  return out;
}

// Inverse of a symmetric positive definite matrix with a condition guard.
inline Matrix pd_inverse(const Matrix& m, const std::string& what,
                         double cond_limit = kCondLimit) {
  if (m.rows() != m.cols()) throw Error(what + ": not square");
  const Vector ev = eigvals_sym(m);
  const double lo = ev.minCoeff(), hi = ev.maxCoeff();
  if (lo <= 0.0) throw Error(what + ": not positive definite (min eig " + std::to_string(lo) + ")");
  if (hi / lo > cond_limit)
    throw Error(what + ": condition number " + std::to_string(hi / lo) + " exceeds limit");
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) throw Error(what + ": Cholesky failed");
  return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

// Solves m * x = rhs for general nonsingular m, refusing near-singular input.
inline Matrix solve_nonsingular(const Matrix& m, const Matrix& rhs, const std::string& what,
                                double rank_tol = kRankTol) {
  const SingularRange sr = singular_range(m);
  if (sr.min <= rank_tol * std::max(sr.max, 1e-300))
    throw Error(what + ": singular (sigma_min " + std::to_string(sr.min) + ")");
  if (sr.max / sr.min > kCondLimit)
    throw Error(what + ": condition number exceeds limit");
  return m.fullPivLu().solve(rhs);
}

// Lower-triangle packing of a symmetric matrix, column by column.
inline int svec_size(int n) { return n * (n + 1) / 2; }

inline Vector svec(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  Vector v(svec_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v(k++) = m(i, j);
  return v;
}

inline Matrix smat(const Vector& v, int n) {
  Matrix m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  return m;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic, portable generator; all sampling in the toolkit goes through
// explicitly seeded instances of this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // warm up so that small seeds decorrelate
    splitmix64(state_);
    splitmix64(state_);
  }

  static Rng derived(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master;
    splitmix64(s);
    s ^= 0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL;
    return Rng(s);
  }

  std::uint64_t next() { return splitmix64(state_); }

  double uniform() {  // [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = std::max(uniform(), 0x1.0p-53);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Vector normal_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Vector unit_vector(int n) {
    Vector v = normal_vector(n);
    const double nn = v.norm();
    if (nn < 1e-300) {
      v.setZero();
      v(0) = 1.0;
      return v;
    }
    return v / nn;
  }

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace conebound
