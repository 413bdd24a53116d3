#include <catch2/catch_amalgamated.hpp>

#include "conebound/lmi.hpp"
#include "oracles.hpp"

using namespace conebound;

namespace {

SystemModel scalar_model(double a = -1, double e = 1, double g = 1, double c = 1,
                         double d = 0) {
  SystemModel m;
  m.A = Matrix::Constant(1, 1, a);
  m.E = Matrix::Constant(1, 1, e);
  m.G = Matrix::Constant(1, 1, g);
  m.Cq = Matrix::Constant(1, 1, c);
  m.D = Matrix::Constant(1, 1, d);
  return m;
}

MultiplierStructure identity_structure(int nq = 1, int np = 1) {
  MultiplierStructure s;
  s.T11 = Matrix::Identity(nq, nq);
  s.T12 = Matrix::Zero(nq, np);
  s.T21 = Matrix::Zero(np, nq);
  s.T22 = Matrix::Identity(np, np);
  s.nset = NSet::free_pd();
  return s;
}

Matrix c1(double v) { return Matrix::Constant(1, 1, v); }

SystemModel random_model(Rng& rng, int n, int np, int nq, int nw) {
  SystemModel m;
  m.A = Matrix::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  m.E = Matrix::NullaryExpr(n, np, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  m.G = Matrix::NullaryExpr(n, nw, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  m.Cq = Matrix::NullaryExpr(nq, n, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  m.D = Matrix::Zero(nq, np);
  return m;
}

Matrix random_sym(Rng& rng, int n) {
  Matrix a = Matrix::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  return Matrix(0.5 * (a + a.transpose()));
}

}  // namespace

TEST_CASE("assemble_ultimate_lmi: scalar instance matches the hand evaluation") {
  const auto model = scalar_model();
  const auto s = identity_structure();
  const auto maps = derived_maps(s, model.D);
  const auto b = assemble_ultimate_lmi(model, s, maps, c1(1), c1(1), c1(1), 1.0, c1(0.1));
  Matrix expect(4, 4);
  expect << -0.9, 1, 1, 1, 1, -1, 0, 0, 1, 0, -1, 0, 1, 0, 0, -1;
  REQUIRE((b.dense() - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("assemble_ultimate_lmi: zero E and G produce zero coupling blocks") {
  const auto model = scalar_model(-1, 0, 0);
  const auto s = identity_structure();
  const auto maps = derived_maps(s, model.D);
  const auto b = assemble_ultimate_lmi(model, s, maps, c1(2), c1(1), c1(3), 0.7, c1(0.1));
  const Matrix m = b.dense();
  REQUIRE(m(0, 1) == 0.0);  // E Gamma^-1 Y
  REQUIRE(m(0, 3) == 0.0);  // G
}

TEST_CASE("assembled matrices are exactly symmetric") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 3);
    const auto model = random_model(rng, n, 2, 2, 1);
    const auto s = identity_structure(2, 2);
    const auto maps = derived_maps(s, model.D);
    const Matrix Q = random_sym(rng, n), R = random_sym(rng, n);
    const Matrix X = random_sym(rng, 2), Y = random_sym(rng, 2);
    const Matrix m = assemble_ultimate_lmi(model, s, maps, Q, X, Y, 0.3, R).dense();
    REQUIRE((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Matrix m3 = assemble_stability_lmi(model, s, maps, Q, X, Y, R).dense();
    REQUIRE((m3 - m3.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("assemble_stability_lmi: scalar instance and Schur reduction") {
  const auto model = scalar_model();
  const auto s = identity_structure();
  const auto maps = derived_maps(s, model.D);
  const auto b = assemble_stability_lmi(model, s, maps, c1(1), c1(1), c1(1), c1(0.1));
  Matrix expect(3, 3);
  expect << -1.9, 1, 1, 1, -1, 0, 1, 0, -1;
  REQUIRE((b.dense() - expect).cwiseAbs().maxCoeff() < 1e-15);

  // eliminating the p and q rows leaves -1.9 + 1 + 1 = 0.1 > 0: infeasible candidate
  const Matrix step1 = schur_reduce(b, 2);
  const Matrix step2 = schur_complement_nd(step1, 1, 1);
  REQUIRE(step2(0, 0) == Catch::Approx(0.1));
}

TEST_CASE("assemble_stability_lmi: feasible scalar instance from the multiplier ray") {
  // gamma = 0.5 norm bound: X^-1 = tau gamma^2, Y^-1 = tau with tau = 2
  const auto model = scalar_model();
  const auto s = identity_structure();
  const auto maps = derived_maps(s, model.D);
  const double tau = 2.0, gamma = 0.5;
  const Matrix X = c1(1.0 / (tau * gamma * gamma));
  const Matrix Y = c1(1.0 / tau);
  const auto b = assemble_stability_lmi(model, s, maps, c1(1), X, Y, c1(0.1));
  const Matrix reduced = schur_complement_nd(schur_reduce(b, 2), 1, 1);
  REQUIRE(reduced(0, 0) == Catch::Approx(-0.9));
  REQUIRE(reduced(0, 0) ==
          Catch::Approx(oracle::scalar_stability_schur(-1, 1, 1, 1, 0.1, X(0, 0), Y(0, 0))));
}

TEST_CASE("assemble_ultimate_lmi rejects bad lambda") {
  const auto model = scalar_model();
  const auto s = identity_structure();
  const auto maps = derived_maps(s, model.D);
  REQUIRE_THROWS_AS(assemble_ultimate_lmi(model, s, maps, c1(1), c1(1), c1(1), 0.0, c1(0.1)),
                    Error);
  REQUIRE_THROWS_AS(assemble_ultimate_lmi(model, s, maps, c1(1), c1(1), c1(1), -1.0, c1(0.1)),
                    Error);
}

TEST_CASE("congruence: identity, diagonal case, and inertia preservation") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -1.0;
  REQUIRE((congruence(d, Matrix::Identity(2, 2)) - d).cwiseAbs().maxCoeff() == 0.0);

  Matrix u = Matrix::Zero(2, 2);
  u(0, 0) = 2.0;
  u(1, 1) = 3.0;
  const Matrix c = congruence(d, u);
  REQUIRE(c(0, 0) == Catch::Approx(4.0));
  REQUIRE(c(1, 1) == Catch::Approx(-9.0));

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 4);
    const Matrix m = random_sym(rng, n);
    Matrix uu;
    do {
      uu = Matrix::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    } while (!is_nonsingular(uu, 1e-6));
    const Matrix out = congruence(m, uu);
    const double tol = 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff());
    const Inertia a = inertia(m, tol);
    const Inertia b = inertia(out, tol * singular_range(uu).max * singular_range(uu).max);
    REQUIRE(a.positive == b.positive);
    REQUIRE(a.negative == b.negative);
  }
}

TEST_CASE("congruence: singular U throws") {
  REQUIRE_THROWS_AS(congruence(Matrix::Identity(2, 2), Matrix::Zero(2, 2)), Error);
}

TEST_CASE("schur_complement: scalar formula and block-diagonal identity") {
  Matrix m(2, 2);
  m << -0.9, 1, 1, -1;
  const Matrix r = schur_complement_nd(m, 1, 1);
  REQUIRE(r(0, 0) == Catch::Approx(0.1));

  // zero coupling: complement equals the retained diagonal block
  Matrix bd = Matrix::Zero(3, 3);
  bd(0, 0) = -2.0;
  bd(1, 1) = -3.0;
  bd(2, 2) = -4.0;
  const Matrix kept = schur_complement_nd(bd, 2, 1);
  REQUIRE(kept.rows() == 2);
  REQUIRE(kept(0, 0) == Catch::Approx(-2.0));
  REQUIRE(kept(1, 1) == Catch::Approx(-3.0));
  REQUIRE(kept(0, 1) == Catch::Approx(0.0));
}

TEST_CASE("schur_complement: NSD input with ND pivot stays NSD") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a = Matrix::NullaryExpr(4, 4, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    Matrix nsd = -(a * a.transpose()) - 0.1 * Matrix::Identity(4, 4);
    const Matrix out = schur_complement_nd(nsd, 2, 2);
    REQUIRE(oracle::max_eig(out) <= 1e-10);
  }
}

TEST_CASE("schur_complement: pivot must be negative definite") {
  Matrix m = Matrix::Identity(3, 3);
  REQUIRE_THROWS_AS(schur_complement_nd(m, 1, 1), Error);
}

TEST_CASE("build_affine_problem: variable counts per multiplier-set variant") {
  const auto model = scalar_model();
  BuildOptions opt;
  opt.r_mode = RMode::Variable;

  auto fixed = identity_structure();
  fixed.nset = NSet::fixed_pair(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  REQUIRE(build_affine_problem(model, fixed, std::nullopt, opt).layout.total == 2);  // Q, R

  auto scaled = identity_structure();
  scaled.nset = NSet::scalar_scaled_pair(Matrix::Constant(1, 1, 4.0), Matrix::Identity(1, 1));
  REQUIRE(build_affine_problem(model, scaled, std::nullopt, opt).layout.total == 3);  // Q, R, tau
}

TEST_CASE("build_affine_problem: affine form reproduces the assembler") {
  Rng rng(23);
  const auto model = [&] {
    auto m = random_model(rng, 3, 2, 2, 1);
    return m;
  }();
  auto s = identity_structure(2, 2);
  s.nset = NSet::free_pd();
  BuildOptions opt;
  opt.r_mode = RMode::Variable;
  const double lambda = 0.8;
  const auto prob = build_affine_problem(model, s, lambda, opt);
  const auto maps = derived_maps(s, model.D);
  const auto* lmi_block = prob.find_block("lmi");
  REQUIRE(lmi_block != nullptr);

  for (int trial = 0; trial < 100; ++trial) {
    const Vector y = Vector::NullaryExpr(prob.layout.total, [&](Eigen::Index) { return rng.normal(); });
    const EvalPoint p = prob.materialize(y);
    const Matrix direct =
        assemble_ultimate_lmi(model, s, maps, p.Q, p.X, p.Y, lambda, p.R).dense();
    const Matrix affine = -lmi_block->eval(y);
    REQUIRE((affine - direct).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("build_affine_problem: assembly is affine in the decision variables") {
  Rng rng(29);
  const auto model = random_model(rng, 2, 1, 1, 1);
  auto s = identity_structure(1, 1);
  s.nset = NSet::scalar_scaled_pair(Matrix::Constant(1, 1, 2.0), Matrix::Identity(1, 1));
  BuildOptions opt;
  opt.r_mode = RMode::Variable;
  const auto prob = build_affine_problem(model, s, 1.3, opt);
  const auto* blk = prob.find_block("lmi");
  for (int trial = 0; trial < 50; ++trial) {
    const Vector v1 = Vector::NullaryExpr(prob.layout.total, [&](Eigen::Index) { return rng.normal(); });
    const Vector v2 = Vector::NullaryExpr(prob.layout.total, [&](Eigen::Index) { return rng.normal(); });
    const double a = rng.uniform();
    const Matrix lhs = blk->eval(a * v1 + (1.0 - a) * v2);
    const Matrix rhs = a * blk->eval(v1) + (1.0 - a) * blk->eval(v2);
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() <
            1e-10 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("stability form equals ultimate form with the disturbance row removed") {
  Rng rng(31);
  const auto model = random_model(rng, 3, 2, 2, 2);
  const auto s = identity_structure(2, 2);
  const auto maps = derived_maps(s, model.D);
  const Matrix Q = random_sym(rng, 3), R = random_sym(rng, 3);
  const Matrix X = random_sym(rng, 2), Y = random_sym(rng, 2);
  const double lambda = 1.0;
  const Matrix ult = assemble_ultimate_lmi(model, s, maps, Q, X, Y, lambda, R).dense();
  const Matrix stab = assemble_stability_lmi(model, s, maps, Q, X, Y, R).dense();
  const int d = 3 + 2 + 2;
  Matrix lead = ult.topLeftCorner(d, d);
  lead.topLeftCorner(3, 3) -= lambda * symmetrize(Q);
  REQUIRE((lead - stab).cwiseAbs().maxCoeff() <
          1e-13 * std::max(1.0, stab.cwiseAbs().maxCoeff()));
}

TEST_CASE("ultimate LMI feasible instance: Schur chain matches the scalar oracle") {
  // gamma = 0.5 scalar ultimate problem needs a larger Q: Q = 10, tau-hat = 5,
  // lambda = 0.5 gives Schur value -2.9
  const auto model = scalar_model();
  const auto s = identity_structure();
  const auto maps = derived_maps(s, model.D);
  const double gamma = 0.5, tau_hat = 5.0, lambda = 0.5;
  const Matrix Q = c1(10.0), R = c1(0.1);
  const Matrix X = c1(tau_hat / (gamma * gamma)), Y = c1(tau_hat);
  const auto b = assemble_ultimate_lmi(model, s, maps, Q, X, Y, lambda, R);
  const double expect =
      oracle::scalar_ultimate_schur(-1, 1, 1, 1, Q(0, 0), R(0, 0), X(0, 0), Y(0, 0), lambda);
  REQUIRE(expect == Catch::Approx(-2.9));
  Matrix m = b.dense();
  m = schur_complement_nd(m, 3, 1);  // w row
  m = schur_complement_nd(m, 2, 1);  // q row
  m = schur_complement_nd(m, 1, 1);  // p row
  REQUIRE(m(0, 0) == Catch::Approx(expect));
  REQUIRE(oracle::max_eig(b.dense()) <= 0.0);
}
