#include <catch2/catch_amalgamated.hpp>

#include "conebound/certificate.hpp"
#include "conebound/sdp.hpp"
#include "oracles.hpp"

using namespace conebound;

namespace {

SystemModel scalar_model(double a = -1, double e = 1, double g = 1, double c = 1) {
  SystemModel m;
  m.A = Matrix::Constant(1, 1, a);
  m.E = Matrix::Constant(1, 1, e);
  m.G = Matrix::Constant(1, 1, g);
  m.Cq = Matrix::Constant(1, 1, c);
  m.D = Matrix::Zero(1, 1);
  return m;
}

Matrix c1(double v) { return Matrix::Constant(1, 1, v); }

// gamma = 0.5 stability certificate from the multiplier ray: Q = 1, tau = 2
// means X^-1 = 0.5 and Y^-1 = 2, so X = 2, Y = 0.5. Schur value -0.9.
AnalysisCertificate scalar_cert(double r = 0.1) {
  AnalysisCertificate cert;
  cert.Q = c1(1.0);
  cert.X = c1(2.0);
  cert.Y = c1(0.5);
  cert.R = c1(r);
  return cert;
}

AnalysisCertificate solve_scalar_ultimate(double gamma, double* out_lambda = nullptr) {
  LambdaGrid grid;
  grid.min = 1e-2;
  grid.max = 1e2;
  grid.points = 12;
  grid.refine_iters = 8;
  const auto res = lambda_search(scalar_model(), norm_bounded(gamma), SolverOptions{}, grid);
  REQUIRE(res.any_feasible);
  if (out_lambda) *out_lambda = res.best_lambda;
  return certificate_from_solution(*res.best_outcome.solution);
}

}  // namespace

TEST_CASE("check_certificate: valid scalar stability certificate passes") {
  const auto rep = check_certificate(scalar_model(), norm_bounded(0.5), scalar_cert());
  REQUIRE(rep.pass);
  REQUIRE(rep.lmi_max_eig <= 0.0);
  REQUIRE(oracle::scalar_stability_schur(-1, 1, 1, 1, 0.1, 2.0, 0.5) == Catch::Approx(-0.9));
}

TEST_CASE("check_certificate: inflating R to 2.0 is rejected") {
  const auto rep = check_certificate(scalar_model(), norm_bounded(0.5), scalar_cert(2.0));
  REQUIRE_FALSE(rep.pass);
  REQUIRE(rep.lmi_max_eig > rep.tolerance);
  REQUIRE(oracle::scalar_stability_schur(-1, 1, 1, 1, 2.0, 2.0, 0.5) == Catch::Approx(1.0));
}

TEST_CASE("check_certificate: decoupled boundary instance passes at eig 0") {
  // E = 0, Cq = 0, G = 0 decouples all rows; (1,1) = -2I + I + I = 0
  SystemModel m;
  m.A = -Matrix::Identity(2, 2);
  m.E = Matrix::Zero(2, 1);
  m.G = Matrix::Zero(2, 1);
  m.Cq = Matrix::Zero(1, 2);
  m.D = Matrix::Zero(1, 1);
  AnalysisCertificate cert;
  cert.Q = Matrix::Identity(2, 2);
  cert.R = Matrix::Identity(2, 2);
  cert.X = c1(1.0);
  cert.Y = c1(1.0);
  cert.lambda = 1.0;
  const auto rep = check_certificate(m, norm_bounded(1.0, 1, 1), cert);
  REQUIRE(rep.pass);
  REQUIRE(rep.lmi_max_eig == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("check_certificate: dimension mismatch is reported, not thrown") {
  AnalysisCertificate cert = scalar_cert();
  cert.Q = Matrix::Identity(2, 2);
  const auto rep = check_certificate(scalar_model(), norm_bounded(0.5), cert);
  REQUIRE_FALSE(rep.pass);
  REQUIRE_FALSE(rep.dims_ok);
}

TEST_CASE("check_certificate: multiplier-pair membership is enforced") {
  AnalysisCertificate cert = scalar_cert();
  cert.X = c1(3.0);  // off the ray X = 4 tau, Y = tau
  const auto rep = check_certificate(scalar_model(), norm_bounded(0.5), cert);
  REQUIRE_FALSE(rep.pass);
  REQUIRE_FALSE(rep.find("nset_membership")->pass);
}

TEST_CASE("replay_proof_chain: solver certificates pass all five steps") {
  double lambda = 0.0;
  const auto cert = solve_scalar_ultimate(0.5, &lambda);
  const auto model = scalar_model();
  const auto chk = check_certificate(model, norm_bounded(0.5), cert);
  REQUIRE(chk.pass);
  const auto chain = replay_proof_chain(model, norm_bounded(0.5), cert);
  REQUIRE(chain.pass);
  REQUIRE(chain.steps.size() == 5);
  for (const auto& s : chain.steps) REQUIRE(s.pass);
  // T = I, D = 0: the factorization identity is exact
  REQUIRE(chain.steps[3].residual < 1e-14);
}

TEST_CASE("replay_proof_chain: stability certificate (no lambda, no w row)") {
  const auto chain = replay_proof_chain(scalar_model(), norm_bounded(0.5), scalar_cert());
  REQUIRE(chain.pass);
  REQUIRE(chain.steps.size() == 5);
}

TEST_CASE("replay_proof_chain: corrupted certificate fails at least one step") {
  auto cert = scalar_cert();
  cert.Q = c1(100.0);
  // the corruption really does violate: Schur value with Q = 100
  REQUIRE(oracle::scalar_stability_schur(-1, 1, 1, 100.0, 0.1, 2.0, 0.5) > 0.0);
  const auto chain = replay_proof_chain(scalar_model(), norm_bounded(0.5), cert);
  REQUIRE_FALSE(chain.pass);
}

TEST_CASE("replay_proof_chain: sector-class certificate with nontrivial T") {
  const auto model = scalar_model();
  const auto s = sector_scalar(0.8);
  const auto out = solve(build_affine_problem(model, s, std::nullopt));
  REQUIRE(out.status == SolveStatus::Feasible);
  const auto cert = certificate_from_solution(*out.solution);
  const auto chain = replay_proof_chain(model, s, cert);
  REQUIRE(chain.pass);
  REQUIRE(chain.steps[3].residual < 1e-10);
}

TEST_CASE("sprocedure_spotcheck: valid certificate, 10^4 samples stay nonpositive") {
  const auto cert = solve_scalar_ultimate(0.5);
  const auto rep = sprocedure_spotcheck(scalar_model(), norm_bounded(0.5), cert, 10000, 99);
  REQUIRE(rep.pass);
  REQUIRE(rep.max_form_value <= 1e-8);
  REQUIRE(rep.matrix_max_eig <= rep.tolerance);
  REQUIRE(rep.implication_checked > 0);
  REQUIRE(rep.implication_worst <= rep.tolerance);
}

TEST_CASE("sprocedure_spotcheck: inflated R is caught by sampling") {
  auto cert = solve_scalar_ultimate(0.5);
  // R = 5 Q claims decay rate 5; the loop supports at most 2 - 2 gamma = 1
  cert.R = 5.0 * cert.Q;
  const auto rep = sprocedure_spotcheck(scalar_model(), norm_bounded(0.5), cert, 10000, 99);
  REQUIRE_FALSE(rep.pass);
  REQUIRE(rep.max_form_value > 0.0);
}

TEST_CASE("sign-flipped R makes the form vacuous but fails the definiteness check") {
  auto cert = solve_scalar_ultimate(0.5);
  cert.R = c1(-50.0);
  const auto rep = check_certificate(scalar_model(), norm_bounded(0.5), cert);
  REQUIRE_FALSE(rep.pass);
  REQUIRE_FALSE(rep.find("R_psd")->pass);
}

TEST_CASE("ultimate_bound: scalar and diagonal examples") {
  AnalysisCertificate cert = scalar_cert();
  const auto b1 = ultimate_bound(cert, 1.0);
  REQUIRE(b1.P(0, 0) == Catch::Approx(1.0));
  REQUIRE(b1.level == Catch::Approx(1.0));
  REQUIRE(b1.radius == Catch::Approx(1.0));

  AnalysisCertificate c2;
  c2.Q = Matrix::Zero(2, 2);
  c2.Q(0, 0) = 4.0;
  c2.Q(1, 1) = 1.0;
  c2.R = 0.3 * c2.Q;
  c2.X = c1(1.0);
  c2.Y = c1(1.0);
  const auto b2 = ultimate_bound(c2, 2.0);
  REQUIRE(b2.radius == Catch::Approx(4.0));  // sqrt(lambda_max(Q)) * w_bound
  REQUIRE(b2.decay_rate == Catch::Approx(0.3));

  const auto b0 = ultimate_bound(cert, 0.0);
  REQUIRE(b0.level == 0.0);
  REQUIRE(b0.radius == 0.0);
}

TEST_CASE("ultimate_bound: radius identity and homogeneity in w_bound") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 3);
    Matrix a = Matrix::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    AnalysisCertificate cert;
    cert.Q = a * a.transpose() + Matrix::Identity(n, n);
    cert.R = Matrix::Identity(n, n);
    cert.X = c1(1.0);
    cert.Y = c1(1.0);
    const double w = rng.uniform(0.0, 3.0);
    const auto b = ultimate_bound(cert, w);
    REQUIRE(b.radius * b.radius ==
            Catch::Approx(max_eig_sym(cert.Q) * w * w).margin(1e-10).epsilon(1e-10));
    const auto b2 = ultimate_bound(cert, 2.0 * w);
    REQUIRE(b2.radius == Catch::Approx(2.0 * b.radius).margin(1e-12).epsilon(1e-12));
    // every x in the ellipsoid satisfies ||x|| <= radius
    for (int k = 0; k < 50 && b.level > 0.0; ++k) {
      Vector u = rng.unit_vector(n);
      const double scale = std::sqrt(b.level / u.dot(b.P * u));
      REQUIRE((scale * u).norm() <= b.radius * (1.0 + 1e-10));
    }
  }
}

TEST_CASE("ultimate_bound: rejects negative w_bound and singular Q") {
  REQUIRE_THROWS_AS(ultimate_bound(scalar_cert(), -1.0), Error);
  AnalysisCertificate cert = scalar_cert();
  cert.Q = c1(0.0);
  REQUIRE_THROWS_AS(ultimate_bound(cert, 1.0), Error);
}

TEST_CASE("no false feasibility: perturbed certificates are rejected by the checker") {
  const auto model = scalar_model();
  const auto s = norm_bounded(0.5);
  const auto cert = solve_scalar_ultimate(0.5);
  Rng rng(31415);
  int rejected = 0;
  for (int trial = 0; trial < 20; ++trial) {
    AnalysisCertificate bad = cert;
    // push Q along a random direction until the test-side assembler verifies
    // a genuine violation, then demand rejection
    const double dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double step = 0.5 * bad.Q(0, 0) * rng.uniform(0.5, 2.0);
    double eig = 0.0;
    for (int i = 0; i < 60; ++i) {
      bad.Q(0, 0) = std::max(bad.Q(0, 0) + dir * step, 1e-7);
      eig = oracle::max_eig(oracle::norm_bounded_ultimate_lmi(
          model.A, model.E, model.G, model.Cq, bad.Q, bad.X, bad.Y, *bad.lambda, bad.R));
      if (eig > 1e-4) break;
    }
    if (eig <= 1e-4) continue;  // this direction never violated; skip
    const auto rep = check_certificate(model, s, bad);
    REQUIRE_FALSE(rep.pass);
    ++rejected;
  }
  REQUIRE(rejected > 0);
}

TEST_CASE("Theorem certificate with G = 0 restricts to a Corollary certificate") {
  auto model = scalar_model();
  model.G = Matrix::Zero(1, 1);
  const auto s = norm_bounded(0.5);
  LambdaGrid grid;
  grid.min = 1e-2;
  grid.max = 10.0;
  grid.points = 8;
  grid.refine_iters = 0;
  const auto res = lambda_search(model, s, SolverOptions{}, grid);
  REQUIRE(res.any_feasible);
  AnalysisCertificate cert = certificate_from_solution(*res.best_outcome.solution);
  REQUIRE(check_certificate(model, s, cert).pass);
  cert.lambda.reset();  // leading 3x3 blocks with the lambda Q term removed
  const auto rep = check_certificate(model, s, cert);
  REQUIRE(rep.pass);
}
