#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "kcontract/compound.hpp"
#include "kcontract/lurie.hpp"
#include "kcontract/measures.hpp"
#include "kcontract/network.hpp"
#include "kcontract/rng.hpp"
#include "oracles.hpp"

using namespace kcontract;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LurieSystem decoupled_system(const MatrixXd& A) {
  const Eigen::Index n = A.rows();
  LurieSystem sys;
  sys.A = A;
  sys.B = MatrixXd::Zero(n, 1);
  sys.C = MatrixXd::Zero(1, n);
  sys.phi = NonlinearityDescriptor::zero(1, 1);
  return sys;
}

// Random system whose loop gain is weak enough to certify: strongly stable
// A, small B and C, and a contractive affine-tanh feedback.
LurieSystem random_certifiable(Rng& rng, Eigen::Index n, double q_bound) {
  LurieSystem sys;
  const MatrixXd G = rng.gaussian_matrix(n, n);
  sys.A = G - (mu2(G) + 1.0) * MatrixXd::Identity(n, n);
  sys.B = 0.3 * rng.gaussian_matrix(n, n);
  sys.C = 0.3 * rng.gaussian_matrix(n, n);
  MatrixXd W1 = rng.gaussian_matrix(n, n);
  MatrixXd W2 = rng.gaussian_matrix(n, n);
  const double s = singular_values(W1)(0) * singular_values(W2)(0);
  sys.phi = NonlinearityDescriptor::affine_tanh(W1, W2, VectorXd::Zero(n), q_bound / s);
  return sys;
}

}  // namespace

TEST_CASE("closed-loop Jacobian: zero, linear, and Hopfield feedback") {
  Rng rng(101);
  const Eigen::Index n = 4;
  const MatrixXd A = rng.gaussian_matrix(n, n);

  LurieSystem zero_fb;
  zero_fb.A = A;
  zero_fb.B = rng.gaussian_matrix(n, 2);
  zero_fb.C = rng.gaussian_matrix(3, n);
  zero_fb.phi = NonlinearityDescriptor::zero(2, 3);
  CHECK((closed_loop_jacobian(zero_fb, 0.0, VectorXd::Zero(n)) - A).norm() ==
        doctest::Approx(0.0));

  // Affine phi with constant Jacobian K: J = A - B K C. A one-layer affine
  // tanh at y = 0 has slope one, so K = scale * W1 * W2.
  LurieSystem lin;
  lin.A = A;
  lin.B = rng.gaussian_matrix(n, 2);
  lin.C = rng.gaussian_matrix(3, n);
  const MatrixXd W1 = rng.gaussian_matrix(2, 2), W2 = rng.gaussian_matrix(2, 3);
  lin.phi = NonlinearityDescriptor::affine_tanh(W1, W2, VectorXd::Zero(2), 0.7);
  const MatrixXd K = 0.7 * W1 * W2;
  CHECK((closed_loop_jacobian(lin, 0.0, VectorXd::Zero(n)) - (A - lin.B * K * lin.C))
            .norm() < 1e-12);

  // Hopfield rewrite at x = 0: tanh Jacobian is the identity, so the closed
  // loop recovers -alpha I + W exactly, for any spectral split gamma.
  const double alpha = 1.5;
  const NetworkedSystem net = hopfield_example(alpha);
  const LurieSystem lurie = as_lurie(net, 0.9);
  const MatrixXd J = closed_loop_jacobian(lurie, 0.0, VectorXd::Zero(3));
  const MatrixXd expected = -alpha * MatrixXd::Identity(3, 3) + net.W1;
  CHECK((J - expected).norm() < 1e-12);
}

TEST_CASE("k-ARI: explicit scalar example holds with margin 1") {
  const Eigen::Index n = 3;
  LurieSystem sys = decoupled_system(-MatrixXd::Identity(n, n));
  const AriResult r = k_ari_check(sys, 1, MatrixXd::Identity(n, n), 1.0);
  CHECK(r.holds);
  CHECK(r.margin == doctest::Approx(1.0));
}

TEST_CASE("k-ARI agrees with the literally assembled compound inequality") {
  Rng rng(103);
  int done = 0;
  while (done < 40) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.raw() % 3);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.raw() % n);
    LurieSystem sys;
    const MatrixXd G = rng.gaussian_matrix(n, n);
    sys.A = G - (mu2(G) + rng.uniform(-0.5, 2.0)) * MatrixXd::Identity(n, n);
    sys.B = 0.5 * rng.gaussian_matrix(n, 2);
    sys.C = 0.5 * rng.gaussian_matrix(2, n);
    sys.phi = NonlinearityDescriptor::zero(2, 2);
    const MatrixXd Q = oracles::spd_sqrt(oracles::random_spd(n, rng));
    const double eta1 = rng.uniform(-0.5, 1.0);

    const AriResult r = k_ari_check(sys, k, Q, eta1);
    const MatrixXd lhs = oracles::direct_k_ari_lhs(sys, k, Q, eta1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (lhs + lhs.transpose()),
                                               Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    // Compare decisions away from the tolerance boundary.
    if (std::abs(r.margin) < 1e-6) continue;
    CHECK(r.holds == (lmax <= definiteness_tolerance(lhs)));
    ++done;
  }
}

TEST_CASE("k-ARI at k=1 is the classical ARI up to the eta1 slack") {
  Rng rng(107);
  int done = 0;
  while (done < 40) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.raw() % 3);
    LurieSystem sys;
    const MatrixXd G = rng.gaussian_matrix(n, n);
    sys.A = G - (mu2(G) + rng.uniform(0.0, 2.0)) * MatrixXd::Identity(n, n);
    sys.B = 0.4 * rng.gaussian_matrix(n, 1);
    sys.C = 0.4 * rng.gaussian_matrix(1, n);
    sys.phi = NonlinearityDescriptor::zero(1, 1);
    const MatrixXd Q = oracles::spd_sqrt(oracles::random_spd(n, rng));
    const MatrixXd P = Q * Q;
    const double eta1 = rng.uniform(0.0, 0.5);

    const MatrixXd classical = P * sys.A + sys.A.transpose() * P +
                               P * sys.B * sys.B.transpose() * P +
                               sys.C.transpose() * sys.C + eta1 * P;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (classical + classical.transpose()),
                                               Eigen::EigenvaluesOnly);
    const AriResult r = k_ari_check(sys, 1, Q, eta1);
    if (std::abs(r.margin) < 1e-6) continue;
    CHECK(r.holds == (es.eigenvalues().maxCoeff() <= definiteness_tolerance(classical)));
    ++done;
  }
}

TEST_CASE("gain condition: zero nonlinearity with C = I yields eta2 = k") {
  const Eigen::Index n = 3;
  LurieSystem sys;
  sys.A = -MatrixXd::Identity(n, n);
  sys.B = MatrixXd::Zero(n, n);
  sys.C = MatrixXd::Identity(n, n);
  sys.phi = NonlinearityDescriptor::zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    const GainResult g = gain_condition_check(sys, k, MatrixXd::Identity(n, n), {});
    CHECK(g.eta2 == doctest::Approx(static_cast<double>(k)));
    CHECK(g.side == GainSide::CSide);
    CHECK(g.provenance == Provenance::Analytic);
  }
}

TEST_CASE("gain condition: unit gain bound gives nonnegative eta2 on both sides") {
  Rng rng(109);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.raw() % 3);
    LurieSystem sys;
    sys.A = rng.gaussian_matrix(n, n);
    sys.B = rng.gaussian_matrix(n, n);
    sys.C = rng.gaussian_matrix(n, n);
    sys.phi = NonlinearityDescriptor::tanh_diagonal(n);  // sigma_1 <= 1 analytic
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.raw() % n);
    const MatrixXd Q = oracles::spd_sqrt(oracles::random_spd(n, rng));
    const GainResult g = gain_condition_check(sys, k, Q, {});
    CHECK(g.eta2 >= -1e-12);
    CHECK(g.provenance == Provenance::Analytic);
  }
}

TEST_CASE("gain condition: analytic bound is an envelope of sampled values") {
  Rng rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 3;
    LurieSystem sys;
    sys.A = rng.gaussian_matrix(n, n);
    sys.B = rng.gaussian_matrix(n, 2);
    sys.C = rng.gaussian_matrix(2, n);
    MatrixXd W1 = rng.gaussian_matrix(2, 2), W2 = rng.gaussian_matrix(2, 2);
    const double s = singular_values(W1)(0) * singular_values(W2)(0);
    sys.phi = NonlinearityDescriptor::affine_tanh(W1, W2, VectorXd::Zero(2), 0.8 / s);
    const MatrixXd Q = oracles::spd_sqrt(oracles::random_spd(n, rng));
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.raw() % n);

    const GainResult analytic = gain_condition_check(sys, k, Q, {});
    // Any sampled evaluation of the same conditions must do at least as well.
    LurieSystem sampled = sys;
    sampled.phi.gain_provenance = Provenance::Sampled;
    std::vector<std::pair<double, VectorXd>> samples;
    for (int i = 0; i < 64; ++i) samples.emplace_back(0.0, rng.uniform_in(Box::centered(2, 3.0)));
    const GainResult g = gain_condition_check(sampled, k, Q, samples);
    CHECK(g.provenance == Provenance::Sampled);
    CHECK(g.eta2 >= analytic.eta2 - 1e-9);
  }
}

TEST_CASE("gain condition: tanh with C=I and scalar P reduces to the sigma-square sum") {
  Rng rng(127);
  const Eigen::Index n = 3;
  LurieSystem sys;
  sys.A = -2.0 * MatrixXd::Identity(n, n);
  sys.B = rng.gaussian_matrix(n, n);
  sys.C = MatrixXd::Identity(n, n);
  sys.phi = NonlinearityDescriptor::tanh_diagonal(n);
  sys.phi.gain_provenance = Provenance::Sampled;  // force the sampled route
  const double p = 0.6;
  const MatrixXd Q = std::sqrt(p) * MatrixXd::Identity(n, n);
  const Eigen::Index k = 2;

  std::vector<std::pair<double, VectorXd>> samples;
  for (int i = 0; i < 32; ++i) samples.emplace_back(0.0, rng.uniform_in(Box::centered(n, 2.0)));

  // C-side value at each sample must equal (sum_i sigma_i^2(J) - k)/p.
  double worst = -1e300;
  for (const auto& [t, y] : samples) {
    const MatrixXd J = sys.phi.jac(t, y);
    const VectorXd sv = singular_values(J);
    double sum = 0;
    for (Eigen::Index i = 0; i < k; ++i) sum += sv[i] * sv[i];
    worst = std::max(worst, (sum - static_cast<double>(k)) / p);
  }
  const GainResult g = gain_condition_check(sys, k, Q, samples);
  // eta2 = -max over samples; B-side cannot beat the C-side here unless BB^T
  // is tiny, so check the C-side arithmetic via the reported value.
  const double etaC = -worst;
  CHECK(g.eta2 >= etaC - 1e-12);
  if (g.side == GainSide::CSide) CHECK(g.eta2 == doctest::Approx(etaC));
}

TEST_CASE("certify: no feedback path certifies at every order with the mu2 rate") {
  Rng rng(131);
  const Eigen::Index n = 4;
  const MatrixXd G = rng.gaussian_matrix(n, n);
  const MatrixXd A = G - (mu2(G) + 0.8) * MatrixXd::Identity(n, n);
  LurieSystem sys = decoupled_system(A);
  for (Eigen::Index k = 1; k <= n; ++k) {
    const Certificate cert = certify_lurie(sys, k, CertifyStrategy::ScalarP);
    REQUIRE(cert.certified());
    const double expected_rate = -0.5 * top_k_eig_sum((A + A.transpose()).eval(), k);
    CHECK(cert.rate == doctest::Approx(expected_rate).epsilon(1e-6));
    CHECK(cert.eta1 + cert.eta2 > 0);
    CHECK(cert.margin > 0);
  }
}

TEST_CASE("certify: Hopfield rewrite is infeasible at k=1 and certified at k=2") {
  const NetworkedSystem net = hopfield_example(1.5);

  const Certificate c2 = net_k_contraction_check(net, 2);
  REQUIRE(c2.certified());
  // The same witness passes the Theorem-1 machinery directly.
  const double gamma = 1.0 / (c2.Q(0, 0) * c2.Q(0, 0));
  const LurieSystem lurie = as_lurie(net, gamma);
  const AriResult ari = k_ari_check(lurie, 2, c2.Q, c2.eta1);
  CHECK(ari.holds);
  const GainResult g = gain_condition_check(lurie, 2, c2.Q, {});
  CHECK(g.eta2 >= c2.eta2 - 1e-9);

  const Certificate c1 = net_k_contraction_check(net, 1);
  CHECK(c1.status == CertStatus::Infeasible);

  // Direct scalar-P certification of the rewrite agrees on both decisions.
  const Certificate direct2 = certify_lurie(as_lurie(net, gamma), 2, CertifyStrategy::ScalarP);
  CHECK(direct2.certified());
}

TEST_CASE("certify: given-Q accepts the scalar witness and rejects bad Q") {
  const NetworkedSystem net = hopfield_example(1.5);
  const Certificate c2 = net_k_contraction_check(net, 2);
  const double gamma = 1.0 / (c2.Q(0, 0) * c2.Q(0, 0));
  const LurieSystem lurie = as_lurie(net, gamma);

  const Certificate given = certify_lurie(lurie, 2, CertifyStrategy::GivenQ, c2.Q);
  CHECK(given.certified());
  CHECK(given.eta1 + given.eta2 >= c2.eta1 + c2.eta2 - 1e-9);

  CHECK_THROWS_AS((void)certify_lurie(lurie, 2, CertifyStrategy::GivenQ,
                                      (-MatrixXd::Identity(3, 3)).eval()),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)certify_lurie(lurie, 2, CertifyStrategy::GivenQ),
                  std::invalid_argument);
}

TEST_CASE("certify: q-scaled system equals Theorem 1 with the gain folded into B") {
  Rng rng(137);
  int done = 0;
  while (done < 15) {
    const Eigen::Index n = 3;
    LurieSystem sys = random_certifiable(rng, n, 1.7);
    const double q = *sys.phi.gain_bound;

    // Corollary-style scaled system: B -> qB, Phi -> Phi / q.
    LurieSystem scaled = sys;
    scaled.B = q * sys.B;
    auto base_eval = sys.phi.eval;
    auto base_jac = sys.phi.jac;
    scaled.phi.eval = [base_eval, q](double t, const VectorXd& y) -> VectorXd {
      return base_eval(t, y) / q;
    };
    scaled.phi.jac = [base_jac, q](double t, const VectorXd& y) -> MatrixXd {
      return base_jac(t, y) / q;
    };
    scaled.phi.gain_bound = 1.0;

    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.raw() % n);
    const MatrixXd Q = oracles::spd_sqrt(oracles::random_spd(n, rng, 1.0));

    // The scaled system's S-matrix carries q^2 B B^T; assemble it manually.
    const MatrixXd Qinv = Q.partialPivLu().inverse();
    const MatrixXd S0 = Q * sys.A * Qinv + Qinv * sys.A.transpose() * Q +
                        q * q * Q * sys.B * sys.B.transpose() * Q +
                        Qinv * sys.C.transpose() * sys.C * Qinv;
    const double eta1_manual = -top_k_eig_sum(S0, k);
    const AriResult ari = k_ari_check(scaled, k, Q, 0.0);
    CHECK(ari.margin == doctest::Approx(eta1_manual).epsilon(1e-9));
    ++done;
  }
}

TEST_CASE("certify: Proposition 1 transfers certificates upward in k") {
  Rng rng(139);
  int done = 0;
  while (done < 25) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.raw() % 3);
    LurieSystem sys = random_certifiable(rng, n, 0.6);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.raw() % (n - 1));
    const Certificate cert = certify_lurie(sys, k, CertifyStrategy::ScalarP);
    if (!cert.certified() || cert.eta1 < 0 || cert.eta2 < 0) continue;
    for (Eigen::Index ell = k + 1; ell <= n; ++ell)
      CHECK(verify_at_order(sys, ell, cert.Q, cert.eta1, cert.eta2));
    ++done;
  }
}

TEST_CASE("certified certificates satisfy the pointwise compound measure bound") {
  Rng rng(149);
  const std::vector<NetworkedSystem> systems = {hopfield_example(1.5),
                                                opinion_example(0.5)};
  for (const auto& net : systems) {
    const Certificate cert = net_k_contraction_check(net, 2);
    REQUIRE(cert.certified());
    const Box box = Box::centered(net.n(), 3.0);
    for (int s = 0; s < 200; ++s) {
      const VectorXd x = rng.uniform_in(box);
      const MatrixXd Jk = add_compound(net.jacobian(x), 2);
      CHECK(mu2_scaled(Jk, cert.Qk) <= -cert.rate + 1e-6);
    }
  }
}

TEST_CASE("scalar_p_search closed form") {
  const double ak = 1.8;
  const ScalarPResult mid = scalar_p_search(ak / 2.0, ak);
  CHECK(mid.feasible);
  CHECK(mid.p == doctest::Approx(2.0 / ak));
  const ScalarPResult boundary = scalar_p_search(ak, ak);
  CHECK_FALSE(boundary.feasible);
  CHECK_THROWS_AS((void)scalar_p_search(0.0, ak), std::invalid_argument);

  // Hopfield at alpha = 1.5, k = 2: any gamma in the Theorem-2 window works.
  const NetworkedSystem net = hopfield_example(1.5);
  const VectorXd s = singular_values(net.W1);
  const double lhs = s[0] * s[0] + s[1] * s[1];
  const double gamma = 0.5 * (1.5 + std::sqrt(lhs / 2.0));
  const ScalarPResult hop = scalar_p_search(gamma, 1.5);
  CHECK(hop.feasible);
}

TEST_CASE("lemma 1: gap is never positive") {
  Rng rng(151);
  SUBCASE("N = 0 and M = 0 degenerate cases") {
    const MatrixXd M = rng.gaussian_matrix(4, 3);
    CHECK(lemma1_gap(M, MatrixXd::Zero(3, 4), 2) <= 1e-12);
    CHECK(lemma1_gap(MatrixXd::Zero(4, 3), rng.gaussian_matrix(3, 4), 2) <= 1e-12);
  }
  SUBCASE("Monte Carlo over dimensions and orders") {
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.raw() % 4);
      const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.raw() % 4);
      const MatrixXd M = rng.gaussian_matrix(n, m);
      const MatrixXd N = rng.gaussian_matrix(m, n);
      for (Eigen::Index k = 1; k <= n; ++k) CHECK(lemma1_gap(M, N, k) <= 1e-10);
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS((void)lemma1_gap(MatrixXd::Zero(3, 2), MatrixXd::Zero(3, 2), 1),
                    std::invalid_argument);
  }
}

TEST_CASE("sampled gain evidence caps certification at sampled-only") {
  Rng rng(157);
  const Eigen::Index n = 3;
  LurieSystem sys = random_certifiable(rng, n, 0.5);
  sys.phi.gain_provenance = Provenance::Sampled;  // same maps, weaker evidence
  CertifyOptions opts;
  opts.sample_box = Box::centered(n, 2.0);
  const Certificate cert = certify_lurie(sys, 2, CertifyStrategy::ScalarP, std::nullopt, opts);
  CHECK(cert.status == CertStatus::SampledOnly);
}
