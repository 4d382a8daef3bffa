#include <cmath>
#include <vector>

#include "doctest.h"
#include "dsnb/dlm.hpp"
#include "dsnb/distributions.hpp"
#include "dsnb/error.hpp"
#include "oracles.hpp"

using namespace dsnb;
using namespace dsnb::oracle;

TEST_CASE("single step equals the conjugate Gaussian update") {
  const int n = 4;
  Eigen::VectorXd z(n), w(n);
  z << 1.0, 2.0, 0.5, 1.5;
  w << 1.0, 2.0, 0.5, 1.0;
  const DlmSystem sys = DlmSystem::diagonal(1, 1.0, Eigen::VectorXd::Constant(1, 0.3));
  const Eigen::VectorXd m0 = Eigen::VectorXd::Constant(1, 0.2);
  const Eigen::MatrixXd C0 = Eigen::MatrixXd::Constant(1, 1, 2.0);
  const FilterCache cache = forward_filter({z}, {Eigen::MatrixXd::Ones(n, 1)}, {w}, sys, m0, C0);
  const double prior_var = 2.0 + 0.3;
  const double post_prec = 1.0 / prior_var + w.sum();
  const double post_mean = (0.2 / prior_var + w.dot(z)) / post_prec;
  CHECK(cache.steps[0].m(0) == doctest::Approx(post_mean).epsilon(1e-12));
  CHECK(cache.steps[0].C(0, 0) == doctest::Approx(1.0 / post_prec).epsilon(1e-12));
}

TEST_CASE("static state pools every observation") {
  const DlmSystem sys = DlmSystem::diagonal(1, 1.0, Eigen::VectorXd::Zero(1));
  const Eigen::VectorXd m0 = Eigen::VectorXd::Constant(1, -0.5);
  const Eigen::MatrixXd C0 = Eigen::MatrixXd::Constant(1, 1, 4.0);
  const double x[3] = {1.0, 2.0, -1.0}, zz[3] = {0.3, 1.1, -0.4}, ww[3] = {2.0, 0.5, 1.5};
  std::vector<Eigen::VectorXd> z, w;
  std::vector<Eigen::MatrixXd> F;
  double prec = 1.0 / 4.0, lin = -0.5 / 4.0;
  for (int t = 0; t < 3; ++t) {
    z.push_back(Eigen::VectorXd::Constant(1, zz[t]));
    w.push_back(Eigen::VectorXd::Constant(1, ww[t]));
    F.push_back(Eigen::MatrixXd::Constant(1, 1, x[t]));
    prec += ww[t] * x[t] * x[t];
    lin += ww[t] * x[t] * zz[t];
  }
  const FilterCache cache = forward_filter(z, F, w, sys, m0, C0);
  CHECK(cache.steps[2].m(0) == doctest::Approx(lin / prec).epsilon(1e-12));
  CHECK(cache.steps[2].C(0, 0) == doctest::Approx(1.0 / prec).epsilon(1e-12));

  RngStream rng(1);
  for (int k = 0; k < 50; ++k) {
    const Eigen::MatrixXd theta = backward_sample(cache, sys, rng);
    CHECK(std::abs(theta(0, 0) - theta(2, 0)) < 1e-4);
    CHECK(std::abs(theta(1, 0) - theta(2, 0)) < 1e-4);
  }
}

TEST_CASE("filter matches brute-force joint conditioning") {
  for (int q : {1, 2}) {
    RngStream rng(10 + q);
    const Instance in = random_instance(2, 3, q, rng);
    const JointOracle oracle(in);
    const FilterCache cache = forward_filter(in.zeta, in.F, in.prec, in.system, in.m0, in.C0);
    for (int t = 1; t <= 3; ++t) {
      Eigen::VectorXd m;
      Eigen::MatrixXd c;
      oracle.condition(in, t, t, m, c);
      CAPTURE(q);
      CAPTURE(t);
      CHECK((cache.steps[t - 1].m - m).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((cache.steps[t - 1].C - c).cwiseAbs().maxCoeff() < 1e-8);
      // Prior moments a_t, R_t condition on the data through t - 1.
      if (t > 1) {
        oracle.condition(in, t, t - 1, m, c);
        CHECK((cache.steps[t - 1].a - m).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((cache.steps[t - 1].R - c).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
  }
}

TEST_CASE("FFBS draws reproduce the smoothed joint moments") {
  RngStream rng(20);
  const Instance in = random_instance(2, 3, 1, rng);
  const JointOracle oracle(in);
  Eigen::VectorXd sm;
  Eigen::MatrixXd sc;
  oracle.smoothed(in, sm, sc);
  const FilterCache cache = forward_filter(in.zeta, in.F, in.prec, in.system, in.m0, in.C0);
  const int draws = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(3, 3);
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd th = backward_sample(cache, in.system, rng).col(0);
    sum += th;
    outer += (th - sm) * (th - sm).transpose();
  }
  const Eigen::VectorXd mean = sum / draws;
  const Eigen::MatrixXd cov = outer / draws;
  for (int t = 0; t < 3; ++t) {
    CAPTURE(t);
    CHECK(std::abs(mean(t) - sm(t)) < 3.0 * std::sqrt(sc(t, t) / draws));
    CHECK(std::abs(cov(t, t) - sc(t, t)) < 3.0 * sc(t, t) * std::sqrt(2.0 / draws));
  }
  // Joint draws: the cross-covariances must match too, not only the marginals.
  for (int s = 0; s < 3; ++s) {
    for (int t = s + 1; t < 3; ++t) {
      const double se = std::sqrt((sc(s, s) * sc(t, t) + sc(s, t) * sc(s, t)) / draws);
      CHECK(std::abs(cov(s, t) - sc(s, t)) < 3.0 * se);
    }
  }
}

TEST_CASE("single period draw is the filtered posterior") {
  RngStream rng(21);
  const Instance in = random_instance(3, 1, 1, rng);
  const FilterCache cache = forward_filter(in.zeta, in.F, in.prec, in.system, in.m0, in.C0);
  RngStream a(22), b(22);
  const Eigen::MatrixXd theta = backward_sample(cache, in.system, a);
  const Eigen::VectorXd direct = sample_mvn(cache.steps[0].m, cache.steps[0].C, b);
  CHECK(theta(0, 0) == direct(0));
}

TEST_CASE("Woodbury products match naive inversion") {
  RngStream rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 20);
    const int q = 1 + static_cast<int>(rng.next_u64() % 4);
    Eigen::MatrixXd F(n, q), B(q, q);
    for (Eigen::Index k = 0; k < F.size(); ++k) F.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < B.size(); ++k) B.data()[k] = rng.normal();
    const Eigen::MatrixXd R = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(q, q);
    Eigen::VectorXd w(n), v(n);
    for (int i = 0; i < n; ++i) {
      w(i) = 0.2 + 3.0 * rng.uniform();
      v(i) = rng.normal();
    }
    const Eigen::MatrixXd Q = F * R * F.transpose() + Eigen::MatrixXd(w.cwiseInverse().asDiagonal());
    const Eigen::MatrixXd qinv = Q.inverse();
    const PredictivePrecision pp(F, w, R);
    CAPTURE(trial);
    CHECK((pp.dense() - qinv).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((pp.apply(v) - qinv * v).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((pp.ft_apply(v) - F.transpose() * qinv * v).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((pp.ft_qinv_f() - F.transpose() * qinv * F).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("filtered covariances stay symmetric") {
  RngStream rng(31);
  const Instance in = random_instance(15, 6, 3, rng);
  const FilterCache cache = forward_filter(in.zeta, in.F, in.prec, in.system, in.m0, in.C0);
  for (const auto& s : cache.steps) {
    CHECK((s.C - s.C.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.R - s.R.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.C).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("state-noise variance posterior") {
  HyperParameters hp = HyperParameters::defaults(0, 1);
  const DlmSystem sys = DlmSystem::diagonal(1, 1.0, Eigen::VectorXd::Ones(1));
  const GammaPosterior flat = sigma_theta_posterior(Eigen::MatrixXd::Constant(5, 1, 0.7), sys, hp);
  CHECK(flat.shape == doctest::Approx(hp.a_sigma + 2.0));
  CHECK(flat.rate(0) == doctest::Approx(hp.b_sigma));

  Eigen::MatrixXd two(2, 1);
  two << 0.0, 2.0;
  CHECK(sigma_theta_posterior(two, sys, hp).rate(0) == doctest::Approx(hp.b_sigma + 2.0));

  RngStream rng(40);
  Eigen::MatrixXd theta(8, 2);
  for (Eigen::Index k = 0; k < theta.size(); ++k) theta.data()[k] = rng.normal();
  const DlmSystem sys2 = DlmSystem::diagonal(2, 0.8, Eigen::VectorXd::Ones(2));
  const GammaPosterior post = sigma_theta_posterior(theta, sys2, hp);
  for (int k = 0; k < 2; ++k) {
    double ss = 0.0;
    for (int t = 1; t < 8; ++t) ss += std::pow(theta(t, k) - 0.8 * theta(t - 1, k), 2);
    CHECK(std::abs(post.rate(k) - (hp.b_sigma + 0.5 * ss)) < 1e-12);
  }
  CHECK(std::abs(post.shape - (hp.a_sigma + 3.5)) < 1e-12);

  double inv_sum = 0.0;
  for (int k = 0; k < 40000; ++k) inv_sum += 1.0 / sample_sigma_theta(theta, sys2, hp, rng)(0);
  CHECK(inv_sum / 40000 == doctest::Approx(post.shape / post.rate(0)).epsilon(0.02));
  CHECK_THROWS_AS(sigma_theta_posterior(Eigen::MatrixXd::Zero(1, 1), sys, hp), InvalidParameter);
}

TEST_CASE("pseudo-response removes every non-dynamic term") {
  PanelDataset d;
  d.n = 2;
  d.T = 1;
  d.g = 1;
  d.q = 1;
  d.y = Eigen::MatrixXi::Constant(2, 1, 3);
  d.xf = {Eigen::MatrixXd::Constant(2, 1, 2.0)};
  d.xd = {Eigen::MatrixXd::Constant(2, 1, 1.0)};
  d.validate();
  ParameterState s;
  s.r = 1.0;
  s.gamma = Eigen::VectorXd::Constant(1, 0.5);
  s.theta = Eigen::MatrixXd::Zero(1, 1);
  s.phi = Eigen::MatrixXd(2, 1);
  s.phi << 0.25, -0.25;
  s.omega = Eigen::MatrixXd::Constant(2, 1, 0.5);
  const Eigen::VectorXd zeta = assemble_zeta(s, d, 0);
  CHECK(zeta(0) == doctest::Approx(2.0 - 1.0 - 0.25));
  CHECK(zeta(1) == doctest::Approx(2.0 - 1.0 + 0.25));
}
