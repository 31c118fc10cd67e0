#include <cmath>
#include <random>

#include "doctest.h"
#include "mpamp/denoiser.hpp"
#include "mpamp/error.hpp"
#include "oracles.hpp"

using namespace mpamp;

TEST_CASE("channel variance must be positive") {
  CHECK_THROWS_AS(EffectiveChannel(0.0), ParameterError);
  CHECK_THROWS_AS(EffectiveChannel(-1.0), ParameterError);
  CHECK_THROWS_AS(EffectiveChannel(NAN), ParameterError);
}

TEST_CASE("eta agrees with the posterior-mean integral") {
  for (const SignalPrior prior : {SignalPrior{0.05, 0.0, 1.0}, SignalPrior{0.2, 0.7, 0.5}}) {
    for (double v : {1e-3, 0.02, 0.5}) {
      for (double f = -3.0; f <= 3.0; f += 0.37) {
        const double want = oracle::posterior_mean(f, v, prior.epsilon, prior.mu_s, prior.sigma_s);
        const double got = eta(f, EffectiveChannel(v), prior);
        CHECK(got == doctest::Approx(want).epsilon(1e-8).scale(1e-12));
      }
    }
  }
}

TEST_CASE("eta_prime matches central differences") {
  const SignalPrior prior{0.05, 0.0, 1.0};
  const EffectiveChannel ch(0.01);
  for (double f = -1.0; f <= 1.0; f += 0.013) {
    const double h = 1e-6;
    const double fd = (eta(f + h, ch, prior) - eta(f - h, ch, prior)) / (2 * h);
    CHECK(eta_prime(f, ch, prior) == doctest::Approx(fd).epsilon(1e-5).scale(1e-7));
  }
}

TEST_CASE("shape of the zero-mean denoiser") {
  const SignalPrior prior{0.05, 0.0, 1.0};
  const EffectiveChannel ch(0.02);
  for (double f : {0.1, 0.4, 1.3}) CHECK(eta(-f, ch, prior) == doctest::Approx(-eta(f, ch, prior)));
  CHECK(eta(0.0, ch, prior) == 0.0);
  // Shrinks toward zero, and approaches the slab posterior mean for large inputs.
  CHECK(std::abs(eta(0.1, ch, prior)) < 0.1);
  CHECK(eta(3.0, ch, prior) == doctest::Approx(3.0 / 1.02).epsilon(1e-9));
  // The derivative is the posterior variance over v, which exceeds 1 near the transition.
  const double v = 0.02;
  const double slab_post_var = v / (1.0 + v);
  for (double f = -2.0; f <= 2.0; f += 0.01) {
    const double pi = BernoulliGaussDenoiser(prior, ch).evaluate(f).responsibility;
    const double m = f / (1.0 + v);
    const double post_var = pi * (slab_post_var + m * m) - std::pow(pi * m, 2);
    CHECK(eta_prime(f, ch, prior) == doctest::Approx(post_var / v).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("large channel variance switches the slab off") {
  const SignalPrior prior{0.05, 0.0, 1.0};
  CHECK(eta_prime(0.0, EffectiveChannel(1e6), prior) < 1e-6);
}

TEST_CASE("pure slab prior gives the linear estimator") {
  const SignalPrior prior{1.0, 0.5, 2.0};
  const EffectiveChannel ch(1.0);
  CHECK(eta(1.0, ch, prior) == doctest::Approx((4.0 * 1.0 + 1.0 * 0.5) / 5.0));
  CHECK(eta_prime(-7.0, ch, prior) == doctest::Approx(0.8));
  CHECK(denoiser_mse(1.0, prior) == doctest::Approx(0.8));
}

TEST_CASE("non-finite inputs are rejected") {
  const SignalPrior prior{0.05, 0.0, 1.0};
  CHECK_THROWS_AS(eta(NAN, EffectiveChannel(1.0), prior), InputError);
  CHECK_THROWS_AS(eta_prime(INFINITY, EffectiveChannel(1.0), prior), InputError);
}

TEST_CASE("denoiser MSE against independent quadrature") {
  for (const SignalPrior prior : {SignalPrior{0.03, 0.0, 1.0}, SignalPrior{0.1, 0.0, 1.0}, SignalPrior{0.3, 1.0, 0.5}}) {
    for (double v : {1e-3, 5e-3, 0.05, 0.5}) {
      auto eta_oracle = [&](double f) { return oracle::posterior_mean(f, v, prior.epsilon, prior.mu_s, prior.sigma_s); };
      const double want = oracle::mse_by_quadrature(eta_oracle, v, prior.epsilon, prior.mu_s, prior.sigma_s);
      CHECK(denoiser_mse(v, prior) == doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("denoiser MSE against Monte Carlo") {
  const SignalPrior prior{0.05, 0.0, 1.0};
  const double v = 0.01;
  std::mt19937_64 rng(5);
  std::bernoulli_distribution active(prior.epsilon);
  std::normal_distribution<double> n01(0.0, 1.0);
  const EffectiveChannel ch(v);
  double acc = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double s = active(rng) ? n01(rng) : 0.0;
    const double e = eta(s + std::sqrt(v) * n01(rng), ch, prior) - s;
    acc += e * e;
  }
  CHECK(denoiser_mse(v, prior) == doctest::Approx(acc / n).epsilon(0.02));
}

TEST_CASE("state evolution") {
  const SignalPrior prior{0.05, 0.0, 1.0};
  ProblemConfig cfg;
  const SeModel m = SeModel::from_problem(cfg, prior);
  CHECK(m.kappa == doctest::Approx(0.3));
  CHECK(m.sigma2_0() == doctest::Approx(m.sigma2_e + 0.05 / 0.3));
  // se_step is sigma2_e + MSE / kappa.
  CHECK(se_step(0.02, 0.0, prior, 0.3, m.sigma2_e) ==
        doctest::Approx(m.sigma2_e + denoiser_mse(0.02, prior) / 0.3));
  CHECK(se_step(0.01, 0.01, prior, 0.3, m.sigma2_e) == doctest::Approx(se_step(0.02, 0.0, prior, 0.3, m.sigma2_e)));
  // Nondecreasing in the input variance.
  double prev = 0.0;
  for (double s = 1e-3; s < 0.3; s *= 1.3) {
    const double next = m.step(s);
    CHECK(next >= prev);
    prev = next;
  }
  const SETrace tr = se_trajectory(m, {}, 40);
  REQUIRE(tr.steady_state_t.has_value());
  CHECK(*tr.steady_state_t == 10);
  CHECK(tr.sdr_seq.front() == doctest::Approx(0.0).scale(1e-12));
  for (std::size_t t = 1; t < tr.sigma2_seq.size(); ++t) CHECK(tr.sigma2_seq[t] <= tr.sigma2_seq[t - 1]);
}

TEST_CASE("SDR from SE") {
  SeModel m{SignalPrior{0.05, 0.0, 1.0}, 0.3, 0.001, 16};
  CHECK(std::isinf(m.sdr_db(0.001)));
  CHECK(m.sdr_db(0.001 + m.rho()) == doctest::Approx(0.0).scale(1e-12));
}
