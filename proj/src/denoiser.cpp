#include "mpamp/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "mpamp/error.hpp"
#include "mpamp/quadrature.hpp"

namespace mpamp {

namespace {

constexpr double kTailSigmas = 12.0;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gauss_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * u * u);
}

}  // namespace

EffectiveChannel::EffectiveChannel(double variance) : sigma2(variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ParameterError("EffectiveChannel: variance must be positive and finite, got " +
                         std::to_string(variance));
  }
}

BernoulliGaussDenoiser::BernoulliGaussDenoiser(const SignalPrior& prior, EffectiveChannel channel)
    : prior_(prior), v_(channel.sigma2) {
  prior_.validate();
  const double s2 = prior_.slab_variance();
  slab_total_ = s2 + v_;
  gain_ = s2 / slab_total_;
  bias_ = v_ * prior_.mu_s / slab_total_;
  pure_slab_ = prior_.epsilon >= 1.0;
  c2_ = 0.5 * s2 / (v_ * slab_total_);
  c1_ = prior_.mu_s / slab_total_;
  c0_ = pure_slab_ ? 0.0
                   : std::log(prior_.epsilon / (1.0 - prior_.epsilon)) - 0.5 * std::log1p(s2 / v_) -
                         0.5 * prior_.mu_s * prior_.mu_s / slab_total_;
}

double BernoulliGaussDenoiser::log_odds(double f) const {
  if (pure_slab_) return std::numeric_limits<double>::infinity();
  return c0_ + f * (c1_ + c2_ * f);
}

BernoulliGaussDenoiser::Evaluation BernoulliGaussDenoiser::evaluate(double f) const {
  const double m = slab_mean(f);
  if (pure_slab_) return {m, gain_, 1.0};
  const double L = log_odds(f);
  const double pi = 1.0 / (1.0 + std::exp(-L));
  const double one_minus_pi = 1.0 / (1.0 + std::exp(L));
  const double dL = c1_ + 2.0 * c2_ * f;
  return {pi * m, pi * one_minus_pi * dL * m + pi * gain_, pi};
}

std::vector<double> BernoulliGaussDenoiser::transition_points() const {
  if (pure_slab_) return {};
  const double disc = c1_ * c1_ - 4.0 * c2_ * c0_;
  if (disc < 0.0) return {};
  const double sq = std::sqrt(disc);
  // Numerically stable quadratic roots.
  const double q = -0.5 * (c1_ + std::copysign(sq, c1_ == 0.0 ? 1.0 : c1_));
  std::vector<double> roots;
  if (q != 0.0) {
    roots.push_back(q / c2_);
    roots.push_back(c0_ / q);
  } else {
    roots.push_back(0.0);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

double eta(double f, EffectiveChannel channel, const SignalPrior& prior) {
  if (!std::isfinite(f)) throw InputError("eta: non-finite input");
  return BernoulliGaussDenoiser(prior, channel)(f);
}

double eta_prime(double f, EffectiveChannel channel, const SignalPrior& prior) {
  if (!std::isfinite(f)) throw InputError("eta_prime: non-finite input");
  return BernoulliGaussDenoiser(prior, channel).derivative(f);
}

double denoiser_mse(double v, const SignalPrior& prior, int quad_order) {
  const BernoulliGaussDenoiser denoiser(prior, EffectiveChannel(v));
  const double s2 = prior.slab_variance();
  const double posterior_var = s2 * v / (s2 + v);
  const double eps = prior.epsilon;
  if (eps >= 1.0) return posterior_var;

  const double sd_zero = std::sqrt(v);
  const double sd_slab = std::sqrt(s2 + v);
  const double mu = prior.mu_s;
  const double lo = std::min(-kTailSigmas * sd_zero, mu - kTailSigmas * sd_slab);
  const double hi = std::max(kTailSigmas * sd_zero, mu + kTailSigmas * sd_slab);

  std::vector<double> points;
  for (int k = -12; k <= 12; ++k) {
    points.push_back(k * sd_zero);
    points.push_back(mu + k * sd_slab);
  }
  // Refine geometrically around the responsibility transitions.
  for (double r : denoiser.transition_points()) {
    const double slope = std::abs(2.0 * (0.5 * s2 / (v * (s2 + v))) * r + mu / (s2 + v));
    const double width = slope > 0.0 ? 1.0 / slope : sd_zero;
    for (int j = -3; j <= 10; ++j) {
      const double d = width * std::ldexp(1.0, j);
      points.push_back(r - d);
      points.push_back(r + d);
    }
    points.push_back(r);
  }
  const auto breaks = normalize_breakpoints(std::move(points), lo, hi);

  // Slab branch uses E[(eta - S0)^2 | F] = (eta - m(F))^2 + Var(S0 | F, slab).
  auto integrand = [&](double f) {
    const auto e = denoiser.evaluate(f);
    const double dev = e.value - denoiser.slab_mean(f);
    return (1.0 - eps) * gauss_pdf(f, 0.0, sd_zero) * e.value * e.value +
           eps * gauss_pdf(f, mu, sd_slab) * dev * dev;
  };
  const double mse =
      integrate_panels(integrand, breaks, gauss_legendre_cached(quad_order)) + eps * posterior_var;
  if (!std::isfinite(mse) || mse < 0.0) {
    std::ostringstream msg;
    msg << "denoiser_mse: quadrature produced " << mse << " (v=" << v << ", epsilon=" << eps
        << ", mu_s=" << mu << ", sigma_s=" << prior.sigma_s << ", panels=" << breaks.size() - 1
        << ")";
    throw NumericalError(msg.str());
  }
  return mse;
}

double se_step(double sigma2_t, double added_var, const SignalPrior& prior, double kappa,
               double sigma2_e, int quad_order) {
  if (!(sigma2_t > 0.0) || !(added_var >= 0.0) || !(kappa > 0.0) || !(sigma2_e >= 0.0)) {
    throw ParameterError("se_step: invalid arguments");
  }
  return sigma2_e + denoiser_mse(sigma2_t + added_var, prior, quad_order) / kappa;
}

SeModel SeModel::from_problem(const ProblemConfig& config, const SignalPrior& prior) {
  SeModel m;
  m.prior = prior;
  m.kappa = config.kappa();
  m.sigma2_e = config.sigma2_e(prior);
  return m;
}

double SeModel::step(double sigma2_t, double added_var) const {
  return se_step(sigma2_t, added_var, prior, kappa, sigma2_e, quad_order);
}

double SeModel::sdr_db(double sigma2) const {
  const double excess = sigma2 - sigma2_e;
  if (!(excess > 0.0)) return kInfiniteSdr;
  return 10.0 * std::log10(rho() / excess);
}

SETrace se_trajectory(const SeModel& model, const std::vector<double>& added_var_seq, int T_max,
                      double steady_tol_db) {
  if (T_max < 1) throw ParameterError("se_trajectory: T_max must be at least 1");
  SETrace trace;
  double sigma2 = model.sigma2_0();
  trace.sigma2_seq.push_back(sigma2);
  trace.sdr_seq.push_back(model.sdr_db(sigma2));
  for (int t = 0; t < T_max; ++t) {
    const double added = t < static_cast<int>(added_var_seq.size()) ? added_var_seq[t] : 0.0;
    sigma2 = model.step(sigma2, added);
    trace.sigma2_seq.push_back(sigma2);
    trace.sdr_seq.push_back(model.sdr_db(sigma2));
    const double a = trace.sdr_seq[t];
    const double b = trace.sdr_seq[t + 1];
    const bool settled = (std::isinf(a) && std::isinf(b)) || std::abs(b - a) < steady_tol_db;
    if (!trace.steady_state_t && settled) trace.steady_state_t = t + 1;
  }
  return trace;
}

}  // namespace mpamp
