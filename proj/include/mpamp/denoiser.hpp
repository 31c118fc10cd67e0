#pragma once

#include <optional>
#include <vector>

#include "mpamp/model.hpp"

namespace mpamp {

/// Variance of the effective scalar channel F = S0 + sqrt(sigma2) Z seen by the denoiser.
struct EffectiveChannel {
  double sigma2;

  explicit EffectiveChannel(double variance);
};

/// Conditional-mean (MMSE) denoiser for the Bernoulli-Gaussian prior on a Gaussian channel.
///
/// The slab responsibility pi(f) is a logistic function of the log-odds
///   log[eps N(f; mu_s, sigma_s^2 + v)] - log[(1 - eps) N(f; 0, v)],
/// which is a quadratic in f; the estimate is pi(f) times the slab posterior mean.
class BernoulliGaussDenoiser {
 public:
  BernoulliGaussDenoiser(const SignalPrior& prior, EffectiveChannel channel);

  struct Evaluation {
    double value;
    double derivative;
    double responsibility;
  };

  double operator()(double f) const { return evaluate(f).value; }
  double derivative(double f) const { return evaluate(f).derivative; }
  Evaluation evaluate(double f) const;

  double log_odds(double f) const;
  /// E[S0 | F = f, slab component] = (sigma_s^2 f + v mu_s) / (sigma_s^2 + v).
  double slab_mean(double f) const { return gain_ * f + bias_; }
  /// Real roots of log_odds(f) = 0 (zero, one or two points).
  std::vector<double> transition_points() const;

  const SignalPrior& prior() const { return prior_; }
  double channel_variance() const { return v_; }

 private:
  SignalPrior prior_;
  double v_;
  double slab_total_;  // sigma_s^2 + v
  double gain_;        // sigma_s^2 / (sigma_s^2 + v)
  double bias_;        // v mu_s / (sigma_s^2 + v)
  // log_odds(f) = c0_ + c1_ f + c2_ f^2
  double c0_;
  double c1_;
  double c2_;
  bool pure_slab_;
};

/// eta(f) = E[S0 | S0 + sqrt(v) Z = f]. Throws InputError for non-finite f.
double eta(double f, EffectiveChannel channel, const SignalPrior& prior);
/// Analytic derivative of eta with respect to f.
double eta_prime(double f, EffectiveChannel channel, const SignalPrior& prior);

/// Scalar-channel context shared by the state-evolution recursions.
struct SeModel {
  SignalPrior prior;
  double kappa = 0.3;
  double sigma2_e = 0.0;
  /// Gauss-Legendre nodes per panel in the MSE integral.
  int quad_order = 16;

  static SeModel from_problem(const ProblemConfig& config, const SignalPrior& prior);

  double rho() const { return prior.second_moment() / kappa; }
  /// sigma2_e + E[S0^2] / kappa.
  double sigma2_0() const { return sigma2_e + prior.second_moment() / kappa; }
  double step(double sigma2_t, double added_var = 0.0) const;
  /// SE-implied SDR 10 log10(rho / (sigma2 - sigma2_e)); +inf when sigma2 <= sigma2_e.
  double sdr_db(double sigma2) const;
};

/// E[(eta(S0 + sqrt(v) Z) - S0)^2] with eta tuned to the same channel variance v.
double denoiser_mse(double v, const SignalPrior& prior, int quad_order = 16);

/// sigma2_e + (1/kappa) E[(eta(S0 + sqrt(sigma2_t + added_var) Z) - S0)^2].
/// added_var is the aggregated quantization noise P sigma2_Q; zero gives the centralized recursion.
double se_step(double sigma2_t, double added_var, const SignalPrior& prior, double kappa,
               double sigma2_e, int quad_order = 16);

struct SETrace {
  std::vector<double> sigma2_seq;  // sigma2_0 .. sigma2_T
  std::vector<double> sdr_seq;     // dB, +inf sentinel allowed
  /// Iteration count t >= 1 at which |SDR(t) - SDR(t-1)| first drops below the tolerance.
  std::optional<int> steady_state_t;
};

/// Iterates se_step from sigma2_0 for T_max steps. added_var_seq[t] is applied on the
/// step producing sigma2_{t+1}; missing entries count as zero.
SETrace se_trajectory(const SeModel& model, const std::vector<double>& added_var_seq, int T_max,
                      double steady_tol_db = 0.1);

}  // namespace mpamp
