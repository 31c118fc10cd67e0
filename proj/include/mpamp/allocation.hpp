#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mpamp/denoiser.hpp"
#include "mpamp/ratedist.hpp"

namespace mpamp {

struct BTPolicy {
  /// Largest tolerated ratio sigma2_{t+1,D} / sigma2_{t+1,C}.
  double gamma = 1.1;
  double rate_cap_bits = 6.0;

  void validate() const;
};

/// What the rate decisions need to know about the problem.
struct AllocationContext {
  SignalPrior prior;
  double kappa = 0.3;
  double sigma2_e = 0.0;
  int P = 1;
  std::shared_ptr<const RateDistortionModel> rd;
  int quad_order = 16;

  SeModel se_model() const { return SeModel{prior, kappa, sigma2_e, quad_order}; }
};

struct AllocationPlan {
  std::vector<double> rates;             // R_1..R_T, bits per element
  std::vector<double> predicted_sigma2;  // sigma2_{t,D} after iteration t
  double total_bits = 0.0;

  int T() const { return static_cast<int>(rates.size()); }
  /// One line per iteration: "t,R_t,predicted_sigma2" under a header line.
  void save_csv(const std::string& path) const;
  static AllocationPlan load_csv(const std::string& path);
};

/// Column t-1 of each table is iteration t; row s-1 is a total budget of (s-1) delta_R.
struct DPTables {
  std::vector<std::vector<double>> sigma2_table;  // [s][t]
  std::vector<std::vector<double>> rate_table;    // [s][t], rate spent at iteration t
  std::vector<std::vector<int>> from_row;         // [s][t], row of the predecessor cell
  double delta_R = 0.1;
  int S = 0;
};

/// One distributed SE step with RD-coded messages:
/// se_step(sigma2_prev, P D(sigma2_prev, R_t)).
double f1(double sigma2_prev, double rate_bits, const AllocationContext& ctx);

/// The same step with an ECSQ coder whose entropy is rate_bits; zero rate sends nothing
/// and leaves the whole source variance as noise.
double f1_ecsq(double sigma2_prev, double rate_bits, const AllocationContext& ctx);

struct BtDecision {
  double rate_bits = 0.0;
  double sigma2_Q = 0.0;
  bool capped = false;
};

/// Smallest ECSQ rate (1e-3-bit resolution) keeping f1_ecsq(sigma2_hat_D, R) <= gamma sigma2_next_C,
/// or the cap when no rate below it suffices.
BtDecision bt_step(double sigma2_hat_D, double sigma2_next_C, const BTPolicy& policy, const AllocationContext& ctx);

struct DpResult {
  AllocationPlan plan;
  DPTables tables;
};

/// Minimises the predicted final sigma2_{T,D} over allocations on the delta_R grid summing to R_total.
DpResult dp_allocate(double sigma2_0, double R_total, int T, double delta_R, const AllocationContext& ctx);

/// Realisable ECSQ version of an RD plan: every rate grows by ecsq_gap_bits.
AllocationPlan plan_to_ecsq(const AllocationPlan& plan, double ecsq_gap_bits = 0.255);

}  // namespace mpamp
