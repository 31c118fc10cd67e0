#include "mpamp/allocation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "mpamp/error.hpp"

namespace mpamp {

void BTPolicy::validate() const {
  if (!(gamma > 1.0)) throw ParameterError("bt.gamma must exceed 1");
  if (!(rate_cap_bits > 0.0)) throw ParameterError("bt.rate_cap_bits must be positive");
}

void AllocationPlan::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write plan file " + path);
  out << "t,R_t,predicted_sigma2\n";
  char line[128];
  for (std::size_t i = 0; i < rates.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", i + 1, rates[i], predicted_sigma2[i]);
    out << line;
  }
}

AllocationPlan AllocationPlan::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read plan file " + path);
  AllocationPlan plan;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int t = 0;
    double r = 0.0;
    double s2 = 0.0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &t, &r, &s2) != 3 || t != plan.T() + 1) {
      throw Error("malformed plan line in " + path + ": " + line);
    }
    plan.rates.push_back(r);
    plan.predicted_sigma2.push_back(s2);
    plan.total_bits += r;
  }
  return plan;
}

double f1(double sigma2_prev, double rate_bits, const AllocationContext& ctx) {
  if (!ctx.rd) throw ParameterError("f1: no rate-distortion model");
  const double d = ctx.rd->distortion(sigma2_prev, rate_bits);
  return se_step(sigma2_prev, ctx.P * d, ctx.prior, ctx.kappa, ctx.sigma2_e, ctx.quad_order);
}

namespace {

double ecsq_distortion(const ScalarSourceModel& source, double rate_bits) {
  if (rate_bits <= 0.0) return source.variance();
  return model_mse(delta_for_rate(source, rate_bits));
}

}  // namespace

double f1_ecsq(double sigma2_prev, double rate_bits, const AllocationContext& ctx) {
  const ScalarSourceModel source(ctx.prior, sigma2_prev, ctx.P);
  const double d = ecsq_distortion(source, rate_bits);
  return se_step(sigma2_prev, ctx.P * d, ctx.prior, ctx.kappa, ctx.sigma2_e, ctx.quad_order);
}

BtDecision bt_step(double sigma2_hat_D, double sigma2_next_C, const BTPolicy& policy, const AllocationContext& ctx) {
  policy.validate();
  if (!(sigma2_hat_D > 0.0) || !(sigma2_next_C > 0.0)) throw ParameterError("bt_step: variances must be positive");
  const ScalarSourceModel source(ctx.prior, sigma2_hat_D, ctx.P);
  const double target = policy.gamma * sigma2_next_C;
  auto predicted = [&](double rate) {
    return se_step(sigma2_hat_D, ctx.P * ecsq_distortion(source, rate), ctx.prior, ctx.kappa, ctx.sigma2_e,
                   ctx.quad_order);
  };
  BtDecision out;
  if (predicted(0.0) <= target) {
    out.sigma2_Q = source.variance();
    return out;
  }
  if (predicted(policy.rate_cap_bits) > target) {
    out.rate_bits = policy.rate_cap_bits;
    out.sigma2_Q = ecsq_distortion(source, policy.rate_cap_bits);
    out.capped = true;
    return out;
  }
  double lo = 0.0;
  double hi = policy.rate_cap_bits;
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    if (predicted(mid) <= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.rate_bits = hi;
  out.sigma2_Q = ecsq_distortion(source, hi);
  return out;
}

DpResult dp_allocate(double sigma2_0, double R_total, int T, double delta_R, const AllocationContext& ctx) {
  if (T < 1) throw ParameterError("dp_allocate: T must be at least 1");
  if (!(delta_R > 0.0) || !(R_total >= 0.0)) throw ParameterError("dp_allocate: rates must be positive");
  const double steps = R_total / delta_R;
  const long rounded = std::lround(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
    throw ParameterError("dp_allocate: delta_R does not divide R_total");
  }
  const int S = static_cast<int>(rounded) + 1;
  auto rate_of = [&](int s) { return s * delta_R; };  // R^(s+1) with zero-based s

  DpResult result;
  DPTables& tab = result.tables;
  tab.S = S;
  tab.delta_R = delta_R;
  tab.sigma2_table.assign(S, std::vector<double>(T, 0.0));
  tab.rate_table.assign(S, std::vector<double>(T, 0.0));
  tab.from_row.assign(S, std::vector<int>(T, -1));

  for (int s = 0; s < S; ++s) {
    tab.sigma2_table[s][0] = f1(sigma2_0, rate_of(s), ctx);
    tab.rate_table[s][0] = rate_of(s);
  }
  for (int t = 1; t < T; ++t) {
    // Each (r, s - r) pair appears once across the column, so nothing is recomputed.
    for (int s = 0; s < S; ++s) {
      double best = std::numeric_limits<double>::infinity();
      int best_r = -1;
      for (int r = 0; r <= s; ++r) {
        const double v = f1(tab.sigma2_table[r][t - 1], rate_of(s - r), ctx);
        if (v < best) {  // strict: ties keep the smaller r
          best = v;
          best_r = r;
        }
      }
      tab.sigma2_table[s][t] = best;
      tab.rate_table[s][t] = rate_of(s - best_r);
      tab.from_row[s][t] = best_r;
    }
  }

  AllocationPlan& plan = result.plan;
  plan.rates.assign(T, 0.0);
  plan.predicted_sigma2.assign(T, 0.0);
  int s = S - 1;
  for (int t = T - 1; t >= 0; --t) {
    plan.rates[t] = tab.rate_table[s][t];
    plan.predicted_sigma2[t] = tab.sigma2_table[s][t];
    if (t > 0) s = tab.from_row[s][t];
  }
  // Rates are multiples of delta_R; summing integer step counts keeps the total exact.
  long total_steps = 0;
  for (double r : plan.rates) total_steps += std::lround(r / delta_R);
  plan.total_bits = total_steps * delta_R;
  return result;
}

AllocationPlan plan_to_ecsq(const AllocationPlan& plan, double ecsq_gap_bits) {
  AllocationPlan out = plan;
  out.total_bits = 0.0;
  for (double& r : out.rates) {
    r += ecsq_gap_bits;
    out.total_bits += r;
  }
  return out;
}

}  // namespace mpamp
