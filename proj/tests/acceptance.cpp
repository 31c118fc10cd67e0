// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Curves are cached in acceptance_rdcache.txt in the working directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include "mpamp/allocation.hpp"
#include "mpamp/denoiser.hpp"
#include "mpamp/error.hpp"
#include "mpamp/quantizer.hpp"
#include "mpamp/rans.hpp"
#include "mpamp/ratedist.hpp"
#include "mpamp/simulation.hpp"
#include "oracles.hpp"

using namespace mpamp;

namespace {

constexpr const char* kCachePath = "acceptance_rdcache.txt";

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s C%d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

const SignalPrior kPaperPrior(double eps) { return SignalPrior{eps, 0.0, 1.0}; }

ProblemConfig paper_problem(std::uint64_t seed = 1) {
  ProblemConfig c;
  c.N = 10000;
  c.M = 3000;
  c.P = 30;
  c.snr_db = 20.0;
  c.seed = seed;
  return c;
}

AllocationContext paper_context(double eps, std::shared_ptr<RdCurveCache> cache) {
  AllocationContext ctx;
  ctx.prior = kPaperPrior(eps);
  const ProblemConfig c = paper_problem();
  ctx.kappa = c.kappa();
  ctx.sigma2_e = c.sigma2_e(ctx.prior);
  ctx.P = c.P;
  ctx.rd = std::make_shared<TabulatedRdModel>(ctx.prior, ctx.P, RdCurveOptions{}, cache, 2);
  return ctx;
}

std::vector<double> centralized_se(double eps, int T) {
  return se_trajectory(SeModel::from_problem(paper_problem(), kPaperPrior(eps)), {}, T).sigma2_seq;
}

std::map<double, AllocationPlan> dp_plans;  // RD plans by epsilon, shared by C4 and C5

}  // namespace

int main() {
  setvbuf(stdout, nullptr, _IOLBF, 0);
  auto cache = std::make_shared<RdCurveCache>();
  cache->load(kCachePath);

  report(1, "SE steady state", [] {
    const int want[] = {8, 10, 20};
    const int tol[] = {1, 1, 2};
    const double eps[] = {0.03, 0.05, 0.10};
    bool ok = true;
    std::string d;
    for (int i = 0; i < 3; ++i) {
      const SETrace tr = se_trajectory(SeModel::from_problem(paper_problem(), kPaperPrior(eps[i])), {}, 100, 0.1);
      const int T = tr.steady_state_t.value_or(-1);
      ok = ok && std::abs(T - want[i]) <= tol[i];
      d += fmt("eps=%.2f T=%.0f (want %.0f+-%.0f) ", eps[i], T, want[i], tol[i]);
    }
    return Outcome{ok, d};
  });

  report(2, "centralized AMP tracks SE", [] {
    const int T = 10;
    // Per-seed SDR scatters by about 0.9 dB mid-trajectory at this size, so average a wider block.
    const int seeds = 20;
    const SeModel se = SeModel::from_problem(paper_problem(), kPaperPrior(0.05));
    const SETrace tr = se_trajectory(se, {}, T);
    std::vector<double> mean(T + 1, 0.0);
    for (int s = 1; s <= seeds; ++s) {
      const RunResult r = run_centralized(build_instance(paper_problem(s), kPaperPrior(0.05)), T);
      for (int t = 0; t <= T; ++t) mean[t] += r.records[t].sdr_db / seeds;
    }
    double worst = 0.0;
    int worst_t = 0;
    for (int t = 1; t <= T; ++t) {
      const double gap = std::abs(mean[t] - tr.sdr_seq[t]);
      if (gap > worst) {
        worst = gap;
        worst_t = t;
      }
    }
    return Outcome{worst <= 0.5, fmt("max |mean empirical - SE| = %.3f dB at t=%.0f over %.0f seeds (tol 0.5)", worst,
                                     worst_t, seeds)};
  });

  report(3, "decomposition exactness", [] {
    const ProblemInstance inst = build_instance(paper_problem(), kPaperPrior(0.05));
    RunOptions o;
    o.keep_estimates = true;
    const RunResult c = run_centralized(inst, 10, o);
    const RunResult m = run_mp(inst, MpSettings{}, 10, o);
    double worst = 0.0;
    for (int t = 1; t <= 10; ++t) {
      worst = std::max(worst, (c.estimates[t] - m.estimates[t]).norm() / c.estimates[t].norm());
    }
    return Outcome{worst <= 1e-8, fmt("P=30 max relative difference %.2e (tol 1e-8)", worst)};
  });

  report(4, "Table 1 DP rows", [&] {
    const double eps[] = {0.03, 0.05, 0.10};
    const int T[] = {8, 10, 20};
    const double rd_want[] = {16, 20, 40};
    const double ecsq_want[] = {18.04, 22.55, 45.10};
    bool ok = true;
    std::string d;
    for (int i = 0; i < 3; ++i) {
      const AllocationContext ctx = paper_context(eps[i], cache);
      const double s0 = SeModel::from_problem(paper_problem(), ctx.prior).sigma2_0();
      const AllocationPlan plan = dp_allocate(s0, 2.0 * T[i], T[i], 0.1, ctx).plan;
      cache->save(kCachePath);
      dp_plans[eps[i]] = plan;
      const double ecsq = plan_to_ecsq(plan).total_bits;
      ok = ok && std::abs(plan.total_bits - rd_want[i]) < 1e-9 && std::abs(ecsq - ecsq_want[i]) <= 0.01;
      d += fmt("eps=%.2f RD %.4f ECSQ %.4f (want %.2f) ", eps[i], plan.total_bits, ecsq, ecsq_want[i]);
    }
    return Outcome{ok, d};
  });

  report(5, "DP-MP-AMP end to end", [&] {
    const double eps = 0.05;
    const int T = 10;
    AllocationContext ctx = paper_context(eps, cache);
    if (!dp_plans.count(eps)) {
      dp_plans[eps] = dp_allocate(SeModel::from_problem(paper_problem(), ctx.prior).sigma2_0(), 20.0, T, 0.1, ctx).plan;
    }
    const ProblemInstance inst = build_instance(paper_problem(), ctx.prior);
    MpSettings s;
    s.mode = MpMode::kDp;
    s.coder = CoderKind::kEcsq;
    s.plan = plan_to_ecsq(dp_plans[eps]);
    s.ctx = ctx;
    const RunResult d = run_mp(inst, s, T);
    const RunResult c = run_centralized(inst, T);
    const double final_gap = c.records[T].sdr_db - d.records[T].sdr_db;
    const double early_gap = c.records[2].sdr_db - d.records[2].sdr_db;
    const bool ok = std::abs(final_gap) <= 0.5 && early_gap > 1.0 && final_gap < 0.5;
    return Outcome{ok, fmt("deficit t=2 %.2f dB (want >1), t=T %.2f dB (want <0.5); final SDR %.2f vs %.2f dB",
                           early_gap, final_gap, d.records[T].sdr_db, c.records[T].sdr_db)};
  });

  report(6, "BT-MP-AMP defaults", [&] {
    const double eps = 0.05;
    const int T = 10;
    AllocationContext ctx = paper_context(eps, cache);
    const ProblemInstance inst = build_instance(paper_problem(), ctx.prior);
    MpSettings s;
    s.mode = MpMode::kBt;
    s.coder = CoderKind::kEcsq;
    s.bt = BTPolicy{1.1, 6.0};
    s.ctx = ctx;
    s.sigma2_C = centralized_se(eps, T);
    const RunResult d = run_mp(inst, s, T);
    const RunResult c = run_centralized(inst, T);
    cache->save(kCachePath);
    double max_rate = 0.0;
    double worst = 0.0;
    double ecsq = 0.0;
    double rd = 0.0;
    for (int t = 1; t <= T; ++t) {
      max_rate = std::max(max_rate, d.records[t].rate_bits);
      worst = std::max(worst, std::abs(c.records[t].sdr_db - d.records[t].sdr_db));
      ecsq += d.records[t].rate_bits;
      rd += d.records[t].rd_bits;
    }
    const bool ok = max_rate < 6.0 && worst <= 0.3;
    return Outcome{ok, fmt("max rate %.3f bits (want <6), max SDR gap %.2f dB (want <=0.3); totals ECSQ %.2f RD %.2f "
                           "(paper band 33.82-101.50)",
                           max_rate, worst, ecsq, rd)};
  });

  report(7, "entropy coder", [] {
    std::mt19937_64 rng(2024);
    std::vector<RansModel> models;
    std::vector<std::vector<double>> probs;
    for (int m = 0; m < 500; ++m) {
      const int k = 1 + static_cast<int>(rng() % 300);
      std::vector<double> p(k);
      std::exponential_distribution<double> ex(1.0);
      for (auto& v : p) v = std::pow(ex(rng), 4.0) + 1e-15;
      probs.push_back(p);
      models.push_back(RansModel::from_probabilities(p));
    }
    long vectors = 0;
    long mismatches = 0;
    for (; vectors < 1000000; ++vectors) {
      const std::size_t m = rng() % models.size();
      const std::size_t len = rng() % 40;
      std::vector<std::uint32_t> sym(len);
      for (auto& s : sym) s = static_cast<std::uint32_t>(rng() % models[m].alphabet_size());
      const auto bytes = rans_encode(sym, models[m]);
      if (rans_decode(bytes, len, models[m]) != sym) ++mismatches;
    }
    // Rate against the model entropy on the per-processor source at N = 1e4.
    double worst = 0.0;
    const SignalPrior prior = kPaperPrior(0.05);
    for (double sigma2 : {0.003, 0.03}) {
      const ScalarSourceModel src(prior, sigma2, 30);
      for (double rate : {1.0, 2.0, 4.0, 6.0}) {
        const QuantizerSpec spec = design(src, delta_for_rate(src, rate));
        std::bernoulli_distribution act(prior.epsilon);
        std::normal_distribution<double> n01(0.0, 1.0);
        Vector x(10000);
        for (auto& v : x) v = act(rng) ? src.slab_mean() + src.slab_sd() * n01(rng) : src.zero_sd() * n01(rng);
        const QuantizedValues q = quantize(x, spec);
        const CodedBlock block = encode(q.indices, spec);
        if (decode(block, spec) != q.indices) ++mismatches;
        worst = std::max(worst, std::abs(block.payload_bits() / 1e4 - spec.entropy_bits));
      }
    }
    return Outcome{mismatches == 0 && worst <= 0.05,
                   fmt("%.0f random vectors, %.0f mismatches; max |measured - H_Q| = %.4f bits (tol 0.05)",
                       static_cast<double>(vectors), static_cast<double>(mismatches), worst)};
  });

  report(8, "Blahut-Arimoto calibration", [] {
    // Pure-slab prior with P = 1 gives a Gaussian source of variance 1 + sigma2.
    const ScalarSourceModel gauss(SignalPrior{1.0, 0.0, 1.0}, 1.0, 1);
    const DiscreteSource d = discretize(gauss, 2001);
    double worst_gauss = 0.0;
    std::string detail;
    for (double ratio : {0.5, 0.25, 0.1, 0.01}) {
      const RdPoint pt = rd_point_at_distortion(d, ratio * gauss.variance());
      const double err = pt.rate_bits - oracle::gaussian_rate_bits(gauss.variance(), pt.distortion);
      worst_gauss = std::max(worst_gauss, std::abs(err));
    }
    const SignalPrior prior = kPaperPrior(0.05);
    double lo = 1e9;
    double hi = -1e9;
    for (double sigma2 : {0.0025, 0.01, 0.05}) {
      const ScalarSourceModel src(prior, sigma2, 30);
      const RDCurve c = rd_curve(src, default_rate_grid());
      for (double r : {4.0, 4.5, 5.0}) {
        const double gap = quantizer_entropy(src, delta_for_mse(distortion_at_rate(c, r))) - r;
        lo = std::min(lo, gap);
        hi = std::max(hi, gap);
      }
    }
    const bool ok = worst_gauss <= 0.01 && lo >= 0.15 && hi <= 0.35;
    return Outcome{ok, fmt("Gaussian max |R - closed form| = %.4f bits (tol 0.01); ECSQ-RD gap at R>=4 in [%.3f, %.3f] "
                           "(want within [0.15, 0.35])",
                           worst_gauss, lo, hi)};
  });

  report(9, "DP optimality oracle", [&] {
    const AllocationContext ctx = paper_context(0.05, cache);
    struct Case {
      double s0, R, dR;
    };
    const Case cases[] = {{0.17, 1.4, 0.2}, {0.17, 0.7, 0.1}, {0.05, 3.5, 0.5}, {0.01, 2.1, 0.3}, {0.005, 0.6, 0.1}};
    int matched = 0;
    int n = 0;
    for (const Case& k : cases) {
      const int T = 3;
      const int steps = static_cast<int>(std::lround(k.R / k.dR));
      const DpResult dp = dp_allocate(k.s0, k.R, T, k.dR, ctx);
      double best = std::numeric_limits<double>::infinity();
      std::vector<int> best_alloc;
      for (int a = 0; a <= steps; ++a) {
        for (int b = 0; a + b <= steps; ++b) {
          const int c = steps - a - b;
          double s2 = k.s0;
          for (int x : {a, b, c}) s2 = f1(s2, x * k.dR, ctx);
          if (s2 < best) {
            best = s2;
            best_alloc = {a, b, c};
          }
        }
      }
      bool same = dp.plan.predicted_sigma2.back() == best;
      for (int t = 0; t < T; ++t) same = same && std::lround(dp.plan.rates[t] / k.dR) == best_alloc[t];
      matched += same;
      ++n;
    }
    cache->save(kCachePath);
    return Outcome{matched == n, fmt("%.0f of %.0f instances (T=3, S<=8) match exhaustive search exactly", matched, n)};
  });

  report(10, "denoiser analytics", [] {
    double worst_eta = 0.0;
    double worst_prime = 0.0;
    for (const auto& [prior, v] : std::vector<std::pair<SignalPrior, double>>{
             {SignalPrior{0.05, 0.0, 1.0}, 0.01}, {SignalPrior{0.1, 0.0, 1.0}, 0.003}, {SignalPrior{0.2, 0.5, 2.0}, 0.3}}) {
      const EffectiveChannel ch(v);
      for (int i = 0; i < 1000; ++i) {
        const double f = -3.0 + 6.0 * (i + 0.5) / 1000.0;
        const double want = oracle::posterior_mean(f, v, prior.epsilon, prior.mu_s, prior.sigma_s);
        worst_eta = std::max(worst_eta, std::abs(eta(f, ch, prior) - want) / std::abs(want));
        const double h = 1e-4 * std::sqrt(v);
        const double fd = (8.0 * (eta(f + h, ch, prior) - eta(f - h, ch, prior)) -
                           (eta(f + 2 * h, ch, prior) - eta(f - 2 * h, ch, prior))) /
                          (12.0 * h);
        worst_prime = std::max(worst_prime, std::abs(eta_prime(f, ch, prior) - fd) / std::abs(fd));
      }
    }
    return Outcome{worst_eta <= 1e-8 && worst_prime <= 1e-5,
                   fmt("eta max rel err %.2e (tol 1e-8), eta' max rel err %.2e (tol 1e-5), 3 x 1000 points", worst_eta,
                       worst_prime)};
  });

  report(11, "quantization-noise model", [] {
    const int N = 10000;
    const int P = 30;
    const SignalPrior prior = kPaperPrior(0.05);
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n01(0.0, 1.0);
    double worst_var = 0.0;
    double worst_kurt = 0.0;
    std::string corr_detail;
    bool corr_ok = true;
    // Sweep the whole admissible range of bin widths, up to the bound 2 sigma_t / sqrt(P).
    for (double frac : {1.0, 0.75, 0.5, 0.25}) {
      double worst_corr = 0.0;
      for (double sigma2 : {0.003, 0.01, 0.05}) {
        const ScalarSourceModel src(prior, sigma2, P);
        const QuantizerSpec spec = design(src, frac * 2.0 * std::sqrt(sigma2 / P));
        const Vector s0 = sample_signal(prior, N, rng());
        Vector agg = Vector::Zero(N);
        double se = 0.0, sx = 0.0, see = 0.0, sxx = 0.0, sxe = 0.0;
        for (int p = 0; p < P; ++p) {
          Vector f(N);
          for (int i = 0; i < N; ++i) f[i] = s0[i] / P + std::sqrt(sigma2 / P) * n01(rng);
          const Vector e = quantize(f, spec).reconstruction - f;
          agg += e;
          se += e.sum();
          sx += f.sum();
          see += e.squaredNorm();
          sxx += f.squaredNorm();
          sxe += e.dot(f);
        }
        const double n = static_cast<double>(N) * P;
        const double var_e = see / n - (se / n) * (se / n);
        const double var_x = sxx / n - (sx / n) * (sx / n);
        const double corr = (sxe / n - (se / n) * (sx / n)) / std::sqrt(var_e * var_x);
        worst_var = std::max(worst_var, std::abs(var_e / spec.model_mse - 1.0));
        worst_corr = std::max(worst_corr, std::abs(corr));
        const double m = agg.mean();
        const double m2 = (agg.array() - m).square().mean();
        const double m4 = (agg.array() - m).pow(4).mean();
        worst_kurt = std::max(worst_kurt, std::abs(m4 / (m2 * m2) - 3.0));
      }
      corr_ok = corr_ok && worst_corr < 0.01;
      corr_detail += fmt("%.2f:%.4f ", frac * 2.0, worst_corr);
    }
    return Outcome{worst_var <= 0.05 && corr_ok && worst_kurt <= 0.2,
                   fmt("max |var/(D^2/12) - 1| = %.4f (tol 0.05), max |kurtosis - 3| = %.3f (tol 0.2); ", worst_var,
                       worst_kurt) +
                       "max |corr| by delta/(sigma_t/sqrt(P)) " + corr_detail + "(tol 0.01)"};
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
