#include "mpamp/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "mpamp/denoiser.hpp"
#include "mpamp/error.hpp"

namespace mpamp {

namespace {

// Keeps the denoiser defined when the residual vanishes (exact recovery, zero signal).
constexpr double kMinChannelVariance = 1e-300;

constexpr double kRawBitsPerElement = 64.0;

struct Denoised {
  Vector x;
  double eta_prime_mean;
};

Denoised denoise(const Vector& f, const SignalPrior& prior, double variance) {
  const BernoulliGaussDenoiser eta(prior, EffectiveChannel(std::max(variance, kMinChannelVariance)));
  Denoised out{Vector(f.size()), 0.0};
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) throw InputError("denoiser input is not finite");
    const auto e = eta.evaluate(f[i]);
    out.x[i] = e.value;
    sum += e.derivative;
  }
  out.eta_prime_mean = f.size() > 0 ? sum / static_cast<double>(f.size()) : 0.0;
  return out;
}

IterationRecord start_record(const ProblemInstance& instance, double sigma2_hat, double sigma2_0) {
  IterationRecord r;
  r.t = 0;
  r.sigma2_hat = sigma2_hat;
  r.sigma2_pred = sigma2_0;
  r.sdr_db = empirical_sdr(Vector::Zero(instance.s0().size()), instance.s0());
  return r;
}

/// One logical processor: owns its residual, sees only its row block and the downlink.
class Processor {
 public:
  Processor(int index, const ProblemInstance& instance, RowRange rows)
      : index_(index),
        A_(instance.A().middleRows(rows.begin, rows.size())),
        y_(instance.y().segment(rows.begin, rows.size())),
        z_(y_),
        P_(instance.config().P),
        inv_kappa_(1.0 / instance.config().kappa()) {}

  double residual_energy() const { return z_.squaredNorm(); }

  UplinkMessage uplink(const Vector& x, const IterationCoding& coding) const {
    Vector f = x / static_cast<double>(P_);
    f.noalias() += A_.transpose() * z_;
    UplinkMessage msg;
    msg.processor = index_;
    msg.residual_energy = residual_energy();
    if (!coding.compressed) {
      msg.raw = std::move(f);
    } else if (!coding.zero_rate) {
      const QuantizedValues q = quantize(f, coding.spec);
      msg.block = encode(q.indices, coding.spec);
      msg.spec_digest = coding.spec.digest;
    }
    return msg;
  }

  void apply(const DownlinkMessage& down) {
    Vector next = y_;
    next.noalias() -= A_ * down.x_next;
    next += (inv_kappa_ * down.eta_prime_mean) * z_;
    z_ = std::move(next);
  }

 private:
  int index_;
  Matrix::ConstRowsBlockXpr A_;
  Vector y_;
  Vector z_;
  int P_;
  double inv_kappa_;
};

}  // namespace

bool RunResult::any_diverged() const {
  return std::any_of(records.begin(), records.end(), [](const IterationRecord& r) { return r.diverged; });
}

RunResult run_centralized(const ProblemInstance& instance, int T, const RunOptions& options) {
  if (T < 1) throw ParameterError("run_centralized: T must be at least 1");
  const ProblemConfig& cfg = instance.config();
  const SignalPrior& prior = instance.prior();
  const SeModel se{prior, cfg.kappa(), instance.sigma2_e(), options.quad_order};
  const double sigma2_0 = se.sigma2_0();
  const Matrix& A = instance.A();
  const Vector& y = instance.y();
  const double M = cfg.M;

  RunResult result;
  Vector x = Vector::Zero(cfg.N);
  Vector z = y;
  result.records.push_back(start_record(instance, z.squaredNorm() / M, sigma2_0));
  if (options.keep_estimates) result.estimates.push_back(x);
  double pred = sigma2_0;
  for (int t = 0; t < T; ++t) {
    const double v = z.squaredNorm() / M;
    Vector f = x;
    f.noalias() += A.transpose() * z;
    Denoised d = denoise(f, prior, v);
    x = std::move(d.x);
    Vector next = y;
    next.noalias() -= A * x;
    next += (d.eta_prime_mean / cfg.kappa()) * z;
    z = std::move(next);

    pred = se.step(pred);
    IterationRecord r;
    r.t = t + 1;
    r.sigma2_hat = z.squaredNorm() / M;
    r.sigma2_pred = pred;
    r.sdr_db = empirical_sdr(x, instance.s0());
    r.diverged = !(r.sigma2_hat <= options.divergence_factor * sigma2_0);
    result.records.push_back(r);
    if (options.keep_estimates) result.estimates.push_back(x);
  }
  return result;
}

DownlinkMessage fusion_aggregate(const std::vector<UplinkMessage>& messages, int P, int N,
                                 const IterationCoding& coding, const SignalPrior& prior, double channel_variance,
                                 double sigma2_hat_D) {
  if (static_cast<int>(messages.size()) != P) {
    throw Error("fusion: expected " + std::to_string(P) + " uplink messages, got " + std::to_string(messages.size()));
  }
  // Fixed summation order regardless of arrival order.
  std::vector<const UplinkMessage*> ordered(P, nullptr);
  for (const auto& m : messages) {
    if (m.processor < 0 || m.processor >= P || ordered[m.processor]) {
      throw Error("fusion: bad or duplicate processor index " + std::to_string(m.processor));
    }
    ordered[m.processor] = &m;
  }
  Vector f = Vector::Zero(N);
  for (const UplinkMessage* m : ordered) {
    if (!coding.compressed) {
      if (!m->raw || m->raw->size() != N) throw Error("fusion: missing raw uplink payload");
      f += *m->raw;
    } else if (coding.zero_rate) {
      f.array() += coding.source_mean;
    } else {
      if (!m->block) throw Error("fusion: missing coded uplink payload");
      const std::vector<std::int32_t> idx = decode(*m->block, coding.spec);
      if (static_cast<int>(idx.size()) != N) throw DecodeError("fusion: decoded length mismatch");
      for (int i = 0; i < N; ++i) f[i] += coding.spec.reconstruction(idx[i]);
    }
  }
  Denoised d = denoise(f, prior, channel_variance);
  return DownlinkMessage{std::move(d.x), d.eta_prime_mean, sigma2_hat_D};
}

RunResult run_mp(const ProblemInstance& instance, const MpSettings& settings, int T, const RunOptions& options) {
  if (T < 1) throw ParameterError("run_mp: T must be at least 1");
  const ProblemConfig& cfg = instance.config();
  const SignalPrior& prior = instance.prior();
  const int P = cfg.P;
  const int N = cfg.N;
  const SeModel se{prior, cfg.kappa(), instance.sigma2_e(), options.quad_order};
  const double sigma2_0 = se.sigma2_0();
  const bool compressed = settings.mode != MpMode::kUncompressed;
  if (settings.mode == MpMode::kDp && settings.plan.T() != T) {
    throw ParameterError("run_mp: plan length " + std::to_string(settings.plan.T()) + " differs from T = " +
                         std::to_string(T));
  }
  if (settings.mode == MpMode::kBt && settings.bt_reference == BtReference::kTrajectory &&
      static_cast<int>(settings.sigma2_C.size()) < T + 1) {
    throw ParameterError("run_mp: BT needs the centralized SE trajectory up to T");
  }
  if (compressed && settings.coder == CoderKind::kIdeal && !settings.ctx.rd) {
    throw ParameterError("run_mp: the ideal coder needs a rate-distortion model");
  }

  std::vector<Processor> processors;
  processors.reserve(P);
  const auto& ranges = instance.row_ranges();
  for (int p = 0; p < P; ++p) processors.emplace_back(p, instance, ranges[p]);

  auto gather_energy = [&] {
    double total = 0.0;
    for (const auto& proc : processors) total += proc.residual_energy();
    return total / cfg.M;
  };

  RunResult result;
  Vector x = Vector::Zero(N);
  double sigma2_hat = gather_energy();
  result.records.push_back(start_record(instance, sigma2_hat, sigma2_0));
  if (options.keep_estimates) result.estimates.push_back(x);
  double pred = sigma2_0;
  double cum_bits = 0.0;

  for (int t = 0; t < T; ++t) {
    // The fusion center fixes this iteration's coding from the side-channel estimate;
    // processors derive the same spec from the same scalars.
    IterationCoding coding;
    coding.compressed = compressed;
    double model_rate = 0.0;
    if (compressed) {
      const double s2 = std::max(sigma2_hat, kMinChannelVariance);
      const ScalarSourceModel source(prior, s2, P);
      coding.source_mean = source.mean();
      double delta = 0.0;
      double rate = 0.0;
      if (settings.mode == MpMode::kBt) {
        AllocationContext ctx = settings.ctx;
        ctx.quad_order = options.quad_order;
        const double next_C =
            settings.bt_reference == BtReference::kCurrent ? se.step(s2) : settings.sigma2_C[t + 1];
        rate = bt_step(s2, next_C, settings.bt, ctx).rate_bits;
        if (rate > 0.0) delta = delta_for_rate(source, rate);
      } else {
        rate = settings.plan.rates[t];
        if (rate > 0.0) {
          delta = settings.coder == CoderKind::kEcsq ? delta_for_rate(source, rate)
                                                     : delta_for_mse(settings.ctx.rd->distortion(s2, rate));
        }
      }
      if (rate <= 0.0) {
        coding.zero_rate = true;
        coding.sigma2_Q = source.variance();
      } else {
        coding.spec = design(source, delta);
        coding.sigma2_Q = coding.spec.model_mse;
        if (settings.coder == CoderKind::kIdeal) {
          model_rate = settings.mode == MpMode::kDp ? rate : settings.ctx.rd->rate(s2, coding.sigma2_Q);
        }
      }
    }

    std::vector<UplinkMessage> uplinks;
    uplinks.reserve(P);
    for (const auto& proc : processors) uplinks.push_back(proc.uplink(x, coding));

    double energy = 0.0;
    double payload_bits = 0.0;
    for (const auto& m : uplinks) {
      energy += m.residual_energy;
      if (m.block) payload_bits += static_cast<double>(m.block->payload_bits());
    }
    const double sigma2_hat_D = energy / cfg.M;
    const double added = compressed ? P * coding.sigma2_Q : 0.0;
    const double base = settings.channel == ChannelVarianceSource::kOnline ? sigma2_hat_D : pred;
    const DownlinkMessage down =
        fusion_aggregate(uplinks, P, N, coding, prior, base + added, sigma2_hat_D);
    x = down.x_next;
    for (auto& proc : processors) proc.apply(down);

    IterationRecord r;
    r.t = t + 1;
    if (!compressed) {
      r.rate_bits = kRawBitsPerElement;
    } else if (coding.zero_rate) {
      r.rate_bits = 0.0;
    } else {
      r.hq_bits = coding.spec.entropy_bits;
      r.rate_bits = settings.coder == CoderKind::kEcsq ? payload_bits / (static_cast<double>(P) * N) : model_rate;
      if (settings.ctx.rd) {
        r.rd_bits = settings.mode == MpMode::kDp && settings.coder == CoderKind::kIdeal
                        ? model_rate
                        : settings.ctx.rd->rate(std::max(sigma2_hat, kMinChannelVariance), coding.sigma2_Q);
      }
    }
    r.sigma2_Q = compressed ? coding.sigma2_Q : 0.0;
    cum_bits += r.rate_bits;
    r.cum_bits = cum_bits;
    pred = se.step(pred, added);
    r.sigma2_pred = pred;
    sigma2_hat = gather_energy();
    r.sigma2_hat = sigma2_hat;
    r.sdr_db = empirical_sdr(x, instance.s0());
    r.diverged = !(r.sigma2_hat <= options.divergence_factor * sigma2_0);
    result.records.push_back(r);
    if (options.keep_estimates) result.estimates.push_back(x);
  }
  return result;
}

}  // namespace mpamp
