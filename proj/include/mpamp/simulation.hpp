#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mpamp/allocation.hpp"
#include "mpamp/model.hpp"
#include "mpamp/quantizer.hpp"

namespace mpamp {

enum class MpMode { kUncompressed, kBt, kDp };
enum class CoderKind { kIdeal, kEcsq };
/// Where the denoiser's channel variance comes from: the residual side channel or offline SE.
enum class ChannelVarianceSource { kOnline, kStateEvolution };
/// BT's sigma2_{t+1,C}: the offline centralized SE trajectory, or one centralized SE step
/// taken from the current estimate sigma2_hat_D.
enum class BtReference { kTrajectory, kCurrent };

/// Row t describes x_t (row 0 is the all-zero start) and the residual z_t that follows it.
struct IterationRecord {
  int t = 0;
  /// ||z_t||^2 / M, summed over processors in the distributed runs.
  double sigma2_hat = 0.0;
  /// Predicted sigma2_t under the coding actually applied (centralized SE for unquantized runs).
  double sigma2_pred = 0.0;
  double sdr_db = 0.0;
  /// Bits per element per processor spent on the uplink that produced x_t.
  double rate_bits = 0.0;
  /// Model entropy of the quantizer used on that uplink.
  double hq_bits = 0.0;
  /// RD-function rate at the same distortion, when a rate-distortion model is available.
  double rd_bits = 0.0;
  /// Designed quantizer noise sigma2_Q (the whole source variance at zero rate).
  double sigma2_Q = 0.0;
  double cum_bits = 0.0;
  bool diverged = false;
};

struct RunResult {
  std::vector<IterationRecord> records;  // t = 0..T
  /// x_0..x_T, kept only when requested.
  std::vector<Vector> estimates;

  bool any_diverged() const;
  double total_bits() const { return records.empty() ? 0.0 : records.back().cum_bits; }
};

struct RunOptions {
  bool keep_estimates = false;
  /// sigma2_hat above this multiple of sigma2_0 marks the iteration as diverged.
  double divergence_factor = 10.0;
  int quad_order = 16;
};

/// Centralized AMP: f = x + A'z, x <- eta(f; ||z||^2/M), z <- y - A x + (1/kappa) <eta'> z.
RunResult run_centralized(const ProblemInstance& instance, int T, const RunOptions& options = {});

/// How each iteration's uplink is coded.
struct IterationCoding {
  bool compressed = false;
  /// Nothing is sent; the fusion center substitutes the source mean.
  bool zero_rate = false;
  QuantizerSpec spec;
  double source_mean = 0.0;
  double sigma2_Q = 0.0;
};

struct UplinkMessage {
  int processor = 0;
  /// Coded f^p_t (compressed iterations with positive rate).
  std::optional<CodedBlock> block;
  /// Raw f^p_t (uncompressed mode).
  std::optional<Vector> raw;
  double residual_energy = 0.0;
  std::uint32_t spec_digest = 0;
};

struct DownlinkMessage {
  Vector x_next;
  double eta_prime_mean = 0.0;
  double sigma2_hat_D = 0.0;
};

/// Decodes every uplink, sums the f^p_t in processor order and denoises the sum at
/// `channel_variance`. Throws on a count mismatch or a message that fails to decode.
DownlinkMessage fusion_aggregate(const std::vector<UplinkMessage>& messages, int P, int N,
                                 const IterationCoding& coding, const SignalPrior& prior, double channel_variance,
                                 double sigma2_hat_D);

struct MpSettings {
  MpMode mode = MpMode::kUncompressed;
  CoderKind coder = CoderKind::kEcsq;
  BTPolicy bt;
  BtReference bt_reference = BtReference::kTrajectory;
  /// Per-iteration rates for kDp; ECSQ plans already include the realisation gap.
  AllocationPlan plan;
  /// Needs rd for the ideal coder.
  AllocationContext ctx;
  /// Centralized SE sigma2_0..sigma2_T, the BT reference trajectory.
  std::vector<double> sigma2_C;
  ChannelVarianceSource channel = ChannelVarianceSource::kOnline;
};

/// P logical processors and a fusion center exchanging UplinkMessage / DownlinkMessage only.
RunResult run_mp(const ProblemInstance& instance, const MpSettings& settings, int T, const RunOptions& options = {});

}  // namespace mpamp
