#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mpamp/model.hpp"
#include "mpamp/rans.hpp"

namespace mpamp {

/// Law of one processor's partial estimate F^p_t = S0/P + (sigma_t/sqrt(P)) Z:
///   eps N(mu_s/P, (sigma_s^2 + P sigma2_t)/P^2) + (1 - eps) N(0, sigma2_t/P).
class ScalarSourceModel {
 public:
  ScalarSourceModel(const SignalPrior& prior, double sigma2_t, int P);

  const SignalPrior& prior() const { return prior_; }
  double sigma2_t() const { return sigma2_t_; }
  int P() const { return P_; }

  double slab_mean() const { return slab_mean_; }
  double slab_sd() const { return slab_sd_; }
  double zero_sd() const { return zero_sd_; }

  double mean() const;
  double variance() const;
  double sd() const;
  double pdf(double x) const;
  double cdf(double x) const;
  /// P(a < X <= b) without cancellation in either tail; a may be -inf, b may be +inf.
  double mass(double a, double b) const;
  /// E[(X - c)^2 ; a < X <= b].
  double partial_second_moment(double a, double b, double c) const;

 private:
  SignalPrior prior_;
  double sigma2_t_;
  int P_;
  double slab_mean_;
  double slab_sd_;
  double zero_sd_;
};

/// Mid-tread uniform quantizer centred on the source mean: bin k covers
/// [offset + (k - 1/2) delta, offset + (k + 1/2) delta) and reconstructs to offset + k delta.
/// Indices run over [-center_index, num_bins - 1 - center_index]; the extreme bins absorb the tails.
struct QuantizerSpec {
  double delta = 1.0;
  double offset = 0.0;
  int num_bins = 1;
  int center_index = 0;
  std::vector<double> bin_probs;
  double entropy_bits = 0.0;
  /// delta^2 / 12, the noise power the state evolution uses.
  double model_mse = 1.0 / 12.0;
  /// Exact within-bin squared error under the source model (diagnostic only).
  double exact_mse = 0.0;
  RansModel coding_model;
  std::uint32_t digest = 0;

  int min_index() const { return -center_index; }
  int max_index() const { return num_bins - 1 - center_index; }
  double reconstruction(int k) const { return offset + k * delta; }
  /// Bin-size rule under which the uniform-noise model holds: delta <= 2 sigma_t / sqrt(P).
  static bool noise_model_valid(double delta, double sigma2_t, int P);
};

/// sqrt(12 sigma2_Q).
double delta_for_mse(double sigma2_Q);
double model_mse(double delta);

/// Builds the quantizer for `source` with bin width `delta`; the bin range covers
/// mean +- 10 sd of the wider mixture component, with the tail mass folded into the extreme bins.
QuantizerSpec design(const ScalarSourceModel& source, double delta);

/// Entropy of design(source, delta) without materialising the spec.
double quantizer_entropy(const ScalarSourceModel& source, double delta);

/// Bin width whose quantizer entropy equals target_bits within 1e-4 bits.
/// Throws RangeError when the target exceeds the entropy at the finest allowed width.
double delta_for_rate(const ScalarSourceModel& source, double target_bits);

struct QuantizedValues {
  std::vector<std::int32_t> indices;
  Vector reconstruction;
};

/// k = round((x - offset) / delta) clamped to the spec's range. Throws InputError on non-finite input.
QuantizedValues quantize(const Vector& values, const QuantizerSpec& spec);

/// Entropy-coded quantizer indices. Serialised layout: uint32 LE element count,
/// uint32 LE spec digest, then the rANS payload.
struct CodedBlock {
  std::vector<std::uint8_t> payload;
  std::uint32_t element_count = 0;
  std::uint32_t spec_digest = 0;

  static constexpr std::size_t kHeaderBytes = 8;

  std::size_t payload_bits() const { return payload.size() * 8; }
  std::vector<std::uint8_t> serialize() const;
  /// Throws DecodeError for buffers shorter than the header.
  static CodedBlock parse(std::span<const std::uint8_t> bytes);
};

CodedBlock encode(std::span<const std::int32_t> indices, const QuantizerSpec& spec);
/// Throws IntegrityError on digest mismatch and DecodeError on a corrupted payload.
std::vector<std::int32_t> decode(const CodedBlock& block, const QuantizerSpec& spec);

}  // namespace mpamp
