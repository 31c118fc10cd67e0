#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mpamp {

/// Static-model rANS (range asymmetric numeral system) coder with a 64-bit state
/// and 32-bit renormalisation. Frequencies sum to 2^kScaleBits.
class RansModel {
 public:
  static constexpr unsigned kScaleBits = 24;
  static constexpr std::uint32_t kTotal = 1u << kScaleBits;

  /// Quantises probabilities to integer frequencies; every symbol keeps frequency >= 1
  /// so that any in-range symbol stays encodable.
  static RansModel from_probabilities(std::span<const double> probs);

  std::size_t alphabet_size() const { return freq_.size(); }
  std::uint32_t freq(std::size_t s) const { return freq_[s]; }
  std::uint32_t start(std::size_t s) const { return cum_[s]; }
  const std::vector<std::uint32_t>& frequencies() const { return freq_; }
  /// Symbol whose slot interval contains `slot`.
  std::uint32_t lookup(std::uint32_t slot) const;

 private:
  std::vector<std::uint32_t> freq_;
  std::vector<std::uint32_t> cum_;  // size alphabet + 1
};

/// Encodes symbols into a byte stream: 8-byte little-endian final state followed by
/// 32-bit little-endian words in decoding order. Empty input gives an empty stream.
std::vector<std::uint8_t> rans_encode(std::span<const std::uint32_t> symbols, const RansModel& model);

/// Inverse of rans_encode. Throws DecodeError when the stream is truncated, has trailing
/// data, or does not return to the initial state.
std::vector<std::uint32_t> rans_decode(std::span<const std::uint8_t> bytes, std::size_t count,
                                       const RansModel& model);

}  // namespace mpamp
