#include "mpamp/rans.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mpamp/error.hpp"

namespace mpamp {

namespace {

constexpr std::uint64_t kLower = 1ULL << 31;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t w) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint32_t w = 0;
  for (int i = 0; i < 4; ++i) w |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  return w;
}

}  // namespace

RansModel RansModel::from_probabilities(std::span<const double> probs) {
  if (probs.empty()) throw ParameterError("RansModel: empty alphabet");
  if (probs.size() > kTotal / 2) throw ParameterError("RansModel: alphabet too large");
  RansModel model;
  model.freq_.resize(probs.size());
  std::int64_t total = 0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    const double scaled = std::max(0.0, probs[s]) * kTotal;
    model.freq_[s] = static_cast<std::uint32_t>(std::max(1.0, std::floor(scaled + 0.5)));
    total += model.freq_[s];
  }
  // Settle the rounding residue on the largest symbols; deterministic order.
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return model.freq_[a] > model.freq_[b]; });
  std::int64_t residue = static_cast<std::int64_t>(kTotal) - total;
  for (std::size_t i = 0; residue != 0; i = (i + 1) % order.size()) {
    auto& f = model.freq_[order[i]];
    if (residue > 0) {
      const std::int64_t add = std::max<std::int64_t>(1, residue / static_cast<std::int64_t>(order.size()));
      f += static_cast<std::uint32_t>(add);
      residue -= add;
    } else if (f > 1) {
      const std::int64_t take = std::min<std::int64_t>(
          f - 1, std::max<std::int64_t>(1, -residue / static_cast<std::int64_t>(order.size())));
      f -= static_cast<std::uint32_t>(take);
      residue += take;
    }
  }
  model.cum_.assign(probs.size() + 1, 0);
  for (std::size_t s = 0; s < probs.size(); ++s) model.cum_[s + 1] = model.cum_[s] + model.freq_[s];
  return model;
}

std::uint32_t RansModel::lookup(std::uint32_t slot) const {
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), slot);
  return static_cast<std::uint32_t>(std::distance(cum_.begin(), it) - 1);
}

std::vector<std::uint8_t> rans_encode(std::span<const std::uint32_t> symbols, const RansModel& model) {
  std::vector<std::uint8_t> out;
  if (symbols.empty()) return out;
  std::vector<std::uint32_t> words;
  words.reserve(symbols.size() / 2 + 4);
  std::uint64_t x = kLower;
  for (auto it = symbols.rbegin(); it != symbols.rend(); ++it) {
    const std::uint32_t s = *it;
    if (s >= model.alphabet_size()) throw ParameterError("rans_encode: symbol outside alphabet");
    const std::uint64_t f = model.freq(s);
    const std::uint64_t x_max = ((kLower >> RansModel::kScaleBits) << 32) * f;
    if (x >= x_max) {
      words.push_back(static_cast<std::uint32_t>(x));
      x >>= 32;
    }
    x = ((x / f) << RansModel::kScaleBits) + (x % f) + model.start(s);
  }
  out.reserve(8 + 4 * words.size());
  put_u32(out, static_cast<std::uint32_t>(x));
  put_u32(out, static_cast<std::uint32_t>(x >> 32));
  for (auto it = words.rbegin(); it != words.rend(); ++it) put_u32(out, *it);
  return out;
}

std::vector<std::uint32_t> rans_decode(std::span<const std::uint8_t> bytes, std::size_t count,
                                       const RansModel& model) {
  std::vector<std::uint32_t> symbols;
  if (count == 0) {
    if (!bytes.empty()) throw DecodeError("rans_decode: payload present for empty block");
    return symbols;
  }
  if (bytes.size() < 8 || bytes.size() % 4 != 0) throw DecodeError("rans_decode: malformed payload length");
  std::uint64_t x = get_u32(bytes, 0) | (static_cast<std::uint64_t>(get_u32(bytes, 4)) << 32);
  std::size_t pos = 8;
  symbols.reserve(count);
  constexpr std::uint32_t mask = RansModel::kTotal - 1;
  for (std::size_t i = 0; i < count; ++i) {
    if (x < kLower) throw DecodeError("rans_decode: state underflow");
    const auto slot = static_cast<std::uint32_t>(x & mask);
    const std::uint32_t s = model.lookup(slot);
    symbols.push_back(s);
    x = model.freq(s) * (x >> RansModel::kScaleBits) + slot - model.start(s);
    if (x < kLower) {
      if (pos + 4 > bytes.size()) throw DecodeError("rans_decode: truncated payload");
      x = (x << 32) | get_u32(bytes, pos);
      pos += 4;
    }
  }
  if (pos != bytes.size() || x != kLower) throw DecodeError("rans_decode: payload failed integrity check");
  return symbols;
}

}  // namespace mpamp
