#include "mpamp/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "mpamp/error.hpp"

namespace mpamp {

namespace {

constexpr double kSupportSigmas = 10.0;
constexpr long kMaxHalfBins = 1L << 23;
/// Finest bin width delta_for_rate will consider, relative to the source sd.
constexpr double kFinestRelativeDelta = 1.0 / 65536.0;
constexpr double kCheapRateBits = 12.0;
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double upper_tail(double u) { return 0.5 * std::erfc(u * kInvSqrt2); }
double lower_tail(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }
double std_pdf(double u) { return std::isinf(u) ? 0.0 : kInvSqrt2Pi * std::exp(-0.5 * u * u); }
double u_pdf(double u) { return std::isinf(u) ? 0.0 : u * std_pdf(u); }

/// Standard-normal mass of (ua, ub], evaluated on the side that avoids cancellation.
double std_mass(double ua, double ub) {
  if (ua >= 0.0) return upper_tail(ua) - upper_tail(ub);
  if (ub <= 0.0) return lower_tail(ub) - lower_tail(ua);
  return 1.0 - lower_tail(ua) - upper_tail(ub);
}

double gauss_mass(double a, double b, double m, double s) { return std_mass((a - m) / s, (b - m) / s); }

double gauss_partial_second_moment(double a, double b, double c, double m, double s) {
  const double ua = (a - m) / s;
  const double ub = (b - m) / s;
  const double d = m - c;
  const double m0 = std_mass(ua, ub);
  const double m1 = std_pdf(ua) - std_pdf(ub);
  const double m2 = m0 - (u_pdf(ub) - u_pdf(ua));
  return s * s * m2 + 2.0 * s * d * m1 + d * d * m0;
}

/// Reach of the bin range around the offset: 10 sd of the wider component, so that large
/// signal entries (which every processor sees scaled by 1/P) are not clamped.
double support_half_width(const ScalarSourceModel& source) {
  const double m = source.mean();
  return std::max(std::abs(source.slab_mean() - m) + kSupportSigmas * source.slab_sd(),
                  std::abs(m) + kSupportSigmas * source.zero_sd());
}

long half_bins(const ScalarSourceModel& source, double delta) {
  const double k = std::ceil(support_half_width(source) / delta - 0.5);
  if (k > static_cast<double>(kMaxHalfBins)) {
    throw ParameterError("quantizer: bin width " + std::to_string(delta) + " is too fine for source sd " +
                         std::to_string(source.sd()));
  }
  return std::max(0L, static_cast<long>(k));
}

template <class Visit>
void for_each_bin(double delta, double offset, long K, Visit&& visit) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (long k = -K; k <= K; ++k) {
    const double a = k == -K ? -inf : offset + (k - 0.5) * delta;
    const double b = k == K ? inf : offset + (k + 0.5) * delta;
    visit(k, a, b);
  }
}

void fnv_mix(std::uint32_t& h, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    h ^= static_cast<std::uint8_t>(value >> (8 * i));
    h *= 16777619u;
  }
}

}  // namespace

ScalarSourceModel::ScalarSourceModel(const SignalPrior& prior, double sigma2_t, int P)
    : prior_(prior), sigma2_t_(sigma2_t), P_(P) {
  prior_.validate();
  if (!(sigma2_t > 0.0) || !std::isfinite(sigma2_t)) {
    throw ParameterError("ScalarSourceModel: sigma2_t must be positive");
  }
  if (P < 1) throw ParameterError("ScalarSourceModel: P must be positive");
  const double p = static_cast<double>(P);
  slab_mean_ = prior.mu_s / p;
  slab_sd_ = std::sqrt(prior.slab_variance() + p * sigma2_t) / p;
  zero_sd_ = std::sqrt(sigma2_t / p);
}

double ScalarSourceModel::mean() const { return prior_.epsilon * slab_mean_; }

double ScalarSourceModel::variance() const {
  const double eps = prior_.epsilon;
  const double second = eps * (slab_sd_ * slab_sd_ + slab_mean_ * slab_mean_) + (1.0 - eps) * zero_sd_ * zero_sd_;
  const double m = mean();
  return second - m * m;
}

double ScalarSourceModel::sd() const { return std::sqrt(variance()); }

double ScalarSourceModel::pdf(double x) const {
  const double eps = prior_.epsilon;
  return eps * std_pdf((x - slab_mean_) / slab_sd_) / slab_sd_ +
         (1.0 - eps) * std_pdf(x / zero_sd_) / zero_sd_;
}

double ScalarSourceModel::cdf(double x) const {
  const double eps = prior_.epsilon;
  return eps * lower_tail((x - slab_mean_) / slab_sd_) + (1.0 - eps) * lower_tail(x / zero_sd_);
}

double ScalarSourceModel::mass(double a, double b) const {
  const double eps = prior_.epsilon;
  return eps * gauss_mass(a, b, slab_mean_, slab_sd_) + (1.0 - eps) * gauss_mass(a, b, 0.0, zero_sd_);
}

double ScalarSourceModel::partial_second_moment(double a, double b, double c) const {
  const double eps = prior_.epsilon;
  return eps * gauss_partial_second_moment(a, b, c, slab_mean_, slab_sd_) +
         (1.0 - eps) * gauss_partial_second_moment(a, b, c, 0.0, zero_sd_);
}

bool QuantizerSpec::noise_model_valid(double delta, double sigma2_t, int P) {
  return delta <= 2.0 * std::sqrt(sigma2_t / P);
}

double delta_for_mse(double sigma2_Q) {
  if (!(sigma2_Q > 0.0)) throw ParameterError("delta_for_mse: sigma2_Q must be positive");
  return std::sqrt(12.0 * sigma2_Q);
}

double model_mse(double delta) { return delta * delta / 12.0; }

QuantizerSpec design(const ScalarSourceModel& source, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("design: delta must be positive");
  QuantizerSpec spec;
  spec.delta = delta;
  spec.offset = source.mean();
  const long K = half_bins(source, delta);
  spec.num_bins = static_cast<int>(2 * K + 1);
  spec.center_index = static_cast<int>(K);
  spec.bin_probs.reserve(spec.num_bins);
  double total = 0.0;
  double exact = 0.0;
  for_each_bin(delta, spec.offset, K, [&](long k, double a, double b) {
    const double p = source.mass(a, b);
    spec.bin_probs.push_back(p);
    total += p;
    exact += source.partial_second_moment(a, b, spec.offset + k * delta);
  });
  double entropy = 0.0;
  for (double& p : spec.bin_probs) {
    p /= total;
    if (p > 0.0) entropy -= p * std::log2(p);
  }
  spec.entropy_bits = std::max(0.0, entropy);
  spec.model_mse = model_mse(delta);
  spec.exact_mse = exact;
  spec.coding_model = RansModel::from_probabilities(spec.bin_probs);

  std::uint32_t h = 2166136261u;
  fnv_mix(h, std::bit_cast<std::uint64_t>(spec.delta), 8);
  fnv_mix(h, std::bit_cast<std::uint64_t>(spec.offset), 8);
  fnv_mix(h, static_cast<std::uint64_t>(spec.num_bins), 4);
  fnv_mix(h, static_cast<std::uint64_t>(spec.center_index), 4);
  for (std::uint32_t f : spec.coding_model.frequencies()) fnv_mix(h, f, 4);
  spec.digest = h;
  return spec;
}

double quantizer_entropy(const ScalarSourceModel& source, double delta) {
  if (!(delta > 0.0)) throw ParameterError("quantizer_entropy: delta must be positive");
  const long K = half_bins(source, delta);
  std::vector<double> probs;
  probs.reserve(2 * K + 1);
  double total = 0.0;
  for_each_bin(delta, source.mean(), K, [&](long, double a, double b) {
    probs.push_back(source.mass(a, b));
    total += probs.back();
  });
  double entropy = 0.0;
  for (double p : probs) {
    const double q = p / total;
    if (q > 0.0) entropy -= q * std::log2(q);
  }
  return std::max(0.0, entropy);
}

double delta_for_rate(const ScalarSourceModel& source, double target_bits) {
  if (!(target_bits > 0.0) || !std::isfinite(target_bits)) {
    throw ParameterError("delta_for_rate: target_bits must be positive");
  }
  const double sd = source.sd();
  double lo = std::log(sd * kFinestRelativeDelta);  // high entropy
  double hi = std::log(2.0 * support_half_width(source));  // zero entropy
  // The finest width spans 2^20 bins and carries well over 12 bits for these sources; only
  // targets beyond that need the (expensive) reachability check.
  if (target_bits > kCheapRateBits && target_bits > quantizer_entropy(source, std::exp(lo))) {
    const double h_max = quantizer_entropy(source, std::exp(lo));
    throw RangeError("delta_for_rate: target " + std::to_string(target_bits) +
                     " bits exceeds the finest quantizer entropy " + std::to_string(h_max));
  }
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double h = quantizer_entropy(source, std::exp(mid));
    if (std::abs(h - target_bits) < 1e-6) break;
    if (h > target_bits) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  return std::exp(mid);
}

QuantizedValues quantize(const Vector& values, const QuantizerSpec& spec) {
  QuantizedValues out;
  out.indices.resize(values.size());
  out.reconstruction.resize(values.size());
  const double inv = 1.0 / spec.delta;
  const int lo = spec.min_index();
  const int hi = spec.max_index();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double x = values[i];
    if (!std::isfinite(x)) throw InputError("quantize: non-finite input at index " + std::to_string(i));
    const double r = std::round((x - spec.offset) * inv);
    const int k = static_cast<int>(std::clamp(r, static_cast<double>(lo), static_cast<double>(hi)));
    out.indices[i] = k;
    out.reconstruction[i] = spec.reconstruction(k);
  }
  return out;
}

std::vector<std::uint8_t> CodedBlock::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(element_count >> (8 * i)));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(spec_digest >> (8 * i)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

CodedBlock CodedBlock::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw DecodeError("CodedBlock: buffer shorter than header");
  CodedBlock block;
  for (int i = 0; i < 4; ++i) block.element_count |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  for (int i = 0; i < 4; ++i) block.spec_digest |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
  block.payload.assign(bytes.begin() + kHeaderBytes, bytes.end());
  return block;
}

CodedBlock encode(std::span<const std::int32_t> indices, const QuantizerSpec& spec) {
  std::vector<std::uint32_t> symbols(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int32_t k = indices[i];
    if (k < spec.min_index() || k > spec.max_index()) {
      throw ParameterError("encode: index " + std::to_string(k) + " outside the quantizer range");
    }
    symbols[i] = static_cast<std::uint32_t>(k + spec.center_index);
  }
  CodedBlock block;
  block.payload = rans_encode(symbols, spec.coding_model);
  block.element_count = static_cast<std::uint32_t>(indices.size());
  block.spec_digest = spec.digest;
  return block;
}

std::vector<std::int32_t> decode(const CodedBlock& block, const QuantizerSpec& spec) {
  if (block.spec_digest != spec.digest) throw IntegrityError("decode: block was coded under a different spec");
  const auto symbols = rans_decode(block.payload, block.element_count, spec.coding_model);
  std::vector<std::int32_t> indices(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    indices[i] = static_cast<std::int32_t>(symbols[i]) - spec.center_index;
  }
  return indices;
}

}  // namespace mpamp
