#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mpamp/error.hpp"
#include "mpamp/quantizer.hpp"
#include "mpamp/rans.hpp"
#include "oracles.hpp"

using namespace mpamp;

namespace {

const SignalPrior kPrior{0.05, 0.0, 1.0};

Vector sample_source(const ScalarSourceModel& src, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution active(src.prior().epsilon);
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = active(rng) ? src.slab_mean() + src.slab_sd() * n01(rng) : src.zero_sd() * n01(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("per-processor source law") {
  const ScalarSourceModel src(SignalPrior{0.1, 0.6, 1.0}, 0.02, 30);
  CHECK(src.slab_mean() == doctest::Approx(0.02));
  CHECK(src.slab_sd() == doctest::Approx(std::sqrt(1.0 + 30 * 0.02) / 30));
  CHECK(src.zero_sd() == doctest::Approx(std::sqrt(0.02 / 30)));
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  const double lo = -1.0;
  const double hi = 1.0;
  auto pdf = [&](double x) { return src.pdf(x); };
  const double total = gauss_kronrod<double, 61>::integrate(pdf, lo, hi, 20, 1e-13, &err);
  const double m1 = gauss_kronrod<double, 61>::integrate([&](double x) { return x * src.pdf(x); }, lo, hi, 20, 1e-13, &err);
  const double m2 =
      gauss_kronrod<double, 61>::integrate([&](double x) { return x * x * src.pdf(x); }, lo, hi, 20, 1e-13, &err);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(src.mean() == doctest::Approx(m1).epsilon(1e-9));
  CHECK(src.variance() == doctest::Approx(m2 - m1 * m1).epsilon(1e-9));
  CHECK(src.mass(-INFINITY, INFINITY) == doctest::Approx(1.0));
  CHECK(src.mass(-0.01, 0.03) == doctest::Approx(src.cdf(0.03) - src.cdf(-0.01)));
  // Far-tail mass stays positive instead of cancelling to zero.
  CHECK(src.mass(0.9, 1.0) > 0.0);
  CHECK_THROWS_AS(ScalarSourceModel(kPrior, 0.0, 30), ParameterError);
}

TEST_CASE("quantizer design") {
  const ScalarSourceModel src(kPrior, 0.01, 30);
  const double delta = 2.0 * std::sqrt(0.01 / 30);
  const QuantizerSpec spec = design(src, delta);
  CHECK(spec.num_bins == 2 * spec.center_index + 1);
  CHECK(std::accumulate(spec.bin_probs.begin(), spec.bin_probs.end(), 0.0) == doctest::Approx(1.0));
  double h = 0.0;
  for (double p : spec.bin_probs) h -= p > 0 ? p * std::log2(p) : 0.0;
  CHECK(spec.entropy_bits == doctest::Approx(h));
  CHECK(quantizer_entropy(src, delta) == doctest::Approx(h));
  CHECK(spec.model_mse == doctest::Approx(delta * delta / 12));
  CHECK(QuantizerSpec::noise_model_valid(delta, 0.01, 30));
  CHECK_FALSE(QuantizerSpec::noise_model_valid(1.01 * delta, 0.01, 30));
  // Finer bins carry more information.
  CHECK(quantizer_entropy(src, delta / 2) > spec.entropy_bits + 0.5);
  CHECK(delta_for_mse(spec.model_mse) == doctest::Approx(delta));
}

TEST_CASE("delta_for_rate hits the requested entropy") {
  const ScalarSourceModel src(kPrior, 0.003, 30);
  for (double r : {0.3, 1.0, 2.5, 4.0, 6.0}) {
    CHECK(quantizer_entropy(src, delta_for_rate(src, r)) == doctest::Approx(r).epsilon(1e-4));
  }
  CHECK_THROWS_AS(delta_for_rate(src, 0.0), ParameterError);
  CHECK_THROWS_AS(delta_for_rate(src, 60.0), RangeError);
}

TEST_CASE("quantization error stays within half a bin, including large entries") {
  const ScalarSourceModel src(kPrior, 0.002, 30);
  const QuantizerSpec spec = design(src, delta_for_rate(src, 4.0));
  Vector x = sample_source(src, 5000, 9);
  // A slab entry eight slab-sd out must not be clamped.
  x[0] = 8.0 * src.slab_sd();
  x[1] = -8.0 * src.slab_sd();
  const QuantizedValues q = quantize(x, spec);
  for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(std::abs(q.reconstruction[i] - x[i]) <= 0.5 * spec.delta * (1 + 1e-12));
  Vector bad = x;
  bad[3] = NAN;
  CHECK_THROWS_AS(quantize(bad, spec), InputError);
}

TEST_CASE("rANS model frequencies") {
  const std::vector<double> probs{0.5, 1e-12, 0.25, 0.25 - 1e-12};
  const RansModel m = RansModel::from_probabilities(probs);
  std::uint64_t total = 0;
  for (auto f : m.frequencies()) {
    CHECK(f >= 1u);
    total += f;
  }
  CHECK(total == RansModel::kTotal);
  for (std::uint32_t s = 0; s < m.alphabet_size(); ++s) {
    CHECK(m.lookup(m.start(s)) == s);
    CHECK(m.lookup(m.start(s) + m.freq(s) - 1) == s);
  }
}

TEST_CASE("rANS round trip and corruption detection") {
  const RansModel m = RansModel::from_probabilities(std::vector<double>{0.7, 0.2, 0.05, 0.05});
  std::mt19937 rng(1);
  std::discrete_distribution<std::uint32_t> d({0.7, 0.2, 0.05, 0.05});
  std::vector<std::uint32_t> sym(20000);
  for (auto& s : sym) s = d(rng);
  const auto bytes = rans_encode(sym, m);
  CHECK(rans_decode(bytes, sym.size(), m) == sym);
  CHECK(rans_encode(std::vector<std::uint32_t>{}, m).empty());
  CHECK(rans_decode(std::vector<std::uint8_t>{}, 0, m).empty());
  auto truncated = bytes;
  truncated.resize(truncated.size() - 4);
  CHECK_THROWS_AS(rans_decode(truncated, sym.size(), m), DecodeError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x5a;
  CHECK_THROWS_AS(rans_decode(flipped, sym.size(), m), DecodeError);
}

TEST_CASE("coded blocks") {
  const ScalarSourceModel src(kPrior, 0.005, 30);
  const QuantizerSpec spec = design(src, delta_for_rate(src, 3.0));
  const Vector x = sample_source(src, 10000, 4);
  const QuantizedValues q = quantize(x, spec);
  const CodedBlock block = encode(q.indices, spec);
  CHECK(block.element_count == 10000u);
  CHECK(decode(block, spec) == q.indices);
  // Measured rate close to the model entropy.
  CHECK(block.payload_bits() / 10000.0 == doctest::Approx(spec.entropy_bits).epsilon(0.02));

  const auto wire = block.serialize();
  CHECK(wire.size() == block.payload.size() + CodedBlock::kHeaderBytes);
  const CodedBlock back = CodedBlock::parse(wire);
  CHECK(back.payload == block.payload);
  CHECK(back.spec_digest == spec.digest);
  CHECK_THROWS_AS(CodedBlock::parse(std::vector<std::uint8_t>(5)), DecodeError);

  const QuantizerSpec other = design(src, spec.delta * 1.01);
  CHECK(other.digest != spec.digest);
  CHECK_THROWS_AS(decode(block, other), IntegrityError);
  CodedBlock broken = block;
  broken.payload[20] ^= 0xff;
  CHECK_THROWS_AS(decode(broken, spec), DecodeError);
}
