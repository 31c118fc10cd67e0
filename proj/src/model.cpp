#include "mpamp/model.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "mpamp/error.hpp"

namespace mpamp {

void SignalPrior::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw ParameterError("SignalPrior.epsilon must lie in (0, 1], got " + std::to_string(epsilon));
  }
  if (!(sigma_s > 0.0) || !std::isfinite(sigma_s)) {
    throw ParameterError("SignalPrior.sigma_s must be positive, got " + std::to_string(sigma_s));
  }
  if (!std::isfinite(mu_s)) {
    throw ParameterError("SignalPrior.mu_s must be finite");
  }
}

void ProblemConfig::validate() const {
  if (N < 1) throw ParameterError("ProblemConfig.N must be positive");
  if (M < 1) throw ParameterError("ProblemConfig.M must be positive");
  if (P < 1) throw ParameterError("ProblemConfig.P must be positive");
  if (M > N) throw ParameterError("ProblemConfig.M must not exceed N (kappa in (0, 1])");
  if (M % P != 0) {
    throw PartitionError("ProblemConfig.M = " + std::to_string(M) +
                         " is not divisible by P = " + std::to_string(P));
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw ParameterError("ProblemConfig.snr_db must be a number or +inf");
  }
}

double ProblemConfig::sigma2_e(const SignalPrior& prior) const {
  if (std::isinf(snr_db)) return 0.0;
  return rho(prior) * std::pow(10.0, -snr_db / 10.0);
}

std::vector<RowRange> partition_rows(int M, int P) {
  if (P < 1 || M < 1 || M % P != 0) {
    throw PartitionError("cannot split " + std::to_string(M) + " rows into " + std::to_string(P) +
                         " equal blocks");
  }
  const int rows = M / P;
  std::vector<RowRange> ranges;
  ranges.reserve(P);
  for (int p = 0; p < P; ++p) ranges.push_back({p * rows, (p + 1) * rows});
  return ranges;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ProblemInstance::ProblemInstance(ProblemConfig config, SignalPrior prior, Vector s0, Matrix A,
                                 Vector e)
    : config_(config),
      prior_(prior),
      s0_(std::move(s0)),
      A_(std::move(A)),
      e_(std::move(e)),
      row_ranges_(partition_rows(config.M, config.P)) {
  if (A_.rows() != config_.M || A_.cols() != config_.N || s0_.size() != config_.N ||
      e_.size() != config_.M) {
    throw ParameterError("ProblemInstance components do not match the configured dimensions");
  }
  y_ = A_ * s0_ + e_;
}

Vector sample_signal(const SignalPrior& prior, int N, std::uint64_t seed) {
  prior.validate();
  if (N < 1) throw ParameterError("sample_signal: N must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> support(0.0, 1.0);
  std::normal_distribution<double> slab(prior.mu_s, prior.sigma_s);
  Vector s(N);
  for (int i = 0; i < N; ++i) {
    // Draw both variates every time so the stream layout does not depend on epsilon.
    const bool active = support(rng) < prior.epsilon;
    const double value = slab(rng);
    s[i] = active ? value : 0.0;
  }
  return s;
}

ProblemInstance build_instance(const ProblemConfig& config, const SignalPrior& prior) {
  config.validate();
  prior.validate();

  Vector s0 = sample_signal(prior, config.N,
                            derive_seed(config.seed, static_cast<std::uint64_t>(SeedStream::kSignal)));

  std::mt19937_64 matrix_rng(derive_seed(config.seed, static_cast<std::uint64_t>(SeedStream::kMatrix)));
  std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(static_cast<double>(config.M)));
  Matrix A(config.M, config.N);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = entry(matrix_rng);
  }

  std::mt19937_64 noise_rng(derive_seed(config.seed, static_cast<std::uint64_t>(SeedStream::kNoise)));
  const double noise_std = std::sqrt(config.sigma2_e(prior));
  Vector e = Vector::Zero(config.M);
  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = noise(noise_rng);
  }
  return ProblemInstance(config, prior, std::move(s0), std::move(A), std::move(e));
}

double empirical_sdr(const Vector& x, const Vector& s0) {
  if (x.size() != s0.size()) throw ParameterError("empirical_sdr: length mismatch");
  const double err = (x - s0).squaredNorm();
  if (err == 0.0) return kInfiniteSdr;
  return 10.0 * std::log10(s0.squaredNorm() / err);
}

}  // namespace mpamp
