#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace mpamp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Bernoulli-Gaussian (spike-and-slab) signal prior:
/// zero with probability 1 - epsilon, Gaussian(mu_s, sigma_s^2) otherwise.
struct SignalPrior {
  double epsilon = 0.05;
  double mu_s = 0.0;
  double sigma_s = 1.0;

  /// Throws ParameterError unless 0 < epsilon <= 1 and sigma_s > 0.
  void validate() const;

  double slab_variance() const { return sigma_s * sigma_s; }
  /// E[S0^2] = epsilon * (mu_s^2 + sigma_s^2).
  double second_moment() const { return epsilon * (mu_s * mu_s + sigma_s * sigma_s); }
  double mean() const { return epsilon * mu_s; }
};

struct ProblemConfig {
  int N = 10000;
  int M = 3000;
  int P = 30;
  /// +infinity selects the noiseless model.
  double snr_db = 20.0;
  std::uint64_t seed = 1;

  /// Throws ParameterError / PartitionError on violated invariants.
  void validate() const;

  double kappa() const { return static_cast<double>(M) / N; }
  /// Signal power per measurement, E[S0^2] / kappa (epsilon / kappa for unit slabs).
  double rho(const SignalPrior& prior) const { return prior.second_moment() / kappa(); }
  /// Noise variance implied by the SNR definition SNR = 10 log10(rho / sigma2_e).
  double sigma2_e(const SignalPrior& prior) const;
  int rows_per_processor() const { return M / P; }
};

/// Half-open row interval [begin, end).
struct RowRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

/// Contiguous P-way split of [0, M); throws PartitionError if P does not divide M.
std::vector<RowRange> partition_rows(int M, int P);

/// Deterministic per-purpose seed derived from a master seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Seed streams used by build_instance.
enum class SeedStream : std::uint64_t { kSignal = 1, kMatrix = 2, kNoise = 3 };

/// A generated compressed-sensing problem y = A s0 + e. Immutable once built.
class ProblemInstance {
 public:
  /// Assembles an instance from explicit components; y is computed as A s0 + e.
  ProblemInstance(ProblemConfig config, SignalPrior prior, Vector s0, Matrix A, Vector e);

  const ProblemConfig& config() const { return config_; }
  const SignalPrior& prior() const { return prior_; }
  const Vector& s0() const { return s0_; }
  const Matrix& A() const { return A_; }
  const Vector& e() const { return e_; }
  const Vector& y() const { return y_; }
  const std::vector<RowRange>& row_ranges() const { return row_ranges_; }
  double sigma2_e() const { return config_.sigma2_e(prior_); }

 private:
  ProblemConfig config_;
  SignalPrior prior_;
  Vector s0_;
  Matrix A_;
  Vector e_;
  Vector y_;
  std::vector<RowRange> row_ranges_;
};

Vector sample_signal(const SignalPrior& prior, int N, std::uint64_t seed);

/// Draws A ~ N(0, 1/M) i.i.d., e ~ N(0, sigma2_e) i.i.d. and s0 from the prior,
/// each from its own sub-seed of config.seed.
ProblemInstance build_instance(const ProblemConfig& config, const SignalPrior& prior);

/// Sentinel returned when an SDR is unbounded (exact recovery).
inline constexpr double kInfiniteSdr = std::numeric_limits<double>::infinity();

/// 10 log10(||s0||^2 / ||x - s0||^2) in dB; +inf when x == s0.
double empirical_sdr(const Vector& x, const Vector& s0);

}  // namespace mpamp
