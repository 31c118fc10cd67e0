#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "mpamp/quantizer.hpp"

namespace mpamp {

/// Discretised source on a uniform alphabet.
struct DiscreteSource {
  std::vector<double> points;
  std::vector<double> pmf;

  double spacing() const { return points.size() > 1 ? points[1] - points[0] : 0.0; }
  double mean() const;
  double variance() const;
};

/// Uniform alphabet over mean +- 10 sd; pmf from mixture CDF differences over cells
/// centred on each point, tails folded into the endpoints. num_points must be odd and >= 101.
DiscreteSource discretize(const ScalarSourceModel& source, int num_points = 2001);

struct BlahutArimotoOptions {
  /// Stop when successive rate iterates differ by less than this many bits.
  double tol_bits = 1e-7;
  int max_iterations = 100000;
  /// Kernel entries exp(-slope d^2) below exp(-kernel_cutoff) are treated as zero.
  double kernel_cutoff = 60.0;
};

struct RdPoint {
  double rate_bits = 0.0;
  double distortion = 0.0;
  double slope = 0.0;
  int iterations = 0;
  /// Blahut upper-lower bound gap at the returned iterate.
  double gap_bits = 0.0;
};

/// Blahut-Arimoto for squared-error distortion, reproduction alphabet = source alphabet.
/// `slope` multiplies the distortion in the exponent (test channel q(y) exp(-slope (x-y)^2)).
/// `output` optionally carries a warm-start reproduction distribution in and the
/// converged one out. Throws ConvergenceError carrying the last iterate past the cap.
RdPoint blahut_arimoto(const DiscreteSource& source, double slope, const BlahutArimotoOptions& options = {},
                       std::vector<double>* output = nullptr);

/// Monotone (rate, distortion) samples of R(D) for one scalar source.
struct RDCurve {
  std::vector<double> rates;        // nondecreasing, starts at 0
  std::vector<double> distortions;  // nonincreasing, > 0
  double source_sigma2_t = 0.0;
  /// Points with rate above this come from the high-rate extension rather than BA.
  double computed_max_rate = 0.0;
};

struct RdCurveOptions {
  int num_points = 2001;
  BlahutArimotoOptions ba;
  /// Bisection on slope stops once the BA rate is within this many bits of the grid rate.
  double rate_tol_bits = 1e-3;
  /// Grid rates above this are filled by the 6.02 dB/bit high-rate law from the last BA point.
  double max_ba_rate = 5.0;
  /// Coarsen the alphabet at low target rates (about 16 points per sqrt(D), capped at num_points).
  bool adaptive_alphabet = true;
};

/// Default grid: 0..max_ba_rate in 0.25-bit steps, then integer rates up to max_rate.
std::vector<double> default_rate_grid(double max_ba_rate = 5.0, double max_rate = 64.0);

RDCurve rd_curve(const ScalarSourceModel& source, const std::vector<double>& rate_grid,
                 const RdCurveOptions& options = {});

/// Log-distortion linear interpolation in rate; exact at curve points.
/// Throws RangeError outside [rates.front(), rates.back()].
double distortion_at_rate(const RDCurve& curve, double rate_bits);
/// Inverse of distortion_at_rate; distortions above the zero-rate value give 0 bits.
double rate_at_distortion(const RDCurve& curve, double distortion);

/// BA rate at a target distortion, found by bisection on the slope (for calibration checks).
RdPoint rd_point_at_distortion(const DiscreteSource& source, double distortion,
                               const BlahutArimotoOptions& options = {}, double rel_tol = 1e-6);

/// Rate-distortion behaviour of the per-processor source as a function of sigma2_t.
class RateDistortionModel {
 public:
  virtual ~RateDistortionModel() = default;
  virtual double distortion(double sigma2_t, double rate_bits) const = 0;
  virtual double rate(double sigma2_t, double distortion) const = 0;
  virtual std::string name() const = 0;
};

/// Gaussian surrogate D(R) = Var(F^p_t) 2^{-2R}.
class GaussianRdModel : public RateDistortionModel {
 public:
  GaussianRdModel(SignalPrior prior, int P) : prior_(prior), P_(P) {}
  double distortion(double sigma2_t, double rate_bits) const override;
  double rate(double sigma2_t, double distortion) const override;
  std::string name() const override { return "gaussian"; }

 private:
  SignalPrior prior_;
  int P_;
};

/// Curves keyed by (prior, P, sigma2_t quantised to 1e-6 relative). Thread-safe;
/// identical keys keep the last inserted curve. Persists to a versioned text file.
class RdCurveCache {
 public:
  using Key = std::tuple<double, double, double, int, std::int64_t>;

  static Key make_key(const SignalPrior& prior, int P, double sigma2_t);

  bool lookup(const Key& key, RDCurve& out) const;
  void insert(const Key& key, const RDCurve& curve);
  std::size_t size() const;

  /// Text format: first line "mpamp-rdcache 1"; then per curve one line
  /// "curve <epsilon> <mu_s> <sigma_s> <P> <sigma2_key> <sigma2_t> <computed_max_rate> <n>"
  /// followed by n lines "<rate> <distortion>", numbers in %.17g.
  void save(const std::string& path) const;
  /// Merges curves from `path`; a missing file is not an error. Returns curves read.
  std::size_t load(const std::string& path);

 private:
  mutable std::mutex mutex_;
  std::map<Key, RDCurve> curves_;
};

/// Blahut-Arimoto curves tabulated on a geometric sigma2_t grid (nodes r^k, r = 2^(1/nodes_per_octave)),
/// interpolated linearly in (log sigma2_t, log D). Curves are computed on first use.
class TabulatedRdModel : public RateDistortionModel {
 public:
  TabulatedRdModel(SignalPrior prior, int P, RdCurveOptions options = {},
                   std::shared_ptr<RdCurveCache> cache = std::make_shared<RdCurveCache>(),
                   int nodes_per_octave = 4);

  double distortion(double sigma2_t, double rate_bits) const override;
  double rate(double sigma2_t, double distortion) const override;
  std::string name() const override { return "blahut-arimoto"; }

  /// Curve at grid node k (sigma2_t = r^k).
  const RDCurve& node_curve(int k) const;
  double node_sigma2(int k) const;
  std::shared_ptr<RdCurveCache> cache() const { return cache_; }

 private:
  struct Bracket {
    int k;
    double weight;  // on node k + 1
  };
  Bracket bracket(double sigma2_t) const;

  SignalPrior prior_;
  int P_;
  RdCurveOptions options_;
  std::shared_ptr<RdCurveCache> cache_;
  double log_ratio_;
  std::vector<double> grid_;
  mutable std::mutex mutex_;
  mutable std::map<int, RDCurve> nodes_;
};

}  // namespace mpamp
