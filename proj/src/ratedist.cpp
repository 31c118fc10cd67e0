#include "mpamp/ratedist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "mpamp/error.hpp"

namespace mpamp {

namespace {

constexpr double kSupportSigmas = 10.0;
constexpr double kDeadAtom = 1e-30;
constexpr double kWarmFloor = 1e-9;
constexpr double kLn2 = std::numbers::ln2;

}  // namespace

double DiscreteSource::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) m += pmf[i] * points[i];
  return m;
}

double DiscreteSource::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) v += pmf[i] * (points[i] - m) * (points[i] - m);
  return v;
}

DiscreteSource discretize(const ScalarSourceModel& source, int num_points) {
  if (num_points < 101 || num_points % 2 == 0) {
    throw ParameterError("discretize: num_points must be odd and at least 101");
  }
  const double mu = source.mean();
  const double half_width = kSupportSigmas * source.sd();
  const double h = 2.0 * half_width / (num_points - 1);
  constexpr double inf = std::numeric_limits<double>::infinity();
  DiscreteSource out;
  out.points.resize(num_points);
  out.pmf.resize(num_points);
  double total = 0.0;
  for (int i = 0; i < num_points; ++i) {
    const double x = mu - half_width + i * h;
    out.points[i] = x;
    const double a = i == 0 ? -inf : x - 0.5 * h;
    const double b = i == num_points - 1 ? inf : x + 0.5 * h;
    out.pmf[i] = source.mass(a, b);
    total += out.pmf[i];
  }
  for (double& p : out.pmf) p /= total;
  return out;
}

RdPoint blahut_arimoto(const DiscreteSource& source, double slope, const BlahutArimotoOptions& options,
                       std::vector<double>* output) {
  if (!(slope > 0.0) || !std::isfinite(slope)) throw ParameterError("blahut_arimoto: slope must be positive");
  if (!(options.tol_bits > 0.0)) throw ParameterError("blahut_arimoto: tol must be positive");
  const int n = static_cast<int>(source.points.size());
  const double h = source.spacing();
  const auto& p = source.pmf;

  // Toeplitz kernel: entries depend on |i - j| only.
  int band = n - 1;
  if (h > 0.0) {
    const double reach = std::sqrt(options.kernel_cutoff / slope) / h;
    band = static_cast<int>(std::min<double>(n - 1, std::ceil(reach)));
  }
  std::vector<double> kern(band + 1);
  std::vector<double> kern_d(band + 1);
  for (int d = 0; d <= band; ++d) {
    const double dist2 = (d * h) * (d * h);
    kern[d] = std::exp(-slope * dist2);
    kern_d[d] = kern[d] * dist2;
  }

  std::vector<double> q;
  if (output && static_cast<int>(output->size()) == n) {
    // Give every atom a foothold again so a warm start can grow support as the slope changes.
    q = *output;
    double total = 0.0;
    for (double& qj : q) {
      qj = std::max(qj, kWarmFloor / n);
      total += qj;
    }
    for (double& qj : q) qj /= total;
  } else {
    q.assign(n, 1.0 / n);
  }
  std::vector<double> z(n), c(n), w(n);

  RdPoint point;
  point.slope = slope;
  double prev_rate = std::numeric_limits<double>::infinity();
  std::vector<int> active;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    // Atoms that have died out stay dead; skipping them makes collapsed low-rate solutions cheap.
    active.clear();
    for (int j = 0; j < n; ++j) {
      if (q[j] > kDeadAtom) {
        active.push_back(j);
      } else {
        q[j] = 0.0;
      }
    }
    const bool sparse = active.size() < static_cast<std::size_t>(band);
    double distortion = 0.0;
    double log_z = 0.0;
    for (int i = 0; i < n; ++i) {
      w[i] = 0.0;
      if (p[i] <= 0.0) continue;
      double zi = 0.0;
      double di = 0.0;
      if (sparse) {
        for (int j : active) {
          const int d = std::abs(i - j);
          if (d > band) continue;
          zi += q[j] * kern[d];
          di += q[j] * kern_d[d];
        }
      } else {
        const int j0 = std::max(0, i - band);
        const int j1 = std::min(n - 1, i + band);
        for (int j = j0; j <= j1; ++j) {
          const int d = std::abs(i - j);
          zi += q[j] * kern[d];
          di += q[j] * kern_d[d];
        }
      }
      z[i] = zi;
      if (zi > 0.0) {
        w[i] = p[i] / zi;
        distortion += w[i] * di;
        log_z += p[i] * std::log(zi);
      }
    }
    std::fill(c.begin(), c.end(), 0.0);
    for (int j : active) {
      const int i0 = std::max(0, j - band);
      const int i1 = std::min(n - 1, j + band);
      double cj = 0.0;
      for (int i = i0; i <= i1; ++i) cj += w[i] * kern[std::abs(i - j)];
      c[j] = cj;
    }
    double norm = 0.0;
    double max_log_c = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (q[j] <= 0.0) continue;
      max_log_c = std::max(max_log_c, std::log(c[j]));
      q[j] *= c[j];
      norm += q[j];
    }
    for (double& qj : q) qj /= norm;

    const double rate_bits = std::max(0.0, (-slope * distortion - log_z) / kLn2);
    point.rate_bits = rate_bits;
    point.distortion = distortion;
    point.iterations = iter;
    point.gap_bits = max_log_c / kLn2;
    if (std::abs(rate_bits - prev_rate) < options.tol_bits) {
      if (output) *output = q;
      return point;
    }
    prev_rate = rate_bits;
  }
  if (output) *output = q;
  std::ostringstream msg;
  msg << "blahut_arimoto: no convergence after " << options.max_iterations << " iterations (slope=" << slope
      << ", rate=" << point.rate_bits << ", distortion=" << point.distortion << ")";
  throw ConvergenceError(msg.str(), point.rate_bits, point.distortion);
}

std::vector<double> default_rate_grid(double max_ba_rate, double max_rate) {
  std::vector<double> grid;
  for (int k = 0; k * 0.25 <= max_ba_rate + 1e-12; ++k) grid.push_back(k * 0.25);
  for (double r = std::floor(max_ba_rate) + 1.0; r <= max_rate + 1e-12; r += 1.0) grid.push_back(r);
  return grid;
}

namespace {

/// Alphabet size giving about 16 points per Gaussian-law sqrt(D) at the target rate,
/// capped at the configured resolution.
int alphabet_for_rate(double rate_bits, int max_points) {
  const double wanted = 2.0 * kSupportSigmas * 16.0 * std::exp2(rate_bits);
  int n = static_cast<int>(std::min<double>(max_points, std::ceil(wanted)));
  n = std::max(n, 101);
  if (n % 2 == 0) ++n;
  return std::min(n, max_points % 2 == 1 ? max_points : max_points - 1);
}

/// Carries a reproduction distribution over to another alphabet on the same span.
std::vector<double> resample(const std::vector<double>& q, const DiscreteSource& from, const DiscreteSource& to) {
  std::vector<double> out(to.points.size());
  const double x0 = from.points.front();
  const double h = from.spacing();
  const int n = static_cast<int>(from.points.size());
  double total = 0.0;
  for (std::size_t i = 0; i < to.points.size(); ++i) {
    const double u = std::clamp((to.points[i] - x0) / h, 0.0, n - 1.0);
    const int k = std::min(static_cast<int>(u), n - 2);
    const double t = u - k;
    out[i] = (1.0 - t) * q[k] + t * q[k + 1];
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace

RDCurve rd_curve(const ScalarSourceModel& source, const std::vector<double>& rate_grid,
                 const RdCurveOptions& options) {
  if (rate_grid.empty() || rate_grid.front() != 0.0) {
    throw ParameterError("rd_curve: rate grid must start at 0");
  }
  if (!std::is_sorted(rate_grid.begin(), rate_grid.end())) throw ParameterError("rd_curve: rate grid must be sorted");
  const double variance = source.variance();

  RDCurve curve;
  curve.source_sigma2_t = source.sigma2_t();
  curve.rates.push_back(0.0);
  curve.distortions.push_back(variance);

  DiscreteSource discrete;
  std::vector<double> q;
  double log_slope = std::log(0.5 / variance);
  double last_rate = 0.0;
  double last_distortion = variance;
  for (double target : rate_grid) {
    if (target <= 0.0) continue;
    if (target > options.max_ba_rate + 1e-12) {
      curve.rates.push_back(target);
      curve.distortions.push_back(last_distortion * std::exp2(-2.0 * (target - last_rate)));
      continue;
    }
    const int n = options.adaptive_alphabet ? alphabet_for_rate(target, options.num_points) : options.num_points;
    if (static_cast<int>(discrete.points.size()) != n) {
      DiscreteSource next = discretize(source, n);
      if (q.empty()) {
        // Start from the Gaussian-law optimum: reproduction variance Var - D.
        const double d_guess = variance * std::exp2(-2.0 * target);
        const double spread = std::max(variance - d_guess, 1e-6 * variance);
        q.resize(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
          const double u = next.points[i] - source.mean();
          q[i] = std::exp(-0.5 * u * u / spread);
          total += q[i];
        }
        for (double& v : q) v /= total;
      } else {
        q = resample(q, discrete, next);
      }
      discrete = std::move(next);
    }
    // Gaussian-shaped guess, then secant steps on (log slope, rate) with a bracket guard.
    log_slope = std::max(log_slope, std::log(std::exp2(2.0 * target) / (2.0 * variance)));
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double r_lo = 0.0;
    double r_hi = 0.0;
    RdPoint pt;
    for (int step = 0; step < 100; ++step) {
      pt = blahut_arimoto(discrete, std::exp(log_slope), options.ba, &q);
      const double err = pt.rate_bits - target;
      if (std::abs(err) < options.rate_tol_bits) break;
      if (err < 0.0) {
        lo = log_slope;
        r_lo = pt.rate_bits;
      } else {
        hi = log_slope;
        r_hi = pt.rate_bits;
      }
      double next;
      if (std::isfinite(lo) && std::isfinite(hi)) {
        next = lo + (target - r_lo) * (hi - lo) / (r_hi - r_lo);
        const double span = hi - lo;
        if (!(next > lo + 0.05 * span && next < hi - 0.05 * span)) next = 0.5 * (lo + hi);
      } else {
        // Gaussian law: d rate / d log slope = 1 / (2 ln 2).
        next = log_slope - err * 2.0 * kLn2;
      }
      log_slope = next;
    }
    curve.rates.push_back(pt.rate_bits);
    curve.distortions.push_back(pt.distortion);
    last_rate = pt.rate_bits;
    last_distortion = pt.distortion;
    curve.computed_max_rate = pt.rate_bits;
  }
  // Enforce the monotone trade-off after rounding noise.
  for (std::size_t i = 1; i < curve.rates.size(); ++i) {
    curve.rates[i] = std::max(curve.rates[i], curve.rates[i - 1]);
    curve.distortions[i] = std::min(curve.distortions[i], curve.distortions[i - 1]);
  }
  return curve;
}

double distortion_at_rate(const RDCurve& curve, double rate_bits) {
  const auto& r = curve.rates;
  if (r.empty() || !(rate_bits >= r.front() && rate_bits <= r.back())) {
    throw RangeError("distortion_at_rate: rate " + std::to_string(rate_bits) + " outside curve span");
  }
  auto it = std::upper_bound(r.begin(), r.end(), rate_bits);
  if (it == r.end()) return curve.distortions.back();
  const std::size_t hi = static_cast<std::size_t>(it - r.begin());
  const std::size_t lo = hi - 1;
  if (rate_bits == r[lo]) return curve.distortions[lo];
  const double t = (rate_bits - r[lo]) / (r[hi] - r[lo]);
  return std::exp((1.0 - t) * std::log(curve.distortions[lo]) + t * std::log(curve.distortions[hi]));
}

double rate_at_distortion(const RDCurve& curve, double distortion) {
  const auto& d = curve.distortions;
  if (!(distortion > 0.0)) throw RangeError("rate_at_distortion: distortion must be positive");
  if (distortion >= d.front()) return 0.0;
  if (distortion < d.back()) throw RangeError("rate_at_distortion: distortion below curve span");
  std::size_t hi = 1;
  while (d[hi] > distortion) ++hi;
  const std::size_t lo = hi - 1;
  if (d[lo] == d[hi]) return curve.rates[lo];
  const double t = (std::log(d[lo]) - std::log(distortion)) / (std::log(d[lo]) - std::log(d[hi]));
  return curve.rates[lo] + t * (curve.rates[hi] - curve.rates[lo]);
}

RdPoint rd_point_at_distortion(const DiscreteSource& source, double distortion,
                               const BlahutArimotoOptions& options, double rel_tol) {
  const double variance = source.variance();
  if (!(distortion > 0.0) || distortion >= variance) {
    throw RangeError("rd_point_at_distortion: distortion must lie in (0, variance)");
  }
  // Distortion decreases with slope; bisect on log slope.
  double lo = std::log(0.25 / variance);
  double hi = std::log(4.0 / distortion);
  std::vector<double> q;
  RdPoint pt;
  for (int step = 0; step < 200; ++step) {
    const double mid = 0.5 * (lo + hi);
    pt = blahut_arimoto(source, std::exp(mid), options, &q);
    if (std::abs(pt.distortion - distortion) < rel_tol * distortion) break;
    if (pt.distortion > distortion) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return pt;
}

double GaussianRdModel::distortion(double sigma2_t, double rate_bits) const {
  if (!(rate_bits >= 0.0)) throw RangeError("GaussianRdModel: negative rate");
  return ScalarSourceModel(prior_, sigma2_t, P_).variance() * std::exp2(-2.0 * rate_bits);
}

double GaussianRdModel::rate(double sigma2_t, double distortion) const {
  const double var = ScalarSourceModel(prior_, sigma2_t, P_).variance();
  if (!(distortion > 0.0)) throw RangeError("GaussianRdModel: distortion must be positive");
  return std::max(0.0, 0.5 * std::log2(var / distortion));
}

RdCurveCache::Key RdCurveCache::make_key(const SignalPrior& prior, int P, double sigma2_t) {
  return {prior.epsilon, prior.mu_s, prior.sigma_s, P, std::llround(std::log(sigma2_t) * 1e6)};
}

bool RdCurveCache::lookup(const Key& key, RDCurve& out) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = curves_.find(key);
  if (it == curves_.end()) return false;
  out = it->second;
  return true;
}

void RdCurveCache::insert(const Key& key, const RDCurve& curve) {
  std::lock_guard<std::mutex> lock(mutex_);
  curves_[key] = curve;
}

std::size_t RdCurveCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return curves_.size();
}

void RdCurveCache::save(const std::string& path) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("RdCurveCache: cannot write " + path);
  std::fprintf(f, "mpamp-rdcache 1\n");
  for (const auto& [key, curve] : curves_) {
    const auto& [eps, mu, sigma, P, s2key] = key;
    std::fprintf(f, "curve %.17g %.17g %.17g %d %lld %.17g %.17g %zu\n", eps, mu, sigma, P,
                 static_cast<long long>(s2key), curve.source_sigma2_t, curve.computed_max_rate,
                 curve.rates.size());
    for (std::size_t i = 0; i < curve.rates.size(); ++i) {
      std::fprintf(f, "%.17g %.17g\n", curve.rates[i], curve.distortions[i]);
    }
  }
  std::fclose(f);
}

std::size_t RdCurveCache::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return 0;
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "mpamp-rdcache" || version != 1) throw Error("RdCurveCache: unrecognised file " + path);
  std::size_t count = 0;
  std::string tag;
  while (in >> tag) {
    if (tag != "curve") throw Error("RdCurveCache: malformed record in " + path);
    double eps, mu, sigma;
    int P;
    long long s2key;
    std::size_t n;
    RDCurve curve;
    in >> eps >> mu >> sigma >> P >> s2key >> curve.source_sigma2_t >> curve.computed_max_rate >> n;
    curve.rates.resize(n);
    curve.distortions.resize(n);
    for (std::size_t i = 0; i < n; ++i) in >> curve.rates[i] >> curve.distortions[i];
    if (!in) throw Error("RdCurveCache: truncated file " + path);
    insert(Key{eps, mu, sigma, P, s2key}, curve);
    ++count;
  }
  return count;
}

TabulatedRdModel::TabulatedRdModel(SignalPrior prior, int P, RdCurveOptions options,
                                   std::shared_ptr<RdCurveCache> cache, int nodes_per_octave)
    : prior_(prior),
      P_(P),
      options_(options),
      cache_(std::move(cache)),
      log_ratio_(kLn2 / nodes_per_octave),
      grid_(default_rate_grid(options.max_ba_rate)) {
  prior_.validate();
  if (nodes_per_octave < 1) throw ParameterError("TabulatedRdModel: nodes_per_octave must be positive");
  if (!cache_) cache_ = std::make_shared<RdCurveCache>();
}

double TabulatedRdModel::node_sigma2(int k) const { return std::exp(k * log_ratio_); }

const RDCurve& TabulatedRdModel::node_curve(int k) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = nodes_.find(k);
  if (it != nodes_.end()) return it->second;
  const double sigma2 = node_sigma2(k);
  const auto key = RdCurveCache::make_key(prior_, P_, sigma2);
  RDCurve curve;
  if (!cache_->lookup(key, curve)) {
    curve = rd_curve(ScalarSourceModel(prior_, sigma2, P_), grid_, options_);
    cache_->insert(key, curve);
  }
  return nodes_.emplace(k, std::move(curve)).first->second;
}

TabulatedRdModel::Bracket TabulatedRdModel::bracket(double sigma2_t) const {
  if (!(sigma2_t > 0.0)) throw RangeError("TabulatedRdModel: sigma2_t must be positive");
  const double x = std::log(sigma2_t) / log_ratio_;
  const double k = std::floor(x);
  double w = x - k;
  if (w < 1e-12) w = 0.0;
  return {static_cast<int>(k), w};
}

double TabulatedRdModel::distortion(double sigma2_t, double rate_bits) const {
  const auto b = bracket(sigma2_t);
  const double d0 = distortion_at_rate(node_curve(b.k), rate_bits);
  if (b.weight == 0.0) return d0;
  const double d1 = distortion_at_rate(node_curve(b.k + 1), rate_bits);
  return std::exp((1.0 - b.weight) * std::log(d0) + b.weight * std::log(d1));
}

double TabulatedRdModel::rate(double sigma2_t, double distortion) const {
  if (!(distortion > 0.0)) throw RangeError("TabulatedRdModel: distortion must be positive");
  if (distortion >= this->distortion(sigma2_t, 0.0)) return 0.0;
  double lo = 0.0;
  double hi = grid_.back();
  if (distortion < this->distortion(sigma2_t, hi)) throw RangeError("TabulatedRdModel: distortion below span");
  for (int i = 0; i < 100 && hi - lo > 1e-10; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (this->distortion(sigma2_t, mid) > distortion) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace mpamp
