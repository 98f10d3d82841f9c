#include "qevt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include "qevt/error.hpp"
#include "qevt/parallel.hpp"
#include "qevt/random.hpp"

namespace qevt {

namespace {

// Relative eigenvalue floor below which a covariance counts as singular.
constexpr double kSingularRatio = 1e-12;

double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
  return r;
}

struct Covariance {
  Eigen::VectorXd mean;
  Eigen::MatrixXd centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen;
};

Covariance decompose(const Eigen::MatrixXd& samples) {
  const auto m = samples.rows();
  const auto d = samples.cols();
  if (d < 1) throw InvalidArgument("samples need at least one column");
  if (m <= d) {
    throw InsufficientSamples("need more observations (" + std::to_string(m) + ") than dimensions (" +
                              std::to_string(d) + ")");
  }
  if (!samples.allFinite()) throw InvalidArgument("samples must be finite");
  Covariance c;
  c.mean = samples.colwise().mean();
  c.centered = samples.rowwise() - c.mean.transpose();
  const Eigen::MatrixXd s = (c.centered.transpose() * c.centered) / static_cast<double>(m - 1);
  c.eigen.compute(s);
  if (c.eigen.info() != Eigen::Success) throw SingularCovariance("covariance eigendecomposition failed");
  const auto& ev = c.eigen.eigenvalues();
  const double largest = ev.maxCoeff();
  if (!(largest > 0.0) || ev.minCoeff() <= kSingularRatio * largest) {
    throw SingularCovariance("sample covariance is singular (samples collapse onto a lower-dimensional set)");
  }
  return c;
}

// Royston's polynomial approximation to the Shapiro-Wilk coefficients
// a_1..a_{n/2} (positive, for the upper half of the order statistics).
std::vector<double> shapiro_wilk_coefficients(std::size_t n) {
  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::numbers::sqrt2 / 2.0;
    return a;
  }
  const boost::math::normal standard;
  const double an25 = static_cast<double>(n) + 0.25;
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = boost::math::quantile(standard, (static_cast<double>(i + 1) - 0.375) / an25);
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(static_cast<double>(n));
  const double a1 = poly(c1, rsn) - m[0] / ssumm2;

  std::size_t first_scaled = 1;
  double fac = 0.0;
  if (n > 5) {
    first_scaled = 2;
    const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[1] = a2;
  } else {
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
  }
  a[0] = a1;
  for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

double shapiro_wilk_p_value(double w, std::size_t n) {
  if (n == 3) {
    constexpr double pi6 = 6.0 / std::numbers::pi;
    constexpr double stqr = std::numbers::pi / 3.0;
    return std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
  }
  if (w >= 1.0) return 1.0;
  static constexpr double g[] = {-2.273, 0.459};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};

  const double an = static_cast<double>(n);
  double y = std::log(1.0 - w);
  double mean = 0.0;
  double sd = 0.0;
  if (n <= 11) {
    const double gamma = poly(g, an);
    if (y >= gamma) return 1e-99;
    y = -std::log(gamma - y);
    mean = poly(c3, an);
    sd = std::exp(poly(c4, an));
  } else {
    const double xx = std::log(an);
    mean = poly(c5, xx);
    sd = std::exp(poly(c6, xx));
  }
  return boost::math::cdf(boost::math::complement(boost::math::normal(mean, sd), y));
}

double shapiro_wilk_w(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 3 || n > 5000) {
    throw InvalidArgument("Shapiro-Wilk needs 3..5000 observations, got " + std::to_string(n));
  }
  std::vector<double> x(xs.begin(), xs.end());
  std::sort(x.begin(), x.end());
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("Shapiro-Wilk observations must be finite");
  }
  const double range = x.back() - x.front();
  if (!(range > 1e-19 * std::max(1.0, std::abs(x.front())))) {
    throw DegenerateSamples("Shapiro-Wilk input has zero variance");
  }
  // Scale by the range for conditioning; W is scale-invariant.
  double mean = 0.0;
  for (double& v : x) {
    v /= range;
    mean += v;
  }
  mean /= static_cast<double>(n);
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);

  thread_local std::map<std::size_t, std::vector<double>> coefficient_cache;
  auto it = coefficient_cache.find(n);
  if (it == coefficient_cache.end()) it = coefficient_cache.emplace(n, shapiro_wilk_coefficients(n)).first;
  const auto& a = it->second;
  double num = 0.0;
  double ssa = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += a[i] * (x[n - 1 - i] - x[i]);
    ssa += 2.0 * a[i] * a[i];
  }
  return std::min(1.0, num * num / (ssa * ssq));
}

Eigen::MatrixXd standardize(const Covariance& c) {
  const auto& ev = c.eigen.eigenvalues();
  const Eigen::MatrixXd& v = c.eigen.eigenvectors();
  const Eigen::MatrixXd inv_sqrt = v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  return c.centered * inv_sqrt;
}

double statistic_of(const Eigen::MatrixXd& z) {
  double total = 0.0;
  std::vector<double> column(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) column[static_cast<std::size_t>(i)] = z(i, j);
    total += shapiro_wilk_w(column);
  }
  return total / static_cast<double>(z.cols());
}

using NullKey = std::tuple<Eigen::Index, Eigen::Index, std::size_t, std::uint64_t>;

// Sorted null statistics for one (m, d, replicates, seed).
std::shared_ptr<const std::vector<double>> null_distribution(Eigen::Index m, Eigen::Index d,
                                                             const MultivariateSwOptions& options) {
  static std::mutex mutex;
  static std::map<NullKey, std::shared_ptr<const std::vector<double>>> cache;
  const NullKey key{m, d, options.replicates, options.seed};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  std::vector<double> stats(options.replicates, std::numeric_limits<double>::quiet_NaN());
  parallel_for(options.replicates, [&](std::size_t r) {
    Rng rng(derive_seed(options.seed, {stream::kCalibration, static_cast<std::uint64_t>(m),
                                       static_cast<std::uint64_t>(d), r}));
    Eigen::MatrixXd sample(m, d);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) sample(i, j) = standard_normal(rng);
    }
    try {
      stats[r] = statistic_of(standardize(decompose(sample)));
    } catch (const Error&) {
      // measure-zero for Gaussian draws; left out of the reference set
    }
  });
  stats.erase(std::remove_if(stats.begin(), stats.end(), [](double v) { return std::isnan(v); }), stats.end());
  std::sort(stats.begin(), stats.end());
  auto shared = std::make_shared<const std::vector<double>>(std::move(stats));

  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(shared)).first->second;
}

}  // namespace

std::string_view to_string(TestMethod method) {
  switch (method) {
    case TestMethod::HotellingT2:
      return "hotelling_t2";
    case TestMethod::ShapiroWilkUnivariate:
      return "shapiro_wilk_uni";
    case TestMethod::ShapiroWilkMultivariate:
      return "shapiro_wilk_multi";
  }
  return "unknown";
}

TestResult hotelling_t2(const Eigen::MatrixXd& samples, const Eigen::VectorXd& mu0) {
  if (mu0.size() != samples.cols()) throw InvalidArgument("reference mean dimension does not match the samples");
  const Covariance c = decompose(samples);
  const auto m = static_cast<double>(samples.rows());
  const auto d = static_cast<double>(samples.cols());

  const Eigen::VectorXd diff = c.mean - mu0;
  const Eigen::VectorXd rotated = c.eigen.eigenvectors().transpose() * diff;
  const double quad = (rotated.array().square() / c.eigen.eigenvalues().array()).sum();
  const double t2 = m * quad;

  const double f = t2 * (m - d) / (d * (m - 1.0));
  const boost::math::fisher_f dist(d, m - d);
  const double p = t2 > 0.0 ? boost::math::cdf(boost::math::complement(dist, f)) : 1.0;
  return {t2, std::clamp(p, 0.0, 1.0), TestMethod::HotellingT2};
}

TestResult shapiro_wilk_univariate(std::span<const double> xs) {
  const double w = shapiro_wilk_w(xs);
  return {w, std::clamp(shapiro_wilk_p_value(w, xs.size()), 0.0, 1.0), TestMethod::ShapiroWilkUnivariate};
}

double shapiro_wilk_multivariate_statistic(const Eigen::MatrixXd& samples) {
  if (samples.cols() < 2) throw InvalidArgument("multivariate Shapiro-Wilk needs d >= 2");
  return statistic_of(standardize(decompose(samples)));
}

TestResult shapiro_wilk_multivariate(const Eigen::MatrixXd& samples, const MultivariateSwOptions& options) {
  if (options.replicates == 0) throw InvalidArgument("calibration needs at least one replicate");
  const double observed = shapiro_wilk_multivariate_statistic(samples);
  const auto null = null_distribution(samples.rows(), samples.cols(), options);
  if (null->empty()) throw Error("multivariate Shapiro-Wilk calibration produced no replicates");
  const auto at_most = std::upper_bound(null->begin(), null->end(), observed) - null->begin();
  const double p = static_cast<double>(at_most) / static_cast<double>(null->size());
  return {observed, p, TestMethod::ShapiroWilkMultivariate};
}

RegressionLine fit_regression_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("regression needs equally many x and y values");
  if (xs.size() < 2) throw InvalidArgument("regression needs at least two points");
  const double count = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("regression needs at least two distinct x values");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

Crossing crossing_sample_size(const RegressionLine& line, double level, std::size_t n_min, std::size_t n_max) {
  if (n_min > n_max) throw InvalidArgument("n_min must not exceed n_max");
  if (!(line.slope > 0.0)) return {n_max, true};
  if (line.at(static_cast<double>(n_min)) >= level) return {n_min, false};
  const double solution = (level - line.intercept) / line.slope;
  const double n = std::ceil(solution - 1e-9 * std::max(1.0, std::abs(solution)));
  if (n > static_cast<double>(n_max)) return {n_max, true};
  return {std::max(n_min, static_cast<std::size_t>(n)), false};
}

}  // namespace qevt
