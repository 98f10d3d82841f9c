#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qevt/random.hpp"

namespace qevt {

// Generalized extreme value law for block maxima:
//   G(z) = exp(-[1 + xi (z - mu) / sigma]^(-1/xi)),  xi != 0
//   G(z) = exp(-exp(-(z - mu) / sigma)),            xi == 0
// Minima are handled by negation: a fit of minima describes -y.
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;

  void validate() const;
};

// Shape magnitudes below this use the Gumbel branch.
inline constexpr double kGumbelThreshold = 1e-6;

double gev_cdf(const GevParams& params, double z);
// 1 - G(z), accurate when G(z) is close to 1.
double gev_survival(const GevParams& params, double z);
double gev_log_density(const GevParams& params, double z);
double gev_quantile(const GevParams& params, double q);

// Inverse-CDF draws; deterministic for a given seed.
std::vector<double> draw_gev(const GevParams& params, std::size_t count, std::uint64_t seed);

struct JitteredSamples {
  std::vector<double> values;
  double delta = 0.0;
  std::uint64_t seed = 0;
};

// Relative tolerance under which two energies count as the same value.
// Energies summed in different orders disagree in the last few bits.
inline constexpr double kTieTolerance = 1e-12;

// Absolute tie tolerance for a set of energies: kTieTolerance * max |v|.
double tie_tolerance(std::span<const double> values);

// y <= y_ideal, counting values within the tie tolerance as equal.
inline bool reaches(double y, double y_ideal) noexcept {
  return y <= y_ideal + kTieTolerance * std::max(std::abs(y), std::abs(y_ideal));
}

// Smallest gap between sorted unique values, where values closer than
// tie_tolerance are one value. Infinity when there is only one.
double smallest_gap(std::span<const double> values);

// values[i] + U(-delta/2, delta/2) with delta = smallest_gap(values).
// Throws DegenerateSamples when every value is identical.
JitteredSamples jitter(std::span<const double> energies, std::uint64_t seed);

inline constexpr std::size_t kMinFitSamples = 20;
inline constexpr double kShapeBound = 5.0;

struct GevFit {
  GevParams params;  // negated domain
  double nll = 0.0;
  std::size_t samples = 0;
  std::size_t best_start = 0;
  std::size_t evaluations = 0;
};

// Maximum-likelihood GEV fit to -values (the samples are minima). Starts from
// Gumbel moment estimates with shapes {-0.3, -0.1, 0, 0.1, 0.3}; lowest
// negative log-likelihood wins, ties to the earliest start.
GevFit fit_gev_minima(const JitteredSamples& samples);
// Maximum-likelihood fit directly to block maxima.
GevFit fit_gev_maxima(std::span<const double> maxima);

double gev_negative_log_likelihood(const GevParams& params, std::span<const double> maxima);

// P(block minimum <= y_ideal) = 1 - G(-y_ideal) for a fit of minima.
double success_probability(const GevParams& params, double y_ideal);

// Run count; nullopt is the infinite sentinel (target unreachable).
using RunCount = std::optional<std::uint64_t>;

std::string format_run_count(const RunCount& runs);

// Smallest n with 1 - (1 - p)^n >= alpha, i.e. ceil(log(1 - alpha) / log(1 - p)).
RunCount required_runs(double success_prob, double alpha);

struct ShotEstimate {
  double success_prob = 0.0;
  double alpha = 0.0;
  RunCount n_evt;
  std::size_t shots_s = 0;
  RunCount total_shots;
  double y_ideal = 0.0;

  bool unreachable() const noexcept { return !n_evt.has_value(); }
};

ShotEstimate estimate_shots(const GevParams& params, double y_ideal, double alpha, std::size_t shots_s);

}  // namespace qevt
