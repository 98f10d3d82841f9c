#include "qevt/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "qevt/error.hpp"
#include "qevt/nelder_mead.hpp"

namespace qevt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kStartShapes[] = {-0.3, -0.1, 0.0, 0.1, 0.3};
constexpr double kInfeasiblePenalty = 1e12;

// Negative log-likelihood at (mu, log sigma, xi) on standardized maxima.
// Points outside the support are scored by a penalty that grows with the
// total violation so the simplex is pushed back toward feasibility.
double penalized_nll(std::span<const double> z, double mu, double log_sigma, double xi) {
  const double sigma = std::exp(log_sigma);
  const double inv_sigma = 1.0 / sigma;
  double nll = static_cast<double>(z.size()) * log_sigma;
  if (std::abs(xi) < kGumbelThreshold) {
    for (double v : z) {
      const double t = (v - mu) * inv_sigma;
      nll += t + std::exp(-t);
    }
    return nll;
  }
  const double inv_xi = 1.0 / xi;
  double violation = 0.0;
  for (double v : z) {
    const double s = 1.0 + xi * (v - mu) * inv_sigma;
    if (s <= 0.0) {
      violation += 1.0 - s;
      continue;
    }
    const double ls = std::log(s);
    nll += (1.0 + inv_xi) * ls + std::exp(-ls * inv_xi);
  }
  if (violation > 0.0) return kInfeasiblePenalty * (1.0 + violation);
  return nll;
}

}  // namespace

void GevParams::validate() const {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(xi)) {
    throw InvalidArgument("GEV parameters must be finite");
  }
  if (!(sigma > 0.0)) throw InvalidArgument("GEV scale sigma must be positive");
}

double gev_cdf(const GevParams& params, double z) {
  params.validate();
  const double t = (z - params.mu) / params.sigma;
  if (std::abs(params.xi) < kGumbelThreshold) return std::exp(-std::exp(-t));
  const double s = 1.0 + params.xi * t;
  if (s <= 0.0) return params.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(s, -1.0 / params.xi));
}

double gev_survival(const GevParams& params, double z) {
  params.validate();
  const double t = (z - params.mu) / params.sigma;
  if (std::abs(params.xi) < kGumbelThreshold) return -std::expm1(-std::exp(-t));
  const double s = 1.0 + params.xi * t;
  if (s <= 0.0) return params.xi > 0.0 ? 1.0 : 0.0;
  return -std::expm1(-std::pow(s, -1.0 / params.xi));
}

double gev_log_density(const GevParams& params, double z) {
  params.validate();
  const double t = (z - params.mu) / params.sigma;
  if (std::abs(params.xi) < kGumbelThreshold) return -std::log(params.sigma) - t - std::exp(-t);
  const double s = 1.0 + params.xi * t;
  if (s <= 0.0) return -kInf;
  const double ls = std::log(s);
  return -std::log(params.sigma) - (1.0 + 1.0 / params.xi) * ls - std::exp(-ls / params.xi);
}

double gev_quantile(const GevParams& params, double q) {
  params.validate();
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("quantile level must lie in (0, 1)");
  const double y = -std::log(q);
  if (std::abs(params.xi) < kGumbelThreshold) return params.mu - params.sigma * std::log(y);
  return params.mu + params.sigma * std::expm1(-params.xi * std::log(y)) / params.xi;
}

std::vector<double> draw_gev(const GevParams& params, std::size_t count, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  std::vector<double> out(count);
  for (double& v : out) v = gev_quantile(params, uniform_open01(rng));
  return out;
}

double tie_tolerance(std::span<const double> values) {
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  return kTieTolerance * scale;
}

double smallest_gap(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double tol = tie_tolerance(values);
  double gap = kInf;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double d = sorted[i] - sorted[i - 1];
    if (d > tol) gap = std::min(gap, d);
  }
  return gap;
}

JitteredSamples jitter(std::span<const double> energies, std::uint64_t seed) {
  for (double v : energies) {
    if (!std::isfinite(v)) throw InvalidArgument("energies must be finite");
  }
  const double delta = smallest_gap(energies);
  if (!std::isfinite(delta)) {
    throw DegenerateSamples("all " + std::to_string(energies.size()) +
                            " extreme samples are identical; no variability to model");
  }
  Rng rng(derive_seed(seed, {stream::kJitter}));
  JitteredSamples out;
  out.delta = delta;
  out.seed = seed;
  out.values.reserve(energies.size());
  for (double v : energies) out.values.push_back(v + (uniform_open01(rng) - 0.5) * delta);
  return out;
}

double gev_negative_log_likelihood(const GevParams& params, std::span<const double> maxima) {
  params.validate();
  double nll = 0.0;
  for (double z : maxima) nll -= gev_log_density(params, z);
  return nll;
}

GevFit fit_gev_maxima(std::span<const double> maxima) {
  const std::size_t count = maxima.size();
  if (count < kMinFitSamples) {
    throw InsufficientSamples("GEV fit needs at least " + std::to_string(kMinFitSamples) + " samples, got " +
                              std::to_string(count));
  }
  double mean = 0.0;
  for (double v : maxima) {
    if (!std::isfinite(v)) throw InvalidArgument("samples must be finite");
    mean += v;
  }
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (double v : maxima) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(count - 1));
  if (!(sd > 0.0)) throw DegenerateSamples("samples have zero variance");

  std::vector<double> z(count);
  double z_min = kInf;
  double z_max = -kInf;
  for (std::size_t i = 0; i < count; ++i) {
    z[i] = (maxima[i] - mean) / sd;
    z_min = std::min(z_min, z[i]);
    z_max = std::max(z_max, z[i]);
  }

  // Gumbel method of moments on the standardized data.
  const double sigma0 = std::sqrt(6.0) / std::numbers::pi;
  const double mu0 = -kEulerGamma * sigma0;

  Box box{{-1e3, -30.0, -kShapeBound}, {1e3, 30.0, kShapeBound}};
  NelderMeadOptions nm;
  nm.max_evaluations = 3000;
  nm.f_tolerance = 1e-11;
  nm.x_tolerance = 1e-7;
  nm.initial_step = {0.1, 0.1, 0.05};

  auto objective = [&z](const std::vector<double>& p) { return penalized_nll(z, p[0], p[1], p[2]); };

  std::ostringstream diagnostics;
  NelderMeadResult best;
  best.value = kInf;
  std::size_t best_start = 0;
  std::size_t evaluations = 0;
  bool any_converged = false;
  for (std::size_t s = 0; s < std::size(kStartShapes); ++s) {
    const double xi = kStartShapes[s];
    double sigma = sigma0;
    // Widen the scale until every point lies inside the support.
    if (xi > 0.0) sigma = std::max(sigma, 1.1 * xi * (mu0 - z_min));
    if (xi < 0.0) sigma = std::max(sigma, 1.1 * -xi * (z_max - mu0));
    auto res = nelder_mead(objective, {mu0, std::log(sigma), xi}, nm, box);
    evaluations += res.evaluations;
    diagnostics << "start " << s << " (xi0=" << xi << "): nll=" << res.value << " evals=" << res.evaluations
                << (res.converged ? " converged" : " not converged") << "; ";
    const bool feasible = std::isfinite(res.value) && res.value < kInfeasiblePenalty;
    if (!feasible) continue;
    any_converged = any_converged || res.converged;
    if (res.value < best.value) {
      best = std::move(res);
      best_start = s;
    }
  }
  if (!std::isfinite(best.value) || best.value >= kInfeasiblePenalty || !any_converged) {
    throw FitFailure("GEV maximum-likelihood fit did not converge", diagnostics.str());
  }

  // Restart from the winner with a fresh simplex.
  auto polished = nelder_mead(objective, best.x, nm, box);
  evaluations += polished.evaluations;
  if (polished.value < best.value) best = std::move(polished);

  GevFit fit;
  fit.params = {mean + sd * best.x[0], sd * std::exp(best.x[1]), best.x[2]};
  fit.nll = best.value + static_cast<double>(count) * std::log(sd);
  fit.samples = count;
  fit.best_start = best_start;
  fit.evaluations = evaluations;
  return fit;
}

GevFit fit_gev_minima(const JitteredSamples& samples) {
  std::vector<double> negated(samples.values.size());
  std::transform(samples.values.begin(), samples.values.end(), negated.begin(), [](double v) { return -v; });
  return fit_gev_maxima(negated);
}

double success_probability(const GevParams& params, double y_ideal) {
  return gev_survival(params, -y_ideal);
}

std::string format_run_count(const RunCount& runs) { return runs ? std::to_string(*runs) : "inf"; }

RunCount required_runs(double success_prob, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("confidence alpha must lie in (0, 1)");
  if (!(success_prob >= 0.0 && success_prob <= 1.0)) throw InvalidArgument("success probability must lie in [0, 1]");
  if (success_prob == 0.0) return std::nullopt;
  if (success_prob == 1.0) return 1;
  const double ratio = std::log1p(-alpha) / std::log1p(-success_prob);
  // Guard against ratios that are integers up to rounding.
  const double runs = std::ceil(ratio * (1.0 - 1e-12));
  if (!(runs < 9.0e18)) return std::nullopt;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(runs));
}

ShotEstimate estimate_shots(const GevParams& params, double y_ideal, double alpha, std::size_t shots_s) {
  if (shots_s == 0) throw InvalidArgument("shots_s must be at least 1");
  ShotEstimate est;
  est.success_prob = success_probability(params, y_ideal);
  est.alpha = alpha;
  est.n_evt = required_runs(est.success_prob, alpha);
  est.shots_s = shots_s;
  est.y_ideal = y_ideal;
  if (est.n_evt) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / shots_s;
    if (*est.n_evt <= limit) est.total_shots = *est.n_evt * shots_s;
  }
  return est;
}

}  // namespace qevt
