#include "qevt/sample_size.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "qevt/error.hpp"
#include "qevt/parallel.hpp"
#include "qevt/random.hpp"

namespace qevt {

namespace {

struct CellOutcome {
  std::size_t failed_fits = 0;
  std::optional<double> p_ht2;
  std::optional<double> p_mst;
};

CellOutcome run_cell(std::span<const double> y_sim, const SampleSizeConfig& cfg, const Eigen::VectorXd& theta,
                     std::size_t n, std::size_t j) {
  CellOutcome out;
  std::vector<GevParams> estimates;
  estimates.reserve(cfg.reps_i);
  std::vector<double> draw(n);
  for (std::size_t i = 0; i < cfg.reps_i; ++i) {
    const std::uint64_t seed = derive_seed(cfg.seed, {stream::kBootstrap, n, j, i});
    Rng rng(seed);
    for (double& v : draw) {
      v = y_sim[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(y_sim.size()))];
    }
    try {
      estimates.push_back(fit_gev_minima(jitter(draw, seed)).params);
    } catch (const DegenerateSamples&) {
      ++out.failed_fits;
    } catch (const FitFailure&) {
      ++out.failed_fits;
    }
  }

  Eigen::MatrixXd triples(static_cast<Eigen::Index>(estimates.size()), 3);
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    triples(row, 0) = estimates[r].mu;
    triples(row, 1) = estimates[r].sigma;
    triples(row, 2) = estimates[r].xi;
  }
  try {
    out.p_ht2 = hotelling_t2(triples, theta).p_value;
  } catch (const SingularCovariance&) {
  } catch (const InsufficientSamples&) {
  }
  try {
    out.p_mst = shapiro_wilk_multivariate(triples, cfg.normality).p_value;
  } catch (const SingularCovariance&) {
  } catch (const InsufficientSamples&) {
  } catch (const DegenerateSamples&) {
  }
  return out;
}

}  // namespace

void SampleSizeConfig::validate() const {
  if (n_min < kMinFitSamples) {
    throw InvalidArgument("n_min must be at least " + std::to_string(kMinFitSamples) + " (GEV fit floor)");
  }
  if (n_max <= n_min) throw InvalidArgument("N_max must exceed n_min");
  if (stride == 0) throw InvalidArgument("stride must be positive");
  if (reps_i <= 3) throw InvalidArgument("reps_i must exceed the parameter dimension (3)");
  if (reps_j == 0) throw InvalidArgument("reps_j must be positive");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
  if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0)) {
    throw InvalidArgument("failure_threshold must lie in [0, 1]");
  }
}

std::vector<std::size_t> SampleSizeConfig::grid() const {
  std::vector<std::size_t> g;
  for (std::size_t n = n_min; n <= n_max; n += stride) g.push_back(n);
  return g;
}

GevFit reference_parameters(std::span<const double> y_sim, std::uint64_t seed) {
  return fit_gev_minima(jitter(y_sim, derive_seed(seed, {stream::kBootstrap})));
}

SampleSizeResult estimate_required_extremes(std::span<const double> y_sim, const SampleSizeConfig& cfg,
                                            const GevParams& theta_sim) {
  cfg.validate();
  theta_sim.validate();
  if (y_sim.size() <= cfg.n_max) {
    throw InvalidArgument("N_max=" + std::to_string(cfg.n_max) + " must be smaller than the pool size " +
                          std::to_string(y_sim.size()) +
                          ": if the subset size approaches the pool, resamples become nearly identical and the "
                          "normality test fails as the sampled distributions collapse to a point");
  }

  const auto grid = cfg.grid();
  const std::size_t cells = grid.size() * cfg.reps_j;
  std::vector<CellOutcome> outcomes(cells);
  Eigen::VectorXd theta(3);
  theta << theta_sim.mu, theta_sim.sigma, theta_sim.xi;

  parallel_for(cells, [&](std::size_t c) {
    outcomes[c] = run_cell(y_sim, cfg, theta, grid[c / cfg.reps_j], c % cfg.reps_j);
  });

  SampleSizeResult result;
  result.seed = cfg.seed;
  result.theta_sim = theta_sim;
  std::vector<double> xs_ht2, ys_ht2, xs_mst, ys_mst;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SampleSizeRow row;
    row.n = grid[g];
    double sum_ht2 = 0.0;
    double sum_mst = 0.0;
    for (std::size_t j = 0; j < cfg.reps_j; ++j) {
      const auto& cell = outcomes[g * cfg.reps_j + j];
      row.fits_attempted += cfg.reps_i;
      row.fits_failed += cell.failed_fits;
      if (cell.p_ht2) {
        sum_ht2 += *cell.p_ht2;
        ++row.cells_ht2;
      }
      if (cell.p_mst) {
        sum_mst += *cell.p_mst;
        ++row.cells_mst;
      }
    }
    if (row.cells_ht2 > 0) {
      row.mean_p_ht2 = sum_ht2 / static_cast<double>(row.cells_ht2);
      xs_ht2.push_back(static_cast<double>(row.n));
      ys_ht2.push_back(*row.mean_p_ht2);
    }
    if (row.cells_mst > 0) {
      row.mean_p_mst = sum_mst / static_cast<double>(row.cells_mst);
      xs_mst.push_back(static_cast<double>(row.n));
      ys_mst.push_back(*row.mean_p_mst);
    }
    if (static_cast<double>(row.fits_failed) > cfg.failure_threshold * static_cast<double>(row.fits_attempted)) {
      result.flags.degenerate_resamples = true;
    }
    result.per_n.push_back(row);
  }

  if (xs_ht2.size() < 2 || xs_mst.size() < 2) {
    std::ostringstream table;
    table << "n,fits_attempted,fits_failed,cells_ht2,cells_mst\n";
    for (const auto& row : result.per_n) {
      table << row.n << ',' << row.fits_attempted << ',' << row.fits_failed << ',' << row.cells_ht2 << ','
            << row.cells_mst << '\n';
    }
    throw EstimationImpossible("too few sample sizes produced test p-values to fit the regression lines",
                               table.str());
  }

  result.line_ht2 = fit_regression_line(xs_ht2, ys_ht2);
  result.line_mst = fit_regression_line(xs_mst, ys_mst);
  const Crossing ht2 = crossing_sample_size(result.line_ht2, cfg.level, cfg.n_min, cfg.n_max);
  const Crossing mst = crossing_sample_size(result.line_mst, cfg.level, cfg.n_min, cfg.n_max);
  result.n_ht2 = ht2.n;
  result.n_mst = mst.n;
  result.flags.never_crossed_ht2 = ht2.never_crossed;
  result.flags.never_crossed_mst = mst.never_crossed;
  // Hotelling's T^2 presumes normality, so the normality requirement wins
  // when it is the larger one.
  if (result.n_ht2 < result.n_mst) {
    result.n_estimate = result.n_mst;
  } else {
    result.n_estimate = result.n_ht2;
  }
  return result;
}

}  // namespace qevt
