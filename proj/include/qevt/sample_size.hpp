#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qevt/evt.hpp"
#include "qevt/stats.hpp"

namespace qevt {

struct SampleSizeConfig {
  std::size_t n_min = 20;
  std::size_t n_max = 200;
  std::size_t stride = 5;
  std::size_t reps_i = 30;  // bootstrap refits per test
  std::size_t reps_j = 10;  // test repetitions averaged per n
  std::uint64_t seed = 0;
  double level = 0.05;
  // Share of failed inner fits at one n above which degenerate_resamples is set.
  double failure_threshold = 0.2;
  MultivariateSwOptions normality;

  void validate() const;
  std::vector<std::size_t> grid() const;
};

// Fit of the full pool (jittered once with `seed`): the reference parameters
// every bootstrap fit is tested against.
GevFit reference_parameters(std::span<const double> y_sim, std::uint64_t seed);

struct SampleSizeRow {
  std::size_t n = 0;
  std::optional<double> mean_p_ht2;
  std::optional<double> mean_p_mst;
  std::size_t fits_attempted = 0;
  std::size_t fits_failed = 0;
  std::size_t cells_ht2 = 0;  // repetitions that produced a Hotelling p-value
  std::size_t cells_mst = 0;
};

struct SampleSizeFlags {
  bool never_crossed_ht2 = false;
  bool never_crossed_mst = false;
  bool degenerate_resamples = false;
};

struct SampleSizeResult {
  std::vector<SampleSizeRow> per_n;
  RegressionLine line_ht2;
  RegressionLine line_mst;
  std::size_t n_ht2 = 0;
  std::size_t n_mst = 0;
  std::size_t n_estimate = 0;
  SampleSizeFlags flags;
  std::uint64_t seed = 0;
  GevParams theta_sim;
};

// Bootstrap estimate of how many extreme samples a stable GEV fit needs: at
// each n, reps_j groups of reps_i with-replacement resamples are refitted; the
// parameter triples are tested for mean consistency with theta_sim
// (Hotelling T^2) and for joint normality (multivariate Shapiro-Wilk); the
// averaged p-values are regressed on n and each line's crossing of `level`
// gives n_ht2 and n_mst.
SampleSizeResult estimate_required_extremes(std::span<const double> y_sim, const SampleSizeConfig& cfg,
                                            const GevParams& theta_sim);

}  // namespace qevt
