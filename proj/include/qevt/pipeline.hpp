#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qevt/anneal.hpp"
#include "qevt/config.hpp"
#include "qevt/evt.hpp"
#include "qevt/qaoa.hpp"
#include "qevt/qubo.hpp"
#include "qevt/sample_size.hpp"

namespace qevt {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kGeneric = 1;
inline constexpr int kConfig = 2;
inline constexpr int kIo = 3;
inline constexpr int kDegenerate = 4;   // all extreme samples identical
inline constexpr int kUnreachable = 5;  // success probability zero, n_EVT infinite
inline constexpr int kEstimation = 6;   // GEV fit failure or sample-size estimation impossible
}  // namespace exit_code

// Exclusive use of an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path file_;
};

// Seeds of every stage, all derived from the master seed.
struct StageSeeds {
  std::uint64_t instance = 0;
  std::uint64_t anneal = 0;
  std::uint64_t qaoa = 0;
  std::uint64_t sample_size = 0;
  std::uint64_t pool = 0;

  static StageSeeds from(const ExperimentConfig& cfg);
  // Collection seed for the extreme samples of one shots setting.
  static std::uint64_t shots(std::uint64_t master, std::size_t shots_s);
  static std::uint64_t jitter(std::uint64_t master, std::size_t shots_s);
};

QuboInstance resolve_instance(const ExperimentConfig& cfg);
SaConfig baseline_config(const ExperimentConfig& cfg);
QaoaOptimizerConfig optimizer_config(const ExperimentConfig& cfg);

struct ShotSetting {
  std::size_t shots_s = 0;
  std::uint64_t seed = 0;
  std::uint64_t jitter_seed = 0;
  std::vector<double> extremes;
  double delta = 0.0;
  std::optional<GevFit> fit;
  std::vector<ShotEstimate> estimates;  // one per alpha
  // Empty, "degenerate", "fit_failure" or "unreachable".
  std::string breakdown;
  std::string message;
};

struct EstimateReport {
  double y_ideal = 0.0;
  bool y_ideal_overridden = false;
  SaResult baseline;
  QaoaOptimization qaoa;
  std::vector<ShotSetting> settings;

  int exit_code() const;
};

// SA baseline, QAOA tuning, extreme-sample collection, fit and estimates for
// every shots setting. Breakdowns are recorded per setting, not thrown.
EstimateReport run_estimate(const ExperimentConfig& cfg, const QuboInstance& inst);

// Same, reusing a baseline and tuned parameters.
EstimateReport run_estimate(const ExperimentConfig& cfg, const QuboInstance& inst, const SaResult& baseline,
                            const QaoaOptimization& qaoa);

struct ValidationPoint {
  int delta = 0;
  std::uint64_t runs = 0;
  std::size_t successes = 0;
  double ratio = 0.0;
};

struct ValidationCurve {
  std::size_t shots_s = 0;
  double alpha = 0.0;
  std::uint64_t n_evt = 0;
  double y_ideal = 0.0;
  std::size_t trials = 0;
  std::vector<ValidationPoint> points;
};

// For each delta, `trials` independent experiments of (n_evt + delta) runs;
// an experiment succeeds when some run's minimum reaches y_ideal.
ValidationCurve run_validation(const ShotSampler& sampler, double y_ideal, std::size_t shots_s, double alpha,
                               std::uint64_t n_evt, int delta_min, int delta_max, std::size_t trials,
                               const NoiseConfig& noise, std::uint64_t master_seed);

struct SweepPoint {
  std::size_t shots_s = 0;
  double mean_minimum = 0.0;
  double sd_minimum = 0.0;
  std::vector<double> minima;
};

struct SweepResult {
  double y_ideal = 0.0;
  std::size_t reps = 0;
  bool high_variance = false;  // a single repetition per point
  std::vector<SweepPoint> points;
};

SweepResult run_shot_sweep(const ShotSampler& sampler, double y_ideal, const std::vector<std::size_t>& grid,
                           std::size_t reps, const NoiseConfig& noise, std::uint64_t master_seed);

// min_energy column of an extremes CSV.
std::vector<double> load_extremes_csv(const std::filesystem::path& path);

// Each command writes its artifacts under cfg.out_dir (generate writes
// `output`) and returns a process exit code; errors propagate as exceptions.
int cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& output);
int cmd_solve_sa(const ExperimentConfig& cfg);
int cmd_estimate(const ExperimentConfig& cfg);
int cmd_validate(const ExperimentConfig& cfg);
int cmd_shot_sweep(const ExperimentConfig& cfg);
int cmd_sample_size(const ExperimentConfig& cfg);

// Maps an exception escaping a command to its exit code.
int exit_code_for(const std::exception& e);

}  // namespace qevt
