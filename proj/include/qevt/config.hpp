#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qevt/anneal.hpp"
#include "qevt/qaoa.hpp"
#include "qevt/qubo.hpp"
#include "qevt/sample_size.hpp"

namespace qevt {

inline constexpr std::string_view kVersion = "0.1.0";

// Either a file or a synthetic recipe. The synthetic seed defaults to the
// master seed.
struct InstanceSource {
  std::optional<std::filesystem::path> path;
  std::size_t n = 10;
  std::size_t k = 5;
  GeneratorStyle style = GeneratorStyle::PdquboLike;
  GeneratorOptions options;
  std::optional<std::uint64_t> seed;
};

struct QaoaSettings {
  std::size_t depth_p = 3;
  std::size_t max_evaluations = 600;  // per restart
  std::size_t restarts = 10;
  InitialState initial_state = InitialState::Paper;
};

struct ValidationSettings {
  // Shots per run and confidence level whose n_EVT is validated; unset
  // shots picks the first entry of the shots grid.
  std::optional<std::size_t> shots;
  double alpha = 0.95;
  // Overrides the n_EVT read from the estimate report.
  std::optional<std::uint64_t> n_evt;
  int delta_min = -10;
  int delta_max = 10;
  std::size_t trials = 500;
};

struct SweepSettings {
  std::vector<std::size_t> shots{500, 1000, 2000, 5000, 10000, 20000};
  std::size_t reps = 20;
};

// Pool for the sample-size command: an extremes CSV, or negated draws from a
// known GEV (so that -y follows `gev`).
struct PoolSource {
  std::optional<std::filesystem::path> path;
  std::optional<GevParams> synthetic_gev;
  std::size_t synthetic_size = 2000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "qevt-out";
  InstanceSource instance;
  SaConfig sa;
  QaoaSettings qaoa;
  NoiseConfig noise;
  std::vector<std::size_t> shots{500, 1000, 2000};
  std::size_t runs = 200;
  std::vector<double> alphas{0.90, 0.95};
  // Replaces the annealing baseline as the target energy when set.
  std::optional<double> y_ideal;
  SampleSizeConfig sample_size;
  PoolSource pool;
  ValidationSettings validation;
  SweepSettings sweep;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// JSON text with the keys of `format_config`; missing keys keep their
// defaults, unknown keys are rejected.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string format_config(const ExperimentConfig& cfg);

// FNV-1a 64 of the config text with out_dir cleared, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace qevt
