// qevt: run-count estimation for sampled QAOA via extreme value theory.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qevt/config.hpp"
#include "qevt/error.hpp"
#include "qevt/pipeline.hpp"

namespace {

using qevt::ExperimentConfig;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

struct InstanceFlags {
  std::optional<std::string> path;
  std::optional<std::size_t> n;
  std::optional<std::size_t> k;
  std::optional<std::string> style;
  std::optional<double> scale;
  std::optional<double> signal_to_noise;
  std::optional<double> resolution;
  std::optional<double> penalty_weight;
};

struct Flags {
  Common common;
  InstanceFlags instance;
  std::string output;
  // solve-sa
  std::optional<std::size_t> sweeps;
  std::optional<std::size_t> sa_restarts;
  std::optional<double> cooling_rate;
  std::optional<double> initial_temperature;
  // estimate / shot-sweep / validate
  std::vector<std::size_t> shots;
  std::optional<std::size_t> runs;
  std::vector<double> alphas;
  std::optional<std::size_t> depth;
  std::optional<std::size_t> qaoa_restarts;
  std::optional<std::size_t> qaoa_evaluations;
  std::optional<std::string> initial_state;
  std::optional<double> noise;
  std::optional<double> y_ideal;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> n_evt;
  std::optional<int> delta_min;
  std::optional<int> delta_max;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> validate_shots;
  std::optional<double> validate_alpha;
  // sample-size
  std::optional<std::string> pool;
  std::vector<double> synthetic_gev;
  std::optional<std::size_t> pool_size;
  std::optional<std::size_t> n_min;
  std::optional<std::size_t> n_max;
  std::optional<std::size_t> stride;
  std::optional<std::size_t> reps_i;
  std::optional<std::size_t> reps_j;
  std::optional<double> level;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out-dir", c.out_dir, "directory for artifacts");
}

void add_instance(CLI::App* cmd, InstanceFlags& f) {
  cmd->add_option("--instance", f.path, "instance file (.json or .csv) instead of a synthetic one");
  cmd->add_option("--n", f.n, "synthetic instance size");
  cmd->add_option("--k", f.k, "cardinality target");
  cmd->add_option("--style", f.style, "generator style: pdqubo-like or uniform");
  cmd->add_option("--scale", f.scale, "bound on |Q_ij|");
  cmd->add_option("--signal-to-noise", f.signal_to_noise, "relevance vs noise weight (pdqubo-like)");
  cmd->add_option("--resolution", f.resolution, "entry rounding step, 0 for none");
  cmd->add_option("--penalty-weight", f.penalty_weight, "cardinality penalty multiplier");
}

template <class T>
void set(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

ExperimentConfig build_config(const Flags& f) {
  ExperimentConfig cfg = f.common.config.empty() ? ExperimentConfig{} : qevt::load_config(f.common.config);
  set(f.common.seed, cfg.seed);
  if (f.common.out_dir) cfg.out_dir = *f.common.out_dir;

  const auto& in = f.instance;
  if (in.path) cfg.instance.path = *in.path;
  set(in.n, cfg.instance.n);
  set(in.k, cfg.instance.k);
  if (in.style) {
    try {
      cfg.instance.style = qevt::parse_generator_style(*in.style);
    } catch (const qevt::InvalidArgument& e) {
      throw qevt::ConfigError(std::string("--style: ") + e.what());
    }
  }
  set(in.scale, cfg.instance.options.scale);
  set(in.signal_to_noise, cfg.instance.options.signal_to_noise);
  set(in.resolution, cfg.instance.options.resolution);
  set(in.penalty_weight, cfg.instance.options.penalty_weight);

  set(f.sweeps, cfg.sa.sweeps);
  set(f.sa_restarts, cfg.sa.restarts);
  set(f.cooling_rate, cfg.sa.cooling_rate);
  if (f.initial_temperature) cfg.sa.initial_temperature = *f.initial_temperature;

  if (!f.shots.empty()) cfg.shots = f.shots;
  set(f.runs, cfg.runs);
  if (!f.alphas.empty()) cfg.alphas = f.alphas;
  set(f.depth, cfg.qaoa.depth_p);
  set(f.qaoa_restarts, cfg.qaoa.restarts);
  set(f.qaoa_evaluations, cfg.qaoa.max_evaluations);
  if (f.initial_state) {
    try {
      cfg.qaoa.initial_state = qevt::parse_initial_state(*f.initial_state);
    } catch (const qevt::InvalidArgument& e) {
      throw qevt::ConfigError(std::string("--initial-state: ") + e.what());
    }
  }
  set(f.noise, cfg.noise.readout_flip_prob);
  if (f.y_ideal) cfg.y_ideal = *f.y_ideal;

  set(f.reps, cfg.sweep.reps);
  if (f.n_evt) cfg.validation.n_evt = *f.n_evt;
  set(f.delta_min, cfg.validation.delta_min);
  set(f.delta_max, cfg.validation.delta_max);
  set(f.trials, cfg.validation.trials);
  if (f.validate_shots) cfg.validation.shots = *f.validate_shots;
  set(f.validate_alpha, cfg.validation.alpha);

  if (f.pool) cfg.pool.path = *f.pool;
  if (!f.synthetic_gev.empty()) cfg.pool.synthetic_gev = qevt::GevParams{f.synthetic_gev[0], f.synthetic_gev[1], f.synthetic_gev[2]};
  set(f.pool_size, cfg.pool.synthetic_size);
  set(f.n_min, cfg.sample_size.n_min);
  set(f.n_max, cfg.sample_size.n_max);
  set(f.stride, cfg.sample_size.stride);
  set(f.reps_i, cfg.sample_size.reps_i);
  set(f.reps_j, cfg.sample_size.reps_j);
  set(f.level, cfg.sample_size.level);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qevt: estimate how many QAOA runs reach a classical baseline, via extreme value theory"};
  app.require_subcommand(1);
  Flags f;

  auto* generate = app.add_subcommand("generate", "write a synthetic cardinality-constrained QUBO instance");
  add_common(generate, f.common);
  add_instance(generate, f.instance);
  generate->add_option("-o,--output", f.output, "instance file to write (.json or .csv)")->required();

  auto* solve_sa = app.add_subcommand("solve-sa", "simulated-annealing baseline (sa_result.json)");
  add_common(solve_sa, f.common);
  add_instance(solve_sa, f.instance);
  solve_sa->add_option("--sweeps", f.sweeps, "sweeps per restart");
  solve_sa->add_option("--restarts", f.sa_restarts, "independent restarts");
  solve_sa->add_option("--cooling-rate", f.cooling_rate, "geometric cooling factor");
  solve_sa->add_option("--initial-temperature", f.initial_temperature, "starting temperature");

  auto* estimate = app.add_subcommand("estimate", "baseline, QAOA tuning, extreme samples, GEV fit and n_EVT");
  add_common(estimate, f.common);
  add_instance(estimate, f.instance);
  estimate->add_option("--shots", f.shots, "shots per run, one or more settings");
  estimate->add_option("--runs", f.runs, "extreme samples (runs) per setting");
  estimate->add_option("--alpha", f.alphas, "confidence levels");
  estimate->add_option("--depth", f.depth, "QAOA depth p");
  estimate->add_option("--qaoa-restarts", f.qaoa_restarts, "optimizer restarts");
  estimate->add_option("--qaoa-evaluations", f.qaoa_evaluations, "objective evaluations per restart");
  estimate->add_option("--initial-state", f.initial_state, "paper or standard");
  estimate->add_option("--noise", f.noise, "readout bit-flip probability");
  estimate->add_option("--y-ideal", f.y_ideal, "target energy instead of the annealing baseline");

  auto* validate = app.add_subcommand("validate", "empirical success ratio around n_EVT (needs an estimate report)");
  add_common(validate, f.common);
  validate->add_option("--n-evt", f.n_evt, "run count to validate instead of the report's");
  validate->add_option("--delta-min", f.delta_min, "smallest offset from n_EVT");
  validate->add_option("--delta-max", f.delta_max, "largest offset from n_EVT");
  validate->add_option("--trials", f.trials, "independent experiments per offset");
  validate->add_option("--shots", f.validate_shots, "shots setting of the report to validate");
  validate->add_option("--alpha", f.validate_alpha, "confidence level of the report to validate");
  validate->add_option("--noise", f.noise, "readout bit-flip probability");

  auto* sweep = app.add_subcommand("shot-sweep", "average run minimum across shot counts");
  add_common(sweep, f.common);
  add_instance(sweep, f.instance);
  sweep->add_option("--shots", f.shots, "shots grid");
  sweep->add_option("--reps", f.reps, "runs averaged per shots setting");
  sweep->add_option("--depth", f.depth, "QAOA depth p");
  sweep->add_option("--qaoa-restarts", f.qaoa_restarts, "optimizer restarts");
  sweep->add_option("--qaoa-evaluations", f.qaoa_evaluations, "objective evaluations per restart");
  sweep->add_option("--initial-state", f.initial_state, "paper or standard");
  sweep->add_option("--noise", f.noise, "readout bit-flip probability");
  sweep->add_option("--y-ideal", f.y_ideal, "reference energy instead of the annealing baseline");

  auto* sample_size = app.add_subcommand("sample-size", "bootstrap estimate of the extreme samples a stable fit needs");
  add_common(sample_size, f.common);
  sample_size->add_option("--pool", f.pool, "extremes CSV (min_energy column)");
  sample_size->add_option("--synthetic-gev", f.synthetic_gev, "mu sigma xi of a synthetic pool (-y ~ GEV)")
      ->expected(3);
  sample_size->add_option("--pool-size", f.pool_size, "size of the synthetic pool");
  sample_size->add_option("--n-min", f.n_min, "smallest sample size tested");
  sample_size->add_option("--n-max", f.n_max, "largest sample size tested");
  sample_size->add_option("--stride", f.stride, "step between tested sizes");
  sample_size->add_option("--reps-i", f.reps_i, "bootstrap refits per test");
  sample_size->add_option("--reps-j", f.reps_j, "test repetitions per size");
  sample_size->add_option("--level", f.level, "significance level for the crossing");

  std::vector<std::size_t> sweep_shots;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return qevt::exit_code::kConfig;
  }

  try {
    if (sweep->parsed()) {
      // --shots names the sweep grid here, not the estimate settings.
      std::swap(f.shots, sweep_shots);
    }
    ExperimentConfig cfg = build_config(f);
    if (!sweep_shots.empty()) cfg.sweep.shots = sweep_shots;
    if (generate->parsed()) return qevt::cmd_generate(cfg, f.output);
    if (solve_sa->parsed()) return qevt::cmd_solve_sa(cfg);
    if (estimate->parsed()) return qevt::cmd_estimate(cfg);
    if (validate->parsed()) return qevt::cmd_validate(cfg);
    if (sweep->parsed()) return qevt::cmd_shot_sweep(cfg);
    if (sample_size->parsed()) return qevt::cmd_sample_size(cfg);
  } catch (const qevt::FitFailure& e) {
    std::cerr << "qevt: error: " << e.what() << '\n' << e.diagnostics() << '\n';
    return qevt::exit_code_for(e);
  } catch (const qevt::EstimationImpossible& e) {
    std::cerr << "qevt: error: " << e.what() << '\n' << e.failure_table();
    return qevt::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "qevt: error: " << e.what() << '\n';
    return qevt::exit_code_for(e);
  }
  return qevt::exit_code::kGeneric;
}
