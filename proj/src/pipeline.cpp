#include "qevt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qevt/error.hpp"
#include "qevt/parallel.hpp"
#include "qevt/random.hpp"
#include "qevt/report.hpp"

namespace qevt {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kInstanceFile = "instance.json";
constexpr const char* kSaFile = "sa_result.json";
constexpr const char* kQaoaFile = "qaoa_params.json";
constexpr const char* kReportFile = "report.json";

std::string extremes_name(std::size_t shots_s) { return "extremes_s" + std::to_string(shots_s) + ".csv"; }

Json run_count_json(const RunCount& runs) { return runs ? Json(*runs) : Json(nullptr); }

Json provenance(const ExperimentConfig& cfg) {
  const StageSeeds seeds = StageSeeds::from(cfg);
  Json p;
  p["version"] = std::string(kVersion);
  p["config_hash"] = config_hash(cfg);
  p["master_seed"] = cfg.seed;
  p["seeds"] = {{"instance", seeds.instance},
                {"anneal", seeds.anneal},
                {"qaoa", seeds.qaoa},
                {"sample_size", seeds.sample_size},
                {"pool", seeds.pool}};
  return p;
}

// Everything the baseline and the tuned parameters depend on. Artifacts with
// a matching key are reused instead of recomputed.
std::string stage_key(const ExperimentConfig& cfg) {
  ExperimentConfig keyed;
  keyed.seed = cfg.seed;
  keyed.instance = cfg.instance;
  keyed.sa = cfg.sa;
  keyed.qaoa = cfg.qaoa;
  return config_hash(keyed);
}

Json parse_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Json sa_json(const SaResult& sa, const SaConfig& cfg, const std::string& key) {
  Json j;
  j["x"] = sa.x;
  j["energy"] = sa.energy;
  j["config"] = {{"initial_temperature", sa.initial_temperature},
                 {"cooling_rate", cfg.cooling_rate},
                 {"sweeps", cfg.sweeps},
                 {"restarts", cfg.restarts},
                 {"seed", cfg.seed}};
  j["stage_key"] = key;
  return j;
}

SaResult sa_from_json(const Json& j) {
  SaResult sa;
  sa.x = j.at("x").get<BitString>();
  sa.energy = j.at("energy").get<double>();
  sa.initial_temperature = j.at("config").at("initial_temperature").get<double>();
  return sa;
}

Json qaoa_json(const QaoaOptimization& q, InitialState variant, const std::string& key) {
  Json j;
  j["depth_p"] = q.params.depth_p;
  j["gammas"] = q.params.gammas;
  j["betas"] = q.params.betas;
  j["expectation"] = q.expectation;
  j["uniform_expectation"] = q.uniform_expectation;
  j["evaluations"] = q.evaluations;
  j["initial_state"] = std::string(to_string(variant));
  j["stage_key"] = key;
  return j;
}

QaoaOptimization qaoa_from_json(const Json& j) {
  QaoaOptimization q;
  q.params.depth_p = j.at("depth_p").get<std::size_t>();
  q.params.gammas = j.at("gammas").get<std::vector<double>>();
  q.params.betas = j.at("betas").get<std::vector<double>>();
  q.params.validate();
  q.expectation = j.value("expectation", 0.0);
  q.uniform_expectation = j.value("uniform_expectation", 0.0);
  q.evaluations = j.value("evaluations", std::size_t{0});
  return q;
}

struct Stage {
  QuboInstance instance;
  SaResult baseline;
  QaoaOptimization qaoa;
};

// Baseline and tuned parameters: loaded when the output directory holds
// artifacts for the same stage key, otherwise computed and written.
Stage prepare_stage(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.out_dir;
  const std::string key = stage_key(cfg);
  QuboInstance inst = resolve_instance(cfg);
  try {
    if (fs::exists(dir / kSaFile) && fs::exists(dir / kQaoaFile) && fs::exists(dir / kInstanceFile)) {
      const Json sa = parse_json_file(dir / kSaFile);
      const Json qa = parse_json_file(dir / kQaoaFile);
      if (sa.value("stage_key", "") == key && qa.value("stage_key", "") == key &&
          load_instance(dir / kInstanceFile) == inst) {
        return {inst, sa_from_json(sa), qaoa_from_json(qa)};
      }
    }
  } catch (const nlohmann::json::exception&) {
    // Unreadable artifacts are recomputed.
  } catch (const ParseError&) {
  }
  SaResult sa = simulated_annealing(inst, baseline_config(cfg));
  QaoaOptimization qaoa = optimize_parameters(inst, cfg.qaoa.depth_p, optimizer_config(cfg));
  save_instance(inst, dir / kInstanceFile);
  write_text_file(dir / kSaFile, sa_json(sa, baseline_config(cfg), key).dump(2) + "\n");
  write_text_file(dir / kQaoaFile, qaoa_json(qaoa, cfg.qaoa.initial_state, key).dump(2) + "\n");
  return {inst, std::move(sa), std::move(qaoa)};
}

ShotSampler make_sampler(const ExperimentConfig& cfg, const QuboInstance& inst, const QaoaParams& params) {
  const QaoaCircuit circuit(inst, cfg.qaoa.initial_state);
  return ShotSampler(circuit.run(params), inst);
}

std::string extremes_csv(const ShotSetting& s) {
  std::string out = "run_index,seed,min_energy,shots_s\n";
  for (std::size_t r = 0; r < s.extremes.size(); ++r) {
    out += std::to_string(r) + ',' + std::to_string(run_seed(s.seed, r)) + ',' + format_double(s.extremes[r]) + ',' +
           std::to_string(s.shots_s) + '\n';
  }
  return out;
}

Json estimate_json(const ShotEstimate& e) {
  return {{"success_prob", e.success_prob},
          {"alpha", e.alpha},
          {"n_evt", run_count_json(e.n_evt)},
          {"shots_s", e.shots_s},
          {"total_shots", run_count_json(e.total_shots)},
          {"y_ideal", e.y_ideal},
          {"unreachable", e.unreachable()}};
}

Json fit_json(const ShotSetting& s) {
  if (!s.fit) return nullptr;
  return {{"mu", s.fit->params.mu},   {"sigma", s.fit->params.sigma}, {"xi", s.fit->params.xi},
          {"nll", s.fit->nll},        {"delta", s.delta},             {"seed", s.jitter_seed},
          {"n_samples", s.fit->samples}};
}

// Histogram of the extreme samples with the fitted density of the minima.
std::string gev_plot(const ShotSetting& s, double y_ideal) {
  SvgPlot plot("Extreme samples, s = " + std::to_string(s.shots_s), "run minimum energy", "density");
  const auto [lo_it, hi_it] = std::minmax_element(s.extremes.begin(), s.extremes.end());
  double lo = *lo_it - 0.5 * s.delta;
  double hi = *hi_it + 0.5 * s.delta;
  if (!(hi > lo)) hi = lo + 1.0;
  constexpr std::size_t kBins = 24;
  PlotBars bars;
  const double width = (hi - lo) / kBins;
  for (std::size_t b = 0; b <= kBins; ++b) bars.edges.push_back(lo + width * static_cast<double>(b));
  bars.heights.assign(kBins, 0.0);
  for (double v : s.extremes) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    bars.heights[std::min(b, kBins - 1)] += 1.0 / (static_cast<double>(s.extremes.size()) * width);
  }
  double top = *std::max_element(bars.heights.begin(), bars.heights.end());
  plot.add(std::move(bars));
  if (s.fit) {
    PlotSeries density;
    density.label = "fitted GEV";
    density.color = "#1f77b4";
    for (int i = 0; i <= 200; ++i) {
      const double y = lo + (hi - lo) * i / 200.0;
      const double f = std::exp(gev_log_density(s.fit->params, -y));
      density.x.push_back(y);
      // Clip the integrable spike at a bounded endpoint so the bars stay visible.
      density.y.push_back(std::min(f, 3.0 * top));
    }
    plot.add(std::move(density));
  }
  PlotSeries target;
  target.label = "y_ideal";
  target.color = "#d62728";
  target.dashed = true;
  target.x = {y_ideal, y_ideal};
  target.y = {0.0, top};
  plot.add(std::move(target));
  return plot.render();
}

void write_estimate_artifacts(const ExperimentConfig& cfg, const QuboInstance& inst, const EstimateReport& rep) {
  const fs::path dir = cfg.out_dir;
  const std::string key = stage_key(cfg);
  save_instance(inst, dir / kInstanceFile);
  write_text_file(dir / kSaFile, sa_json(rep.baseline, baseline_config(cfg), key).dump(2) + "\n");
  write_text_file(dir / kQaoaFile, qaoa_json(rep.qaoa, cfg.qaoa.initial_state, key).dump(2) + "\n");

  std::string estimates_csv = "shots_s,alpha,success_prob,n_evt,total_shots,breakdown\n";
  Json settings = Json::array();
  for (const auto& s : rep.settings) {
    write_text_file(dir / extremes_name(s.shots_s), extremes_csv(s));
    Json fit = fit_json(s);
    if (s.fit) {
      write_text_file(dir / ("fit_s" + std::to_string(s.shots_s) + ".json"), fit.dump(2) + "\n");
      write_text_file(dir / ("gev_s" + std::to_string(s.shots_s) + ".svg"), gev_plot(s, rep.y_ideal));
    }
    Json estimates = Json::array();
    for (const auto& e : s.estimates) {
      estimates.push_back(estimate_json(e));
      estimates_csv += std::to_string(s.shots_s) + ',' + format_double(e.alpha) + ',' + format_double(e.success_prob) +
                       ',' + format_run_count(e.n_evt) + ',' + format_run_count(e.total_shots) + ',' + s.breakdown +
                       '\n';
    }
    if (s.estimates.empty()) estimates_csv += std::to_string(s.shots_s) + ",,,,," + s.breakdown + '\n';
    settings.push_back({{"shots_s", s.shots_s},
                        {"seed", s.seed},
                        {"extremes_file", extremes_name(s.shots_s)},
                        {"n_samples", s.extremes.size()},
                        {"fit", fit},
                        {"estimates", estimates},
                        {"breakdown", s.breakdown.empty() ? Json(nullptr) : Json(s.breakdown)},
                        {"message", s.message}});
  }
  write_text_file(dir / "estimates.csv", estimates_csv);

  Json report;
  report["command"] = "estimate";
  report["instance"] = {{"n", inst.n()}, {"k", inst.k()}, {"penalty_weight", inst.penalty_weight()}};
  report["y_ideal"] = rep.y_ideal;
  report["y_ideal_source"] = rep.y_ideal_overridden ? "config" : "simulated_annealing";
  report["baseline"] = {{"energy", rep.baseline.energy}, {"x", rep.baseline.x}};
  report["qaoa"] = {{"depth_p", rep.qaoa.params.depth_p},
                    {"expectation", rep.qaoa.expectation},
                    {"uniform_expectation", rep.qaoa.uniform_expectation},
                    {"initial_state", std::string(to_string(cfg.qaoa.initial_state))}};
  report["noise"] = {{"readout_flip_prob", cfg.noise.readout_flip_prob}};
  report["runs"] = cfg.runs;
  report["settings"] = settings;
  report["exit_code"] = rep.exit_code();
  report["provenance"] = provenance(cfg);
  write_text_file(dir / kReportFile, report.dump(2) + "\n");
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

OutputLock::OutputLock(const fs::path& dir) : file_(dir / ".qevt.lock") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::FILE* f = std::fopen(file_.string().c_str(), "wx");
  if (f == nullptr) {
    if (fs::exists(file_)) {
      throw IoError("output directory " + dir.string() +
                    " is in use by another qevt process (delete .qevt.lock if it is stale)");
    }
    throw IoError("cannot create lock file in " + dir.string());
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

StageSeeds StageSeeds::from(const ExperimentConfig& cfg) {
  StageSeeds s;
  s.instance = cfg.instance.seed.value_or(cfg.seed);
  s.anneal = derive_seed(cfg.seed, {stream::kAnneal});
  s.qaoa = derive_seed(cfg.seed, {stream::kQaoaOptimizer});
  s.sample_size = derive_seed(cfg.seed, {stream::kBootstrap});
  s.pool = derive_seed(cfg.seed, {stream::kPool});
  return s;
}

std::uint64_t StageSeeds::shots(std::uint64_t master, std::size_t shots_s) {
  return derive_seed(master, {stream::kShots, shots_s});
}

std::uint64_t StageSeeds::jitter(std::uint64_t master, std::size_t shots_s) {
  return derive_seed(master, {stream::kJitter, shots_s});
}

QuboInstance resolve_instance(const ExperimentConfig& cfg) {
  if (cfg.instance.path) return load_instance(*cfg.instance.path);
  return generate_synthetic_q(cfg.instance.n, cfg.instance.k, cfg.instance.style, StageSeeds::from(cfg).instance,
                              cfg.instance.options);
}

SaConfig baseline_config(const ExperimentConfig& cfg) {
  SaConfig sa = cfg.sa;
  sa.seed = StageSeeds::from(cfg).anneal;
  return sa;
}

QaoaOptimizerConfig optimizer_config(const ExperimentConfig& cfg) {
  QaoaOptimizerConfig q;
  q.restarts = cfg.qaoa.restarts;
  q.max_evaluations = cfg.qaoa.max_evaluations;
  q.variant = cfg.qaoa.initial_state;
  q.seed = StageSeeds::from(cfg).qaoa;
  return q;
}

int EstimateReport::exit_code() const {
  auto any = [&](std::string_view kind) {
    return std::any_of(settings.begin(), settings.end(), [&](const ShotSetting& s) { return s.breakdown == kind; });
  };
  if (any("degenerate")) return exit_code::kDegenerate;
  if (any("fit_failure")) return exit_code::kEstimation;
  if (any("unreachable")) return exit_code::kUnreachable;
  return exit_code::kOk;
}

EstimateReport run_estimate(const ExperimentConfig& cfg, const QuboInstance& inst) {
  SaResult baseline = simulated_annealing(inst, baseline_config(cfg));
  QaoaOptimization qaoa = optimize_parameters(inst, cfg.qaoa.depth_p, optimizer_config(cfg));
  return run_estimate(cfg, inst, baseline, qaoa);
}

EstimateReport run_estimate(const ExperimentConfig& cfg, const QuboInstance& inst, const SaResult& baseline,
                            const QaoaOptimization& qaoa) {
  cfg.validate();
  EstimateReport rep;
  rep.baseline = baseline;
  rep.qaoa = qaoa;
  rep.y_ideal_overridden = cfg.y_ideal.has_value();
  rep.y_ideal = cfg.y_ideal.value_or(baseline.energy);
  const ShotSampler sampler = make_sampler(cfg, inst, qaoa.params);

  for (std::size_t shots_s : cfg.shots) {
    ShotSetting s;
    s.shots_s = shots_s;
    s.seed = StageSeeds::shots(cfg.seed, shots_s);
    s.jitter_seed = StageSeeds::jitter(cfg.seed, shots_s);
    s.extremes = collect_extreme_samples(sampler, shots_s, cfg.runs, cfg.noise, s.seed);
    try {
      const JitteredSamples jittered = jitter(s.extremes, s.jitter_seed);
      s.delta = jittered.delta;
      s.fit = fit_gev_minima(jittered);
      for (double alpha : cfg.alphas) {
        s.estimates.push_back(estimate_shots(s.fit->params, rep.y_ideal, alpha, shots_s));
        if (s.estimates.back().unreachable()) {
          s.breakdown = "unreachable";
          s.message = "fitted success probability is zero: y_ideal lies beyond the fitted support";
        }
      }
    } catch (const DegenerateSamples& e) {
      s.breakdown = "degenerate";
      s.message = e.what();
    } catch (const FitFailure& e) {
      s.breakdown = "fit_failure";
      s.message = std::string(e.what()) + ": " + e.diagnostics();
    } catch (const InsufficientSamples& e) {
      s.breakdown = "fit_failure";
      s.message = e.what();
    }
    rep.settings.push_back(std::move(s));
  }
  return rep;
}

ValidationCurve run_validation(const ShotSampler& sampler, double y_ideal, std::size_t shots_s, double alpha,
                               std::uint64_t n_evt, int delta_min, int delta_max, std::size_t trials,
                               const NoiseConfig& noise, std::uint64_t master_seed) {
  if (trials == 0) throw InvalidArgument("trials must be positive");
  if (shots_s == 0) throw InvalidArgument("shots_s must be positive");
  if (delta_min > delta_max) throw InvalidArgument("delta_min must not exceed delta_max");
  noise.validate();
  ValidationCurve curve;
  curve.shots_s = shots_s;
  curve.alpha = alpha;
  curve.n_evt = n_evt;
  curve.y_ideal = y_ideal;
  curve.trials = trials;
  const auto span = static_cast<std::size_t>(delta_max - delta_min) + 1;
  std::vector<char> success(span * trials, 0);
  parallel_for(span * trials, [&](std::size_t cell) {
    const std::size_t d = cell / trials;
    const std::size_t t = cell % trials;
    const long long runs = static_cast<long long>(n_evt) + delta_min + static_cast<long long>(d);
    Rng rng(derive_seed(master_seed, {stream::kValidation, d, t}));
    for (long long r = 0; r < runs; ++r) {
      if (reaches(sampler.run_minimum(shots_s, noise, rng), y_ideal)) {
        success[cell] = 1;
        break;
      }
    }
  });
  for (std::size_t d = 0; d < span; ++d) {
    ValidationPoint p;
    p.delta = delta_min + static_cast<int>(d);
    p.runs = static_cast<std::uint64_t>(std::max<long long>(0, static_cast<long long>(n_evt) + p.delta));
    for (std::size_t t = 0; t < trials; ++t) p.successes += success[d * trials + t];
    p.ratio = static_cast<double>(p.successes) / static_cast<double>(trials);
    curve.points.push_back(p);
  }
  return curve;
}

SweepResult run_shot_sweep(const ShotSampler& sampler, double y_ideal, const std::vector<std::size_t>& grid,
                           std::size_t reps, const NoiseConfig& noise, std::uint64_t master_seed) {
  if (reps == 0) throw InvalidArgument("reps must be positive");
  if (grid.empty()) throw InvalidArgument("shots grid must not be empty");
  SweepResult out;
  out.y_ideal = y_ideal;
  out.reps = reps;
  out.high_variance = reps == 1;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g] == 0) throw InvalidArgument("shots grid entries must be positive");
    SweepPoint p;
    p.shots_s = grid[g];
    p.minima.resize(reps);
    parallel_for(reps, [&](std::size_t r) {
      Rng rng(derive_seed(master_seed, {stream::kSweep, grid[g], r}));
      p.minima[r] = sampler.run_minimum(grid[g], noise, rng);
    });
    p.mean_minimum = mean_of(p.minima);
    double ss = 0.0;
    for (double v : p.minima) ss += (v - p.mean_minimum) * (v - p.mean_minimum);
    p.sd_minimum = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
    out.points.push_back(std::move(p));
  }
  return out;
}

std::vector<double> load_extremes_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string field;
    while (std::getline(h, field, ',')) {
      while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
      while (!field.empty() && field.front() == ' ') field.erase(field.begin());
      header.push_back(field);
    }
  }
  const auto col_it = std::find(header.begin(), header.end(), "min_energy");
  if (col_it == header.end()) throw ParseError("missing min_energy column", 1, "min_energy").in_file(path.string());
  const auto col = static_cast<std::size_t>(col_it - header.begin());
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::size_t c = 0;
    bool found = false;
    while (std::getline(row, field, ',')) {
      if (c++ != col) continue;
      found = true;
      try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument(field);
        values.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("min_energy is not a finite number: '" + field + "'", line_no, "min_energy")
            .in_file(path.string());
      }
    }
    if (!found) throw ParseError("row has no min_energy field", line_no, "min_energy").in_file(path.string());
  }
  return values;
}

int cmd_generate(const ExperimentConfig& cfg, const fs::path& output) {
  cfg.validate();
  if (cfg.instance.path) throw ConfigError("generate needs a synthetic instance recipe, not instance.path");
  const QuboInstance inst = resolve_instance(cfg);
  if (output.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(output.parent_path(), ec);
  }
  save_instance(inst, output);
  std::cout << "wrote " << output.string() << " (n=" << inst.n() << ", k=" << inst.k() << ")\n";
  if (inst.n() <= 20) {
    const Minimum best = brute_force_minimum(inst);
    std::cout << "brute-force optimum: energy " << format_double(best.energy) << ", x = ";
    for (int b : best.x) std::cout << b;
    std::cout << '\n';
  }
  return exit_code::kOk;
}

int cmd_solve_sa(const ExperimentConfig& cfg) {
  cfg.validate();
  OutputLock lock(cfg.out_dir);
  const QuboInstance inst = resolve_instance(cfg);
  const SaConfig sa_cfg = baseline_config(cfg);
  const SaResult sa = simulated_annealing(inst, sa_cfg);
  save_instance(inst, cfg.out_dir / kInstanceFile);
  Json j = sa_json(sa, sa_cfg, stage_key(cfg));
  j["provenance"] = provenance(cfg);
  write_text_file(cfg.out_dir / kSaFile, j.dump(2) + "\n");
  std::cout << "simulated annealing energy " << format_double(sa.energy) << '\n';
  return exit_code::kOk;
}

int cmd_estimate(const ExperimentConfig& cfg) {
  cfg.validate();
  OutputLock lock(cfg.out_dir);
  const QuboInstance inst = resolve_instance(cfg);
  const EstimateReport rep = run_estimate(cfg, inst);
  write_estimate_artifacts(cfg, inst, rep);
  std::cout << "y_ideal " << format_double(rep.y_ideal) << '\n';
  for (const auto& s : rep.settings) {
    std::cout << "s=" << s.shots_s << ':';
    if (!s.breakdown.empty() && s.breakdown != "unreachable") {
      std::cout << ' ' << s.breakdown << " (" << s.message << ")\n";
      continue;
    }
    for (const auto& e : s.estimates) {
      std::cout << " alpha=" << format_double(e.alpha) << " p=" << format_double(e.success_prob)
                << " n_evt=" << format_run_count(e.n_evt);
    }
    std::cout << '\n';
  }
  return rep.exit_code();
}

int cmd_validate(const ExperimentConfig& cfg) {
  cfg.validate();
  OutputLock lock(cfg.out_dir);
  const fs::path dir = cfg.out_dir;
  for (const char* f : {kReportFile, kInstanceFile, kQaoaFile}) {
    if (!fs::exists(dir / f)) throw IoError("missing " + (dir / f).string() + "; run `qevt estimate` first");
  }
  const Json report = parse_json_file(dir / kReportFile);
  const QuboInstance inst = load_instance(dir / kInstanceFile);
  const QaoaOptimization qaoa = qaoa_from_json(parse_json_file(dir / kQaoaFile));
  const double y_ideal = report.at("y_ideal").get<double>();
  const auto& settings = report.at("settings");
  const std::size_t shots_s = cfg.validation.shots.value_or(settings.at(0).at("shots_s").get<std::size_t>());
  const double alpha = cfg.validation.alpha;

  std::optional<std::uint64_t> n_evt = cfg.validation.n_evt;
  if (!n_evt) {
    for (const auto& s : settings) {
      if (s.at("shots_s").get<std::size_t>() != shots_s) continue;
      for (const auto& e : s.at("estimates")) {
        if (std::abs(e.at("alpha").get<double>() - alpha) < 1e-12 && !e.at("n_evt").is_null()) {
          n_evt = e.at("n_evt").get<std::uint64_t>();
        }
      }
    }
  }
  if (!n_evt) {
    throw ConfigError("the estimate report has no finite n_EVT for s=" + std::to_string(shots_s) +
                      " and alpha=" + format_double(alpha) + "; set validate.n_evt");
  }

  const ShotSampler sampler = make_sampler(cfg, inst, qaoa.params);
  const ValidationCurve curve =
      run_validation(sampler, y_ideal, shots_s, alpha, *n_evt, cfg.validation.delta_min, cfg.validation.delta_max,
                     cfg.validation.trials, cfg.noise, cfg.seed);

  std::string csv = "delta,runs,successes,trials,ratio\n";
  Json points = Json::array();
  PlotSeries series;
  series.label = "empirical ratio";
  series.markers = true;
  for (const auto& p : curve.points) {
    csv += std::to_string(p.delta) + ',' + std::to_string(p.runs) + ',' + std::to_string(p.successes) + ',' +
           std::to_string(curve.trials) + ',' + format_double(p.ratio) + '\n';
    points.push_back({{"delta", p.delta}, {"runs", p.runs}, {"successes", p.successes}, {"ratio", p.ratio}});
    series.x.push_back(p.delta);
    series.y.push_back(p.ratio);
  }
  write_text_file(dir / "validation.csv", csv);
  SvgPlot plot("Validation at s = " + std::to_string(shots_s) + ", n_EVT = " + std::to_string(*n_evt),
               "offset from n_EVT (runs)", "fraction of experiments reaching y_ideal");
  plot.add(std::move(series));
  plot.add(PlotRule{alpha, "alpha = " + format_double(alpha)});
  write_text_file(dir / "validation.svg", plot.render());

  Json out;
  out["command"] = "validate";
  out["shots_s"] = shots_s;
  out["alpha"] = alpha;
  out["n_evt"] = *n_evt;
  out["y_ideal"] = y_ideal;
  out["trials"] = curve.trials;
  out["points"] = points;
  out["source_report_hash"] = report.at("provenance").at("config_hash");
  out["provenance"] = provenance(cfg);
  write_text_file(dir / "validation.json", out.dump(2) + "\n");
  for (const auto& p : curve.points) {
    if (p.delta == 0) std::cout << "ratio at n_EVT=" << *n_evt << ": " << format_double(p.ratio) << '\n';
  }
  return exit_code::kOk;
}

int cmd_shot_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  OutputLock lock(cfg.out_dir);
  const Stage stage = prepare_stage(cfg);
  const double y_ideal = cfg.y_ideal.value_or(stage.baseline.energy);
  const ShotSampler sampler = make_sampler(cfg, stage.instance, stage.qaoa.params);
  const SweepResult sweep = run_shot_sweep(sampler, y_ideal, cfg.sweep.shots, cfg.sweep.reps, cfg.noise, cfg.seed);

  std::string csv = "shots_s,mean_minimum,sd_minimum,reps\n";
  Json points = Json::array();
  PlotSeries series;
  series.label = "mean run minimum";
  series.markers = true;
  for (const auto& p : sweep.points) {
    csv += std::to_string(p.shots_s) + ',' + format_double(p.mean_minimum) + ',' + format_double(p.sd_minimum) +
           ',' + std::to_string(sweep.reps) + '\n';
    points.push_back({{"shots_s", p.shots_s},
                      {"mean_minimum", p.mean_minimum},
                      {"sd_minimum", p.sd_minimum},
                      {"minima", p.minima}});
    series.x.push_back(static_cast<double>(p.shots_s));
    series.y.push_back(p.mean_minimum);
  }
  write_text_file(cfg.out_dir / "sweep.csv", csv);
  SvgPlot plot("Average best energy vs shots (" + std::to_string(sweep.reps) + " reps)", "shots per run",
               "average minimum energy");
  plot.add(std::move(series));
  plot.add(PlotRule{y_ideal, "SA baseline", "#555555"});
  write_text_file(cfg.out_dir / "sweep.svg", plot.render());

  Json out;
  out["command"] = "shot-sweep";
  out["y_ideal"] = y_ideal;
  out["reps"] = sweep.reps;
  out["high_variance"] = sweep.high_variance;
  out["points"] = points;
  out["provenance"] = provenance(cfg);
  write_text_file(cfg.out_dir / "sweep.json", out.dump(2) + "\n");
  for (const auto& p : sweep.points) {
    std::cout << "s=" << p.shots_s << " mean minimum " << format_double(p.mean_minimum) << '\n';
  }
  if (sweep.high_variance) std::cout << "note: reps=1, averages are single runs (high variance)\n";
  return exit_code::kOk;
}

int cmd_sample_size(const ExperimentConfig& cfg) {
  cfg.validate();
  OutputLock lock(cfg.out_dir);
  const StageSeeds seeds = StageSeeds::from(cfg);
  std::vector<double> pool;
  std::string source;
  if (cfg.pool.path) {
    pool = load_extremes_csv(*cfg.pool.path);
    source = cfg.pool.path->generic_string();
  } else if (cfg.pool.synthetic_gev) {
    pool = draw_gev(*cfg.pool.synthetic_gev, cfg.pool.synthetic_size, seeds.pool);
    for (double& v : pool) v = -v;
    source = "synthetic_gev";
  } else {
    const fs::path fallback = cfg.out_dir / extremes_name(cfg.shots.front());
    if (!fs::exists(fallback)) {
      throw ConfigError("no pool: set pool.path or pool.synthetic_gev, or run `qevt estimate` into " +
                        cfg.out_dir.string());
    }
    pool = load_extremes_csv(fallback);
    source = fallback.filename().generic_string();
  }

  SampleSizeConfig ss = cfg.sample_size;
  ss.seed = seeds.sample_size;
  ss.normality.seed = derive_seed(cfg.seed, {stream::kCalibration});
  const GevFit reference = reference_parameters(pool, ss.seed);
  SampleSizeResult result;
  try {
    result = estimate_required_extremes(pool, ss, reference.params);
  } catch (const EstimationImpossible& e) {
    write_text_file(cfg.out_dir / "sample_size_failures.csv", e.failure_table());
    throw;
  }

  std::string csv = "n,mean_p_ht2,mean_p_mst,fits_attempted,fits_failed\n";
  Json per_n = Json::array();
  PlotSeries ht2{{}, {}, "Hotelling T2 mean p", "#1f77b4", false, true};
  PlotSeries mst{{}, {}, "multivariate SW mean p", "#2ca02c", false, true};
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  for (const auto& row : result.per_n) {
    csv += std::to_string(row.n) + ',' + (row.mean_p_ht2 ? format_double(*row.mean_p_ht2) : "") + ',' +
           (row.mean_p_mst ? format_double(*row.mean_p_mst) : "") + ',' + std::to_string(row.fits_attempted) + ',' +
           std::to_string(row.fits_failed) + '\n';
    per_n.push_back({{"n", row.n},
                     {"mean_p_ht2", opt(row.mean_p_ht2)},
                     {"mean_p_mst", opt(row.mean_p_mst)},
                     {"fits_attempted", row.fits_attempted},
                     {"fits_failed", row.fits_failed}});
    if (row.mean_p_ht2) {
      ht2.x.push_back(static_cast<double>(row.n));
      ht2.y.push_back(*row.mean_p_ht2);
    }
    if (row.mean_p_mst) {
      mst.x.push_back(static_cast<double>(row.n));
      mst.y.push_back(*row.mean_p_mst);
    }
  }
  write_text_file(cfg.out_dir / "sample_size.csv", csv);

  SvgPlot plot("Bootstrap test p-values vs extreme-sample count", "n", "mean p-value");
  const double lo = static_cast<double>(ss.n_min);
  const double hi = static_cast<double>(ss.n_max);
  plot.add(PlotSeries{{lo, hi}, {result.line_ht2.at(lo), result.line_ht2.at(hi)}, "", "#1f77b4", true, false});
  plot.add(PlotSeries{{lo, hi}, {result.line_mst.at(lo), result.line_mst.at(hi)}, "", "#2ca02c", true, false});
  plot.add(std::move(ht2));
  plot.add(std::move(mst));
  plot.add(PlotRule{ss.level, "level " + format_double(ss.level)});
  write_text_file(cfg.out_dir / "sample_size.svg", plot.render());

  Json out;
  out["command"] = "sample-size";
  out["pool"] = {{"source", source}, {"size", pool.size()}};
  out["config"] = {{"n_min", ss.n_min},   {"n_max", ss.n_max},   {"stride", ss.stride},
                   {"reps_i", ss.reps_i}, {"reps_j", ss.reps_j}, {"level", ss.level},
                   {"failure_threshold", ss.failure_threshold}, {"replicates", ss.normality.replicates}};
  out["seeds"] = {{"bootstrap", ss.seed}, {"calibration", ss.normality.seed}};
  out["theta_sim"] = {{"mu", reference.params.mu}, {"sigma", reference.params.sigma}, {"xi", reference.params.xi}};
  out["per_n"] = per_n;
  out["lines"] = {{"ht2", {{"slope", result.line_ht2.slope}, {"intercept", result.line_ht2.intercept}}},
                  {"mst", {{"slope", result.line_mst.slope}, {"intercept", result.line_mst.intercept}}}};
  out["n_ht2"] = result.n_ht2;
  out["n_mst"] = result.n_mst;
  out["n_estimate"] = result.n_estimate;
  out["flags"] = {{"never_crossed_ht2", result.flags.never_crossed_ht2},
                  {"never_crossed_mst", result.flags.never_crossed_mst},
                  {"degenerate_resamples", result.flags.degenerate_resamples}};
  out["provenance"] = provenance(cfg);
  write_text_file(cfg.out_dir / "sample_size.json", out.dump(2) + "\n");
  std::cout << "n_ht2=" << result.n_ht2 << " n_mst=" << result.n_mst << " n_estimate=" << result.n_estimate << '\n';
  return exit_code::kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return exit_code::kConfig;
  if (dynamic_cast<const InvalidArgument*>(&e) != nullptr) return exit_code::kConfig;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return exit_code::kIo;
  if (dynamic_cast<const ParseError*>(&e) != nullptr) return exit_code::kIo;
  if (dynamic_cast<const DegenerateSamples*>(&e) != nullptr) return exit_code::kDegenerate;
  if (dynamic_cast<const FitFailure*>(&e) != nullptr) return exit_code::kEstimation;
  if (dynamic_cast<const EstimationImpossible*>(&e) != nullptr) return exit_code::kEstimation;
  return exit_code::kGeneric;
}

}  // namespace qevt
