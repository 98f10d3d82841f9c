#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "qevt/config.hpp"
#include "qevt/error.hpp"
#include "qevt/pipeline.hpp"
#include "qevt/report.hpp"

using namespace qevt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qevt_test_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough to run in well under a second.
ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.seed = 3;
  cfg.out_dir = out;
  cfg.instance.n = 6;
  cfg.instance.k = 3;
  cfg.qaoa.restarts = 2;
  cfg.qaoa.max_evaluations = 150;
  cfg.shots = {4, 12};
  cfg.runs = 60;
  cfg.sa.sweeps = 200;
  cfg.sa.restarts = 4;
  return cfg;
}

}  // namespace

TEST_CASE("config defaults follow the documented protocol") {
  const ExperimentConfig cfg = parse_config("{}");
  CHECK(cfg.qaoa.depth_p == 3);
  CHECK(cfg.runs == 200);
  CHECK(cfg.shots == std::vector<std::size_t>{500, 1000, 2000});
  CHECK(cfg.alphas == std::vector<double>{0.90, 0.95});
  CHECK(cfg.sample_size.level == 0.05);
  CHECK(cfg.qaoa.initial_state == InitialState::Paper);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config round trip and hash") {
  ExperimentConfig cfg = small_config("somewhere");
  cfg.alphas = {0.8};
  cfg.noise.readout_flip_prob = 0.01;
  cfg.pool.synthetic_gev = GevParams{0.0, 1.0, 0.1};
  const ExperimentConfig back = parse_config(format_config(cfg));
  CHECK(format_config(back) == format_config(cfg));
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(config_hash(cfg).size() == 16);

  ExperimentConfig moved = cfg;
  moved.out_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(cfg));
  moved.seed += 1;
  CHECK(config_hash(moved) != config_hash(cfg));
}

TEST_CASE("config errors name the key") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"qaoa": {"depht_p": 2}})"), doctest::Contains("qaoa.depht_p"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"runs": -4})"), doctest::Contains("runs"), ConfigError);
  // Range checks run in validate(), after command-line overrides.
  CHECK_THROWS_WITH_AS(parse_config(R"({"alphas": [1.5]})").validate(), doctest::Contains("alpha"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"validate": {"trials": 0}})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"instance": {"n": 0}})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("{ nope"), ConfigError);
  CHECK_THROWS_AS(load_config(fresh_dir("cfg") / "missing.json"), IoError);
}

TEST_CASE("stage seeds are derived and distinct") {
  ExperimentConfig cfg;
  cfg.seed = 9;
  const auto a = StageSeeds::from(cfg);
  const auto b = StageSeeds::from(cfg);
  CHECK(a.anneal == b.anneal);
  CHECK(a.instance == 9);
  const std::vector<std::uint64_t> all{a.anneal, a.qaoa, a.sample_size, a.pool, StageSeeds::shots(9, 500),
                                       StageSeeds::shots(9, 1000), StageSeeds::jitter(9, 500)};
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) CHECK(all[i] != all[j]);
  }
  cfg.instance.seed = 44;
  CHECK(StageSeeds::from(cfg).instance == 44);
}

TEST_CASE("output lock") {
  const fs::path dir = fresh_dir("lock");
  {
    OutputLock lock(dir);
    CHECK(fs::exists(dir / ".qevt.lock"));
    CHECK_THROWS_WITH_AS(OutputLock{dir}, doctest::Contains("in use"), IoError);
  }
  CHECK_FALSE(fs::exists(dir / ".qevt.lock"));
  CHECK_NOTHROW(OutputLock{dir});
}

TEST_CASE("estimate: report structure and alpha ordering") {
  const fs::path dir = fresh_dir("estimate");
  const ExperimentConfig cfg = small_config(dir);
  const auto inst = resolve_instance(cfg);
  const auto rep = run_estimate(cfg, inst);
  REQUIRE(rep.settings.size() == 2);
  for (const auto& s : rep.settings) {
    CHECK(s.extremes.size() == cfg.runs);
    if (!s.breakdown.empty()) continue;
    REQUIRE(s.estimates.size() == 2);
    REQUIRE(s.estimates[0].n_evt.has_value());
    REQUIRE(s.estimates[1].n_evt.has_value());
    CHECK(*s.estimates[0].n_evt <= *s.estimates[1].n_evt);
    CHECK(*s.estimates[0].total_shots == *s.estimates[0].n_evt * s.shots_s);
  }
  CHECK(rep.y_ideal == rep.baseline.energy);
}

TEST_CASE("estimate: replay from recorded seeds") {
  const fs::path dir = fresh_dir("replay");
  const ExperimentConfig cfg = small_config(dir);
  REQUIRE(cmd_estimate(cfg) == exit_code::kOk);
  const auto report = nlohmann::json::parse(read_text_file(dir / "report.json"));
  CHECK(report["provenance"]["config_hash"] == config_hash(cfg));
  const std::uint64_t master = report["provenance"]["master_seed"];

  // Rebuild every extreme sample from the master seed and the tuned angles.
  const auto inst = load_instance(dir / "instance.json");
  const auto qp = nlohmann::json::parse(read_text_file(dir / "qaoa_params.json"));
  QaoaParams params;
  params.depth_p = qp["depth_p"];
  params.gammas = qp["gammas"].get<std::vector<double>>();
  params.betas = qp["betas"].get<std::vector<double>>();
  const ShotSampler sampler(QaoaCircuit(inst, cfg.qaoa.initial_state).run(params), inst);
  for (const auto& s : report["settings"]) {
    const std::size_t shots = s["shots_s"];
    CHECK(s["seed"] == StageSeeds::shots(master, shots));
    const auto replayed = collect_extreme_samples(sampler, shots, cfg.runs, cfg.noise, StageSeeds::shots(master, shots));
    CHECK(replayed == load_extremes_csv(dir / s["extremes_file"].get<std::string>()));
    if (!s["fit"].is_null()) {
      const auto fit = fit_gev_minima(jitter(replayed, StageSeeds::jitter(master, shots)));
      CHECK(s["fit"]["mu"].get<double>() == fit.params.mu);
      CHECK(s["fit"]["xi"].get<double>() == fit.params.xi);
    }
  }
}

TEST_CASE("estimate: identical artifacts for identical configs") {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  REQUIRE(cmd_estimate(small_config(a)) == exit_code::kOk);
  REQUIRE(cmd_estimate(small_config(b)) == exit_code::kOk);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    REQUIRE(fs::exists(b / name));
    CHECK_MESSAGE(read_text_file(entry.path()) == read_text_file(b / name), name.string());
    ++compared;
  }
  CHECK(compared >= 8);
}

TEST_CASE("breakdown: degenerate extremes") {
  // One variable whose optimum the optimizer can put all mass on.
  ExperimentConfig cfg = small_config(fresh_dir("degenerate"));
  const QuboInstance inst(1, 1, {-1.0});
  cfg.shots = {50};
  const auto rep = run_estimate(cfg, inst);
  REQUIRE(rep.settings.size() == 1);
  CHECK(rep.settings[0].breakdown == "degenerate");
  CHECK(rep.exit_code() == exit_code::kDegenerate);
}

TEST_CASE("breakdown: unreachable target") {
  ExperimentConfig cfg = small_config(fresh_dir("unreachable"));
  const auto inst = resolve_instance(cfg);
  const auto table = energy_table(inst);
  const double lo = *std::min_element(table.begin(), table.end());
  const double hi = *std::max_element(table.begin(), table.end());
  cfg.y_ideal = lo - 10.0 * (hi - lo);
  const auto rep = run_estimate(cfg, inst);
  bool any = false;
  for (const auto& s : rep.settings) {
    if (s.breakdown != "unreachable") continue;
    any = true;
    for (const auto& e : s.estimates) CHECK(e.unreachable());
  }
  CHECK(any);
  CHECK(rep.exit_code() == exit_code::kUnreachable);
}

TEST_CASE("validation curve") {
  const auto inst = generate_synthetic_q(6, 3, GeneratorStyle::PdquboLike, 2);
  const auto best = brute_force_minimum(inst);
  QaoaOptimizerConfig oc;
  oc.restarts = 2;
  const auto q = optimize_parameters(inst, 2, oc);
  const ShotSampler sampler(QaoaCircuit(inst, oc.variant).run(q.params), inst);
  const auto curve = run_validation(sampler, best.energy, 5, 0.95, 12, -10, 10, 200, {}, 1);
  REQUIRE(curve.points.size() == 21);
  CHECK(curve.points.front().delta == -10);
  CHECK(curve.points.front().runs == 2);
  CHECK(curve.points.back().runs == 22);
  for (const auto& p : curve.points) {
    CHECK(p.ratio >= 0.0);
    CHECK(p.ratio <= 1.0);
  }
  CHECK(curve.points.back().ratio >= curve.points.front().ratio);

  const auto again = run_validation(sampler, best.energy, 5, 0.95, 12, -10, 10, 200, {}, 1);
  for (std::size_t i = 0; i < curve.points.size(); ++i) CHECK(again.points[i].successes == curve.points[i].successes);

  CHECK_THROWS_AS(run_validation(sampler, best.energy, 5, 0.95, 12, -1, 1, 0, {}, 1), InvalidArgument);
  // Offsets below -n_evt mean zero runs, which never succeed.
  const auto clipped = run_validation(sampler, best.energy, 5, 0.95, 3, -5, -3, 10, {}, 1);
  for (const auto& p : clipped.points) {
    CHECK(p.runs == 0);
    CHECK(p.successes == 0);
  }
}

TEST_CASE("shot sweep") {
  const auto inst = generate_synthetic_q(6, 3, GeneratorStyle::PdquboLike, 2);
  const ShotSampler sampler(prepare_initial_state(6, InitialState::Paper), inst);
  const auto one = run_shot_sweep(sampler, 0.0, {40}, 1, {}, 5);
  REQUIRE(one.points.size() == 1);
  CHECK(one.high_variance);
  CHECK(one.points[0].minima.size() == 1);

  const auto s = run_shot_sweep(sampler, 0.0, {5, 50, 500}, 20, {}, 5);
  CHECK_FALSE(s.high_variance);
  CHECK(s.points[2].mean_minimum <= s.points[0].mean_minimum);
  for (const auto& p : s.points) CHECK(p.mean_minimum == doctest::Approx(
                                           std::accumulate(p.minima.begin(), p.minima.end(), 0.0) / 20.0));
}

TEST_CASE("extremes csv diagnostics") {
  const fs::path dir = fresh_dir("csv");
  write_text_file(dir / "ok.csv", "run_index,seed,min_energy,shots_s\n0,1,-0.5,10\n1,2,-0.25,10\n");
  CHECK(load_extremes_csv(dir / "ok.csv") == std::vector<double>{-0.5, -0.25});
  write_text_file(dir / "bad.csv", "run_index,seed,min_energy,shots_s\n0,1,-0.5,10\n1,2,abc,10\n");
  try {
    load_extremes_csv(dir / "bad.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.field() == "min_energy");
  }
  write_text_file(dir / "nocol.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(load_extremes_csv(dir / "nocol.csv"), ParseError);
  CHECK_THROWS_AS(load_extremes_csv(dir / "absent.csv"), IoError);
}

TEST_CASE("exit codes for exceptions") {
  CHECK(exit_code_for(ConfigError("x")) == exit_code::kConfig);
  CHECK(exit_code_for(InvalidArgument("x")) == exit_code::kConfig);
  CHECK(exit_code_for(IoError("x")) == exit_code::kIo);
  CHECK(exit_code_for(ParseError("x")) == exit_code::kIo);
  CHECK(exit_code_for(DegenerateSamples("x")) == exit_code::kDegenerate);
  CHECK(exit_code_for(FitFailure("x", "")) == exit_code::kEstimation);
  CHECK(exit_code_for(EstimationImpossible("x", "")) == exit_code::kEstimation);
  CHECK(exit_code_for(std::runtime_error("x")) == exit_code::kGeneric);
}

TEST_CASE("report helpers") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5e-7) == "-2.5e-07");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");

  SvgPlot plot("t<1>", "x", "y");
  plot.add(PlotSeries{{0.0, 1.0, 2.0}, {1.0, 0.5, 0.25}, "series", "#1f77b4", false, true});
  plot.add(PlotRule{0.6, "level", "#d62728"});
  const std::string svg = plot.render();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("t&lt;1&gt;") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(plot.render() == svg);
}
