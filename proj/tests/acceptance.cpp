// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qevt/config.hpp"
#include "qevt/error.hpp"
#include "qevt/evt.hpp"
#include "qevt/pipeline.hpp"
#include "qevt/qaoa.hpp"
#include "qevt/qubo.hpp"
#include "qevt/random.hpp"
#include "qevt/sample_size.hpp"
#include "qevt/stats.hpp"

using namespace qevt;

namespace {

// Tolerances and budgets.
constexpr double kEquivalenceTol = 1e-9;
constexpr double kEquivalenceSeconds = 10;
constexpr double kRecoveryTol = 0.05;
constexpr int kRecoverySeedsNeeded = 45;
constexpr int kRecoverySeeds = 50;
constexpr double kRecoverySeconds = 60;
constexpr double kTypeOneLevel = 0.05;
constexpr double kTypeOneTol = 0.02;
constexpr std::size_t kHotellingTrials = 2000;
constexpr std::size_t kNormalityTrials = 1000;
constexpr double kCalibrationSeconds = 300;
constexpr double kRatioLow = 0.88;
constexpr double kRatioHigh = 1.00;
constexpr double kRatioNoise = 0.03;
constexpr std::size_t kValidationTrials = 500;
constexpr double kValidationSeconds = 900;
constexpr double kShotsTrendSeconds = 600;
constexpr double kScaleTrendSeconds = 1200;
constexpr double kNoiseTrendSeconds = 900;
constexpr double kStability = 0.30;
constexpr double kSampleSizeSeconds = 600;
constexpr double kSweepRangeShare = 0.05;
constexpr double kSweepSeconds = 1200;
constexpr double kBreakdownSeconds = 5;

struct Line {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Line()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Line line;
  try {
    line = body();
  } catch (const std::exception& e) {
    line = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool ok = line.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s %2d %s: %s; %.1f s (budget %.0f s)\n", ok ? "PASS" : "FAIL", id, name, line.detail.c_str(), secs,
              budget_s);
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string runs_text(const RunCount& r) { return format_run_count(r); }

// Infinite sentinel sorts above every finite count.
double runs_value(const RunCount& r) { return r ? static_cast<double>(*r) : std::numeric_limits<double>::infinity(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

ExperimentConfig instance_config(std::size_t n, std::size_t k, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.instance.n = n;
  cfg.instance.k = k;
  return cfg;
}

const ShotEstimate& estimate_at(const EstimateReport& rep, std::size_t shots, double alpha) {
  for (const auto& s : rep.settings) {
    if (s.shots_s != shots) continue;
    for (const auto& e : s.estimates) {
      if (e.alpha == alpha) return e;
    }
    throw Error("no estimate for s=" + std::to_string(shots) + (s.breakdown.empty() ? "" : " (" + s.breakdown + ")"));
  }
  throw Error("no shots setting " + std::to_string(shots));
}

// Oracles written out term by term.
double direct_qubo(const QuboInstance& inst, std::uint64_t idx) {
  double e = 0.0;
  double ones = 0.0;
  for (std::size_t i = 0; i < inst.n(); ++i) {
    const double xi = static_cast<double>((idx >> i) & 1U);
    ones += xi;
    for (std::size_t j = 0; j < inst.n(); ++j) e += inst.q(i, j) * xi * static_cast<double>((idx >> j) & 1U);
  }
  const double d = ones - static_cast<double>(inst.k());
  return e + inst.penalty_weight() * d * d;
}

double direct_ising(const IsingModel& m, std::uint64_t idx) {
  auto z = [&](std::size_t i) { return ((idx >> i) & 1U) ? 1.0 : -1.0; };
  double e = m.offset;
  for (std::size_t i = 0; i < m.n; ++i) e += m.h[i] * z(i);
  for (const auto& [key, v] : m.j) e += v * z(key.first) * z(key.second);
  return e;
}

Line equivalence() {
  Rng rng(20240601);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 4 + static_cast<std::size_t>(t) % 9;
    std::vector<double> q(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) q[i * n + j] = q[j * n + i] = 2.0 * uniform01(rng) - 1.0;
    }
    const std::size_t k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n + 1));
    const QuboInstance inst(n, k, q);
    const IsingModel m = to_ising(inst);
    for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
      worst = std::max(worst, std::abs(direct_qubo(inst, idx) - direct_ising(m, idx)));
      worst = std::max(worst, std::abs(qubo_energy(inst, idx) - ising_energy(m, idx)));
    }
  }
  return {worst <= kEquivalenceTol, "100 instances, n in 4..12, max |dE| = " + fmt(worst) + " (<= 1e-9)"};
}

Line closed_form() {
  const auto a = required_runs(0.5, 0.95);
  const auto b = required_runs(0.05, 0.95);
  return {a == RunCount{5} && b == RunCount{59}, "(0.5, 0.95) -> " + runs_text(a) + " (5), (0.05, 0.95) -> " +
                                                     runs_text(b) + " (59)"};
}

Line recovery() {
  std::string detail;
  bool pass = true;
  const GevParams laws[] = {{0.0, 1.0, 0.2}, {0.0, 1.0, 0.0}};
  const char* names[] = {"GEV(0,1,0.2)", "Gumbel(0,1)"};
  for (int l = 0; l < 2; ++l) {
    int good = 0;
    for (int s = 0; s < kRecoverySeeds; ++s) {
      JitteredSamples minima;
      minima.values = draw_gev(laws[l], 10000, derive_seed(3000 + l, {static_cast<std::uint64_t>(s)}));
      for (double& v : minima.values) v = -v;
      const GevParams p = fit_gev_minima(minima).params;
      if (std::abs(p.mu - laws[l].mu) <= kRecoveryTol && std::abs(p.sigma - laws[l].sigma) <= kRecoveryTol &&
          std::abs(p.xi - laws[l].xi) <= kRecoveryTol) {
        ++good;
      }
    }
    pass = pass && good >= kRecoverySeedsNeeded;
    detail += std::string(l ? ", " : "") + names[l] + " " + std::to_string(good) + "/50";
  }
  return {pass, detail + " seeds within 0.05 (need >= 45)"};
}

Eigen::MatrixXd null_sample(Rng& rng, const Eigen::MatrixXd& l, const Eigen::VectorXd& mean) {
  Eigen::MatrixXd z(30, 3);
  for (Eigen::Index i = 0; i < 30; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) z(i, j) = standard_normal(rng);
  }
  Eigen::MatrixXd x = z * l.transpose();
  x.rowwise() += mean.transpose();
  return x;
}

Line calibration() {
  Eigen::MatrixXd l(3, 3);
  l << 1.0, 0.0, 0.0, 0.5, 0.9, 0.0, -0.4, 0.3, 0.7;
  Eigen::VectorXd mean(3);
  mean << 0.2, -1.0, 3.0;
  Rng rng(9090);
  std::size_t ht2 = 0;
  for (std::size_t t = 0; t < kHotellingTrials; ++t) {
    if (hotelling_t2(null_sample(rng, l, mean), mean).p_value < kTypeOneLevel) ++ht2;
  }
  std::size_t mst = 0;
  for (std::size_t t = 0; t < kNormalityTrials; ++t) {
    if (shapiro_wilk_multivariate(null_sample(rng, l, mean)).p_value < kTypeOneLevel) ++mst;
  }
  const double r1 = static_cast<double>(ht2) / kHotellingTrials;
  const double r2 = static_cast<double>(mst) / kNormalityTrials;
  const bool pass = std::abs(r1 - kTypeOneLevel) <= kTypeOneTol && std::abs(r2 - kTypeOneLevel) <= kTypeOneTol;
  return {pass, "d=3, m=30: Hotelling " + fmt(r1) + " over " + std::to_string(kHotellingTrials) +
                    ", multivariate SW " + fmt(r2) + " over " + std::to_string(kNormalityTrials) +
                    " (0.05 +/- 0.02)"};
}

Line validation() {
  ExperimentConfig cfg = instance_config(10, 5, 1);
  cfg.shots = {200};
  cfg.alphas = {0.95};
  const auto inst = resolve_instance(cfg);
  const auto rep = run_estimate(cfg, inst);
  const auto& est = estimate_at(rep, 200, 0.95);
  if (!est.n_evt) return {false, "n_EVT is infinite"};
  const ShotSampler sampler(QaoaCircuit(inst, cfg.qaoa.initial_state).run(rep.qaoa.params), inst);
  const auto curve =
      run_validation(sampler, rep.y_ideal, 200, 0.95, *est.n_evt, -10, 10, kValidationTrials, cfg.noise, cfg.seed);
  double at_zero = -1.0;
  double worst_drop = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (curve.points[i].delta == 0) at_zero = curve.points[i].ratio;
    for (std::size_t j = i + 1; j < curve.points.size(); ++j) {
      worst_drop = std::max(worst_drop, curve.points[i].ratio - curve.points[j].ratio);
    }
  }
  const bool pass = at_zero >= kRatioLow && at_zero <= kRatioHigh && worst_drop <= kRatioNoise;
  return {pass, "n=10, s=200, n_EVT=" + runs_text(est.n_evt) + ": ratio at delta=0 " + fmt(at_zero) +
                    " (in [0.88, 1.00]), ratio at delta=-10 " + fmt(curve.points.front().ratio) +
                    ", largest decrease " + fmt(worst_drop) + " (<= 0.03)"};
}

Line shots_trend() {
  ExperimentConfig cfg = instance_config(14, 7, 1);
  cfg.shots = {500, 2000};
  const auto rep = run_estimate(cfg, resolve_instance(cfg));
  bool pass = true;
  std::string detail = "n=14";
  for (double a : {0.90, 0.95}) {
    const auto lo = estimate_at(rep, 500, a).n_evt;
    const auto hi = estimate_at(rep, 2000, a).n_evt;
    pass = pass && runs_value(hi) <= runs_value(lo);
    detail += ", alpha=" + fmt(a, 2) + ": n_EVT(2000)=" + runs_text(hi) + " <= n_EVT(500)=" + runs_text(lo);
  }
  return {pass, detail};
}

Line scale_trend() {
  auto median_runs = [](std::size_t n, std::size_t k, std::string& list) {
    std::vector<double> v;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ExperimentConfig cfg = instance_config(n, k, seed);
      cfg.shots = {100};
      cfg.alphas = {0.95};
      const auto rep = run_estimate(cfg, resolve_instance(cfg));
      const auto& s = rep.settings.front();
      const double r = s.estimates.empty() ? std::numeric_limits<double>::infinity()
                                           : runs_value(s.estimates.front().n_evt);
      v.push_back(r);
      list += (seed > 1 ? " " : "") + (s.estimates.empty() ? s.breakdown : runs_text(s.estimates.front().n_evt));
    }
    return median(v);
  };
  std::string small_list;
  std::string large_list;
  const double small = median_runs(8, 4, small_list);
  const double large = median_runs(14, 7, large_list);
  return {large >= small, "s=100, alpha=0.95: median n_EVT n=14 " + fmt(large) + " [" + large_list + "] >= n=8 " +
                              fmt(small) + " [" + small_list + "]"};
}

Line noise_trend() {
  std::vector<double> clean;
  std::vector<double> noisy;
  std::string list;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg = instance_config(10, 5, seed);
    cfg.shots = {200};
    cfg.alphas = {0.95};
    const auto inst = resolve_instance(cfg);
    const auto base = run_estimate(cfg, inst);
    ExperimentConfig noisy_cfg = cfg;
    noisy_cfg.noise.readout_flip_prob = 0.02;
    const auto rep = run_estimate(noisy_cfg, inst, base.baseline, base.qaoa);
    const auto a = estimate_at(base, 200, 0.95).n_evt;
    const auto b = estimate_at(rep, 200, 0.95).n_evt;
    clean.push_back(runs_value(a));
    noisy.push_back(runs_value(b));
    list += (seed > 1 ? " " : "") + runs_text(a) + "/" + runs_text(b);
  }
  const double mc = median(clean);
  const double mn = median(noisy);
  return {mn >= mc, "n=10, s=200: median n_EVT with flips 0.02 " + fmt(mn) + " >= noiseless " + fmt(mc) +
                        " [noiseless/noisy: " + list + "]"};
}

SampleSizeResult algorithm_one(std::uint64_t master) {
  ExperimentConfig cfg;
  cfg.seed = master;
  const StageSeeds seeds = StageSeeds::from(cfg);
  std::vector<double> pool = draw_gev({0.0, 1.0, 0.1}, 2000, seeds.pool);
  for (double& v : pool) v = -v;
  SampleSizeConfig ss;
  ss.n_min = 20;
  ss.n_max = 200;
  ss.seed = seeds.sample_size;
  const auto theta = reference_parameters(pool, ss.seed).params;
  return estimate_required_extremes(pool, ss, theta);
}

bool same(const SampleSizeResult& a, const SampleSizeResult& b) {
  if (a.per_n.size() != b.per_n.size()) return false;
  for (std::size_t i = 0; i < a.per_n.size(); ++i) {
    if (a.per_n[i].mean_p_ht2 != b.per_n[i].mean_p_ht2 || a.per_n[i].mean_p_mst != b.per_n[i].mean_p_mst) return false;
  }
  return a.n_ht2 == b.n_ht2 && a.n_mst == b.n_mst && a.n_estimate == b.n_estimate &&
         a.line_ht2.slope == b.line_ht2.slope && a.line_mst.slope == b.line_mst.slope;
}

Line sample_size() {
  std::vector<double> estimates;
  std::string list;
  bool pass = true;
  SampleSizeResult first;
  for (std::uint64_t master = 1; master <= 5; ++master) {
    const auto r = algorithm_one(master);
    if (master == 1) first = r;
    const std::size_t branch = r.n_ht2 < r.n_mst ? r.n_mst : r.n_ht2;
    pass = pass && r.n_estimate == branch && r.n_estimate >= 20 && r.n_estimate <= 200 &&
           !r.flags.never_crossed_ht2 && !r.flags.never_crossed_mst;
    estimates.push_back(static_cast<double>(r.n_estimate));
    list += (master > 1 ? " " : "") + std::to_string(r.n_estimate) + "(" + std::to_string(r.n_ht2) + "," +
            std::to_string(r.n_mst) + (r.flags.never_crossed_ht2 ? ",ht2 never crossed" : "") +
            (r.flags.never_crossed_mst ? ",mst never crossed" : "") + ")";
  }
  const bool deterministic = same(first, algorithm_one(1));
  const double med = median(estimates);
  double spread = 0.0;
  for (double e : estimates) spread = std::max(spread, std::abs(e - med) / med);
  pass = pass && deterministic && spread <= kStability;
  return {pass, "pool 2000, n in [20, 200]: n_estimate(n_ht2,n_mst) " + list + ", median " + fmt(med) +
                    ", max deviation " + fmt(spread) + " (<= 0.30), rerun " + (deterministic ? "identical" : "differs")};
}

Line sweep() {
  ExperimentConfig cfg = instance_config(13, 6, 1);
  const auto inst = resolve_instance(cfg);
  const auto rep = run_estimate([&] {
    ExperimentConfig c = cfg;
    c.shots = {500};
    c.runs = kMinFitSamples;
    return c;
  }(), inst);
  const ShotSampler sampler(QaoaCircuit(inst, cfg.qaoa.initial_state).run(rep.qaoa.params), inst);
  const auto s = run_shot_sweep(sampler, rep.y_ideal, {500, 5000, 20000}, 20, cfg.noise, cfg.seed);
  const auto table = energy_table(inst);
  const double range = *std::max_element(table.begin(), table.end()) - *std::min_element(table.begin(), table.end());
  bool monotone = true;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    monotone = monotone && s.points[i].mean_minimum <= s.points[i - 1].mean_minimum;
  }
  const double last = s.points.back().mean_minimum;
  const double bound = rep.baseline.energy + kSweepRangeShare * range;
  return {monotone && last <= bound, "n=13, 20 reps: mean minimum " + fmt(s.points[0].mean_minimum, 6) + " / " +
                                         fmt(s.points[1].mean_minimum, 6) + " / " + fmt(last, 6) +
                                         " at s=500/5000/20000, bound SA + 5% range = " + fmt(bound, 6)};
}

Line breakdown() {
  ExperimentConfig cfg;
  cfg.seed = 1;
  cfg.shots = {500};
  const QuboInstance one(1, 1, {-1.0});
  const auto rep = run_estimate(cfg, one);
  const auto probs = QaoaCircuit(one, cfg.qaoa.initial_state).run(rep.qaoa.params).probabilities();
  const double peak = *std::max_element(probs.begin(), probs.end());
  bool threw = false;
  try {
    jitter(rep.settings.front().extremes, 1);
  } catch (const DegenerateSamples&) {
    threw = true;
  }
  const bool degenerate = rep.settings.front().breakdown == "degenerate" &&
                          rep.exit_code() == exit_code::kDegenerate && threw;

  ExperimentConfig far = instance_config(10, 5, 1);
  far.shots = {200};
  const auto inst = resolve_instance(far);
  const auto table = energy_table(inst);
  const double lo = *std::min_element(table.begin(), table.end());
  const double hi = *std::max_element(table.begin(), table.end());
  far.y_ideal = lo - 10.0 * (hi - lo);
  const auto unreachable_rep = run_estimate(far, inst);
  bool sentinel = !unreachable_rep.settings.front().estimates.empty();
  for (const auto& e : unreachable_rep.settings.front().estimates) {
    sentinel = sentinel && e.unreachable() && !e.total_shots && e.success_prob == 0.0;
  }
  sentinel = sentinel && unreachable_rep.exit_code() == exit_code::kUnreachable;
  return {degenerate && sentinel, "single basis state (peak probability " + fmt(peak, 12) + "): " +
                                      (degenerate ? "DegenerateSamples, exit 4" : "not degenerate") +
                                      "; y_ideal below ground state: " +
                                      (sentinel ? "n_EVT = inf, exit 5" : "finite estimate")};
}

}  // namespace

int main() {
  criterion(1, "QUBO-Ising equivalence", kEquivalenceSeconds, equivalence);
  criterion(2, "n_EVT closed form", 1, closed_form);
  criterion(3, "GEV parameter recovery", kRecoverySeconds, recovery);
  criterion(4, "test calibration", kCalibrationSeconds, calibration);
  criterion(5, "validation ratio around n_EVT", kValidationSeconds, validation);
  criterion(6, "shots trend", kShotsTrendSeconds, shots_trend);
  criterion(7, "scale trend", kScaleTrendSeconds, scale_trend);
  criterion(8, "noise trend", kNoiseTrendSeconds, noise_trend);
  criterion(9, "required extreme samples", kSampleSizeSeconds, sample_size);
  criterion(10, "shot sweep approaches the baseline", kSweepSeconds, sweep);
  criterion(11, "breakdown handling", kBreakdownSeconds, breakdown);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
