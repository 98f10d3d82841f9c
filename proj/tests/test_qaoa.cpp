#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "qevt/error.hpp"
#include "qevt/qaoa.hpp"
#include "qevt/qubo.hpp"
#include "qevt/random.hpp"

using namespace qevt;
using std::numbers::pi;

namespace {

StateVector random_state(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Amplitude> a(std::size_t{1} << n);
  double norm = 0.0;
  for (auto& v : a) {
    v = {standard_normal(rng), standard_normal(rng)};
    norm += std::norm(v);
  }
  for (auto& v : a) v /= std::sqrt(norm);
  return StateVector(n, std::move(a));
}

StateVector basis_state(std::size_t n, std::uint64_t index) {
  std::vector<Amplitude> a(std::size_t{1} << n);
  a[index] = 1.0;
  return StateVector(n, std::move(a));
}

// Pearson statistic against expected probabilities, cells with expectation
// below 5 pooled into one.
double chi_square_p(const std::vector<std::size_t>& counts, const std::vector<double>& probs, std::size_t total) {
  double stat = 0.0;
  double pooled_obs = 0.0;
  double pooled_exp = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * static_cast<double>(total);
    if (e < 5.0) {
      pooled_obs += static_cast<double>(counts[i]);
      pooled_exp += e;
      continue;
    }
    stat += std::pow(static_cast<double>(counts[i]) - e, 2) / e;
    ++cells;
  }
  if (pooled_exp >= 5.0) {
    stat += std::pow(pooled_obs - pooled_exp, 2) / pooled_exp;
    ++cells;
  }
  const boost::math::chi_squared dist(static_cast<double>(cells - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

std::vector<std::size_t> histogram(const ShotSampler& sampler, std::size_t n, std::size_t shots,
                                   const NoiseConfig& noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> counts(std::size_t{1} << n, 0);
  for (std::size_t s = 0; s < shots; ++s) ++counts[sampler.draw(noise, rng)];
  return counts;
}

}  // namespace

TEST_CASE("initial states") {
  const double r = 1.0 / std::sqrt(2.0);
  const auto standard = prepare_initial_state(1, InitialState::Standard);
  CHECK(std::abs(standard[0] - Amplitude(r)) < 1e-15);
  CHECK(std::abs(standard[1] - Amplitude(r)) < 1e-15);
  const auto paper = prepare_initial_state(1, InitialState::Paper);
  CHECK(std::abs(paper[0] - Amplitude(r)) < 1e-15);
  CHECK(std::abs(paper[1] - Amplitude(-r)) < 1e-15);

  for (std::size_t n : {1, 4, 9}) {
    for (auto v : {InitialState::Standard, InitialState::Paper}) {
      const auto probs = prepare_initial_state(n, v).probabilities();
      for (double p : probs) CHECK(p == doctest::Approx(std::ldexp(1.0, -static_cast<int>(n))).epsilon(1e-12));
    }
    const auto s = prepare_initial_state(n, InitialState::Paper);
    for (std::uint64_t x = 0; x < s.size(); ++x) {
      CHECK((s[x].real() < 0) == (std::popcount(x) % 2 == 1));
    }
  }
  CHECK_THROWS_AS(prepare_initial_state(25, InitialState::Standard), CapacityError);
  CHECK_THROWS_AS(prepare_initial_state(0, InitialState::Standard), CapacityError);
  CHECK(parse_initial_state("paper") == InitialState::Paper);
  CHECK(parse_initial_state("standard") == InitialState::Standard);
  CHECK_THROWS_AS(parse_initial_state("plus"), InvalidArgument);
}

TEST_CASE("cost layer") {
  IsingModel m;
  m.n = 2;
  m.h = {0.5, -1.25};
  m.j[{0, 1}] = 0.75;
  m.offset = 0.1;

  auto s = random_state(2, 4);
  const auto before = s;
  apply_cost_layer(s, m, 0.0);
  for (std::size_t x = 0; x < 4; ++x) CHECK(s[x] == before[x]);

  auto t = prepare_initial_state(2, InitialState::Standard);
  apply_cost_layer(t, m, pi / 4);
  for (std::uint64_t x = 0; x < 4; ++x) {
    const int z0 = (x & 1U) ? 1 : -1;
    const int z1 = (x & 2U) ? 1 : -1;
    const double e = 0.1 + 0.5 * z0 - 1.25 * z1 + 0.75 * z0 * z1;
    const Amplitude want = 0.5 * std::exp(Amplitude(0.0, -pi * e / 4.0));
    CHECK(std::abs(t[x] - want) < 1e-14);
  }

  auto u = random_state(6, 9);
  const auto model = to_ising(generate_synthetic_q(6, 3, GeneratorStyle::PdquboLike, 2));
  const auto mags = u.probabilities();
  apply_cost_layer(u, model, 1.37);
  const auto after = u.probabilities();
  for (std::size_t x = 0; x < after.size(); ++x) CHECK(after[x] == doctest::Approx(mags[x]).epsilon(1e-12));
}

TEST_CASE("mixer layer") {
  auto s = random_state(3, 1);
  const auto before = s;
  apply_mixer_layer(s, 0.0);
  for (std::size_t x = 0; x < 8; ++x) CHECK(s[x] == before[x]);

  auto flip = basis_state(1, 0);
  apply_mixer_layer(flip, pi / 2);
  CHECK(std::abs(flip[0]) < 1e-15);
  CHECK(std::abs(flip[1] - Amplitude(0.0, -1.0)) < 1e-15);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = random_state(7, seed);
    apply_mixer_layer(r, 0.3 + 0.41 * static_cast<double>(seed));
    CHECK(std::abs(r.norm_squared() - 1.0) < 1e-10);
  }

  // Two qubits against the explicit tensor product of 2x2 rotations.
  auto two = random_state(2, 12);
  const auto orig = two;
  const double beta = 0.7;
  apply_mixer_layer(two, beta);
  const Amplitude c = std::cos(beta);
  const Amplitude is = Amplitude(0.0, -std::sin(beta));
  const Amplitude rx[2][2] = {{c, is}, {is, c}};
  for (std::size_t out = 0; out < 4; ++out) {
    Amplitude acc = 0.0;
    for (std::size_t in = 0; in < 4; ++in) acc += rx[out & 1][in & 1] * rx[out >> 1][in >> 1] * orig[in];
    CHECK(std::abs(two[out] - acc) < 1e-14);
  }
}

TEST_CASE("unitarity over layered circuits") {
  const auto model = to_ising(generate_synthetic_q(8, 4, GeneratorStyle::PdquboLike, 3));
  auto s = prepare_initial_state(8, InitialState::Paper);
  Rng rng(5);
  for (int layer = 0; layer < 12; ++layer) {
    apply_cost_layer(s, model, 2 * pi * uniform01(rng) - pi);
    apply_mixer_layer(s, pi * uniform01(rng) - pi / 2);
  }
  CHECK(std::abs(s.norm_squared() - 1.0) < 1e-10);
}

TEST_CASE("expectation energy") {
  const auto inst = generate_synthetic_q(8, 4, GeneratorStyle::PdquboLike, 6);
  const auto model = to_ising(inst);
  const auto table = energy_table(inst);
  const double mean = std::accumulate(table.begin(), table.end(), 0.0) / static_cast<double>(table.size());
  CHECK(expectation_energy(prepare_initial_state(8, InitialState::Standard), model) ==
        doctest::Approx(mean).epsilon(1e-12));

  CHECK(expectation_energy(basis_state(8, 77), model) == doctest::Approx(table[77]).epsilon(1e-12));

  const auto r = random_state(8, 13);
  double direct = 0.0;
  for (std::uint64_t x = 0; x < r.size(); ++x) direct += std::norm(r[x]) * qubo_energy(inst, bits_from_index(x, 8));
  CHECK(expectation_energy(r, model) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(expectation_energy(r, ising_diagonal(model)) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("zero angles leave the initial state unchanged") {
  const auto inst = generate_synthetic_q(6, 3, GeneratorStyle::PdquboLike, 4);
  for (auto v : {InitialState::Standard, InitialState::Paper}) {
    const QaoaCircuit circuit(inst, v);
    const auto out = circuit.run(QaoaParams::zeros(3));
    const auto init = prepare_initial_state(6, v);
    for (std::size_t x = 0; x < out.size(); ++x) CHECK(std::abs(out[x] - init[x]) < 1e-14);
  }
  const auto a = QaoaCircuit(inst, InitialState::Standard).run(QaoaParams::zeros(2)).probabilities();
  const auto b = QaoaCircuit(inst, InitialState::Paper).run(QaoaParams::zeros(2)).probabilities();
  for (std::size_t x = 0; x < a.size(); ++x) CHECK(a[x] == doctest::Approx(b[x]).epsilon(1e-14));
}

TEST_CASE("params validation") {
  QaoaParams p;
  p.depth_p = 2;
  p.gammas = {0.1};
  p.betas = {0.1, 0.2};
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  CHECK_THROWS_AS(QaoaParams::zeros(0).validate(), InvalidArgument);
}

TEST_CASE("optimizer on a flat landscape") {
  // Q=0 with the penalty switched off: every basis state has energy 0.
  const QuboInstance flat(4, 0, std::vector<double>(16, 0.0), 0.0);
  QaoaOptimizerConfig cfg;
  cfg.restarts = 2;
  cfg.max_evaluations = 50;
  const auto r = optimize_parameters(flat, 2, cfg);
  CHECK(std::abs(r.expectation) < 1e-12);
  CHECK(std::abs(QaoaCircuit(flat, cfg.variant).expectation(r.params)) < 1e-12);
}

TEST_CASE("optimizer never returns worse than the uniform mean") {
  const auto inst = generate_synthetic_q(6, 3, GeneratorStyle::PdquboLike, 42);
  QaoaOptimizerConfig cfg;
  cfg.restarts = 10;
  cfg.seed = 42;
  const auto r = optimize_parameters(inst, 3, cfg);
  const auto table = energy_table(inst);
  const double mean = std::accumulate(table.begin(), table.end(), 0.0) / static_cast<double>(table.size());
  CHECK(r.uniform_expectation == doctest::Approx(mean).epsilon(1e-12));
  CHECK(r.expectation <= mean);
  CHECK(r.params.depth_p == 3);

  const auto again = optimize_parameters(inst, 3, cfg);
  CHECK(again.params.gammas == r.params.gammas);
  CHECK(again.params.betas == r.params.betas);
}

TEST_CASE("optimization concentrates mass on the optimum") {
  const auto inst = generate_synthetic_q(8, 4, GeneratorStyle::PdquboLike, 11);
  const auto best = index_from_bits(brute_force_minimum(inst).x);
  QaoaOptimizerConfig cfg;
  cfg.restarts = 4;
  cfg.seed = 1;
  const auto r = optimize_parameters(inst, 3, cfg);
  const auto probs = QaoaCircuit(inst, cfg.variant).run(r.params).probabilities();
  CHECK(probs[best] > 1.0 / 256.0);
}

TEST_CASE("shot sampling") {
  const auto inst = generate_synthetic_q(5, 2, GeneratorStyle::PdquboLike, 7);
  const auto batch = sample_shots(basis_state(5, 19), inst, 40, {}, 3);
  CHECK(batch.shots_s == 40);
  CHECK(batch.energies.size() == 40);
  for (double e : batch.energies) CHECK(e == qubo_energy(inst, std::uint64_t{19}));
  CHECK(batch.minimum == *std::min_element(batch.energies.begin(), batch.energies.end()));

  const auto a = sample_shots(random_state(5, 2), inst, 100, {0.1}, 99);
  const auto b = sample_shots(random_state(5, 2), inst, 100, {0.1}, 99);
  CHECK(a.energies == b.energies);

  CHECK_THROWS_AS(sample_shots(basis_state(5, 0), inst, 0, {}, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_shots(basis_state(5, 0), inst, 1, {0.6}, 1), InvalidArgument);
}

TEST_CASE("uniform state sampling is uniform") {
  constexpr std::size_t n = 6;
  const auto inst = generate_synthetic_q(n, 3, GeneratorStyle::PdquboLike, 1);
  const ShotSampler sampler(prepare_initial_state(n, InitialState::Paper), inst);
  const auto counts = histogram(sampler, n, 100000, {}, 21);
  CHECK(chi_square_p(counts, std::vector<double>(64, 1.0 / 64.0), 100000) > 0.01);
}

TEST_CASE("full readout scrambling is uniform") {
  constexpr std::size_t n = 5;
  const auto inst = generate_synthetic_q(n, 2, GeneratorStyle::PdquboLike, 1);
  const ShotSampler sampler(basis_state(n, 9), inst);
  const auto counts = histogram(sampler, n, 100000, {0.5}, 8);
  CHECK(chi_square_p(counts, std::vector<double>(32, 1.0 / 32.0), 100000) > 0.01);
}

TEST_CASE("sampling follows the amplitudes") {
  for (std::size_t n : {4, 8, 10}) {
    const auto inst = generate_synthetic_q(n, n / 2, GeneratorStyle::PdquboLike, n);
    const auto state = random_state(n, 100 + n);
    const ShotSampler sampler(state, inst);
    const auto counts = histogram(sampler, n, 100000, {}, 5);
    CHECK(chi_square_p(counts, state.probabilities(), 100000) > 0.01);
  }
}

TEST_CASE("extreme sample collection") {
  const auto inst = generate_synthetic_q(8, 4, GeneratorStyle::PdquboLike, 3);
  QaoaParams params = QaoaParams::zeros(1);
  params.gammas = {0.4};
  params.betas = {-0.3};

  const auto one = collect_extreme_samples(inst, params, 30, 1, {}, 77);
  REQUIRE(one.size() == 1);
  const QaoaCircuit circuit(inst, InitialState::Paper);
  const ShotSampler sampler(circuit.run(params), inst);
  CHECK(one[0] == sampler.sample(30, {}, run_seed(77, 0)).minimum);

  const auto a = collect_extreme_samples(inst, params, 50, 20, {0.02}, 5);
  CHECK(a == collect_extreme_samples(inst, params, 50, 20, {0.02}, 5));
  CHECK(a == collect_extreme_samples(sampler, 50, 20, {0.02}, 5));

  const auto small = collect_extreme_samples(sampler, 100, 50, {}, 1);
  const auto large = collect_extreme_samples(sampler, 2000, 50, {}, 2);
  const double mean_small = std::accumulate(small.begin(), small.end(), 0.0) / 50.0;
  const double mean_large = std::accumulate(large.begin(), large.end(), 0.0) / 50.0;
  CHECK(mean_large <= mean_small);

  CHECK_THROWS_AS(collect_extreme_samples(sampler, 10, 0, {}, 1), InvalidArgument);
}
