#include "qevt/qaoa.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qevt/error.hpp"
#include "qevt/nelder_mead.hpp"
#include "qevt/parallel.hpp"

namespace qevt {

namespace {

constexpr double kPi = std::numbers::pi;

void check_dimension(const StateVector& state, std::size_t diagonal_size) {
  if (state.size() != diagonal_size) {
    throw InvalidArgument("diagonal has " + std::to_string(diagonal_size) + " entries, state has " +
                          std::to_string(state.size()));
  }
}

// Radical inverse of `index` in `base`: the Halton coordinate.
double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101};

QaoaParams unpack(const std::vector<double>& v, std::size_t depth) {
  QaoaParams p;
  p.depth_p = depth;
  p.gammas.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(depth));
  p.betas.assign(v.begin() + static_cast<std::ptrdiff_t>(depth), v.end());
  return p;
}

}  // namespace

StateVector::StateVector(std::size_t qubits, std::vector<Amplitude> amplitudes)
    : qubits_(qubits), amplitudes_(std::move(amplitudes)) {
  if (qubits_ == 0 || qubits_ > kMaxEnumerableVariables) {
    throw CapacityError("state vectors support 1.." + std::to_string(kMaxEnumerableVariables) + " qubits");
  }
  if (amplitudes_.size() != (std::size_t{1} << qubits_)) {
    throw InvalidArgument("state vector needs 2^n amplitudes");
  }
}

double StateVector::norm_squared() const noexcept {
  double s = 0.0;
  for (const auto& a : amplitudes_) s += std::norm(a);
  return s;
}

std::vector<double> StateVector::probabilities() const {
  std::vector<double> p(amplitudes_.size());
  std::transform(amplitudes_.begin(), amplitudes_.end(), p.begin(), [](const Amplitude& a) { return std::norm(a); });
  return p;
}

InitialState parse_initial_state(std::string_view name) {
  if (name == "paper") return InitialState::Paper;
  if (name == "standard") return InitialState::Standard;
  throw InvalidArgument("unknown initial state '" + std::string(name) + "' (expected paper or standard)");
}

std::string_view to_string(InitialState variant) {
  return variant == InitialState::Paper ? "paper" : "standard";
}

StateVector prepare_initial_state(std::size_t n, InitialState variant) {
  if (n == 0 || n > kMaxEnumerableVariables) {
    throw CapacityError("initial state needs 1 <= n <= " + std::to_string(kMaxEnumerableVariables));
  }
  const std::size_t size = std::size_t{1} << n;
  const double amp = std::pow(2.0, -0.5 * static_cast<double>(n));
  std::vector<Amplitude> a(size, Amplitude(amp, 0.0));
  if (variant == InitialState::Paper) {
    for (std::size_t i = 0; i < size; ++i) {
      if (std::popcount(i) % 2 == 1) a[i] = -a[i];
    }
  }
  return StateVector(n, std::move(a));
}

void apply_cost_layer(StateVector& state, const IsingModel& model, double gamma) {
  if (model.n != state.qubits()) throw InvalidArgument("Ising model and state disagree on qubit count");
  const auto diag = ising_diagonal(model);
  apply_cost_layer(state, diag, gamma);
}

void apply_cost_layer(StateVector& state, std::span<const double> diagonal, double gamma) {
  check_dimension(state, diagonal.size());
  if (gamma == 0.0) return;
  auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) amps[i] *= std::polar(1.0, -gamma * diagonal[i]);
}

void apply_mixer_layer(StateVector& state, double beta) {
  if (beta == 0.0) return;
  const double c = std::cos(beta);
  const double s = std::sin(beta);
  auto amps = state.amplitudes();
  const std::size_t size = amps.size();
  for (std::size_t q = 0; q < state.qubits(); ++q) {
    const std::size_t stride = std::size_t{1} << q;
    for (std::size_t block = 0; block < size; block += 2 * stride) {
      for (std::size_t i = block; i < block + stride; ++i) {
        const Amplitude a = amps[i];
        const Amplitude b = amps[i + stride];
        // (c a - i s b, -i s a + c b)
        amps[i] = Amplitude(c * a.real() + s * b.imag(), c * a.imag() - s * b.real());
        amps[i + stride] = Amplitude(s * a.imag() + c * b.real(), -s * a.real() + c * b.imag());
      }
    }
  }
}

double expectation_energy(const StateVector& state, const IsingModel& model) {
  if (model.n != state.qubits()) throw InvalidArgument("Ising model and state disagree on qubit count");
  return expectation_energy(state, ising_diagonal(model));
}

double expectation_energy(const StateVector& state, std::span<const double> diagonal) {
  check_dimension(state, diagonal.size());
  const auto amps = state.amplitudes();
  double e = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) e += std::norm(amps[i]) * diagonal[i];
  return e;
}

void QaoaParams::validate() const {
  if (depth_p == 0) throw InvalidArgument("QAOA depth must be at least 1");
  if (gammas.size() != depth_p || betas.size() != depth_p) {
    throw InvalidArgument("gammas and betas must each have depth_p entries");
  }
  for (double v : gammas) {
    if (!std::isfinite(v)) throw InvalidArgument("gamma is not finite");
  }
  for (double v : betas) {
    if (!std::isfinite(v)) throw InvalidArgument("beta is not finite");
  }
}

QaoaParams QaoaParams::zeros(std::size_t depth_p) {
  return {depth_p, std::vector<double>(depth_p, 0.0), std::vector<double>(depth_p, 0.0)};
}

QaoaCircuit::QaoaCircuit(const QuboInstance& inst, InitialState variant)
    : model_(to_ising(inst)), diagonal_(ising_diagonal(model_)), variant_(variant) {}

StateVector QaoaCircuit::run(const QaoaParams& params) const {
  params.validate();
  StateVector state = prepare_initial_state(model_.n, variant_);
  for (std::size_t layer = 0; layer < params.depth_p; ++layer) {
    apply_cost_layer(state, diagonal_, params.gammas[layer]);
    apply_mixer_layer(state, params.betas[layer]);
  }
  return state;
}

double QaoaCircuit::expectation(const QaoaParams& params) const {
  return expectation_energy(run(params), diagonal_);
}

QaoaOptimization optimize_parameters(const QuboInstance& inst, std::size_t depth_p, const QaoaOptimizerConfig& cfg) {
  if (depth_p == 0) throw InvalidArgument("QAOA depth must be at least 1");
  if (cfg.restarts == 0) throw InvalidArgument("QAOA optimizer needs at least one restart");
  if (2 * depth_p > std::size(kPrimes)) throw InvalidArgument("QAOA depth too large for the start sequence");

  const QaoaCircuit circuit(inst, cfg.variant);
  const std::size_t dim = 2 * depth_p;

  Box box;
  box.lower.assign(dim, -kPi);
  box.upper.assign(dim, kPi);
  for (std::size_t l = 0; l < depth_p; ++l) {
    box.lower[depth_p + l] = -kPi / 2;
    box.upper[depth_p + l] = kPi / 2;
  }

  // Energy spread of the uniform state sets the natural cost-angle scale.
  const auto diag = circuit.diagonal();
  double mean = 0.0;
  for (double e : diag) mean += e;
  mean /= static_cast<double>(diag.size());
  double var = 0.0;
  for (double e : diag) var += (e - mean) * (e - mean);
  const double spread = std::sqrt(var / static_cast<double>(diag.size()));
  const double gamma_scale = spread > 0.0 ? std::min(kPi, 1.0 / spread) : 1.0;

  Rng rng(derive_seed(cfg.seed, {stream::kQaoaOptimizer}));
  std::vector<double> shift(dim);
  for (double& s : shift) s = uniform01(rng);

  std::vector<std::vector<double>> starts;
  starts.reserve(cfg.restarts);
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    std::vector<double> x(dim);
    if (r < 2) {
      const double mixer_sign = r == 0 ? 1.0 : -1.0;
      for (std::size_t l = 0; l < depth_p; ++l) {
        const double t = (static_cast<double>(l) + 0.5) / static_cast<double>(depth_p);
        x[l] = 0.8 * t * gamma_scale;
        x[depth_p + l] = mixer_sign * 0.8 * (1.0 - t);
      }
    } else {
      for (std::size_t d = 0; d < dim; ++d) {
        const double u = std::fmod(radical_inverse(r - 1, kPrimes[d]) + shift[d], 1.0);
        x[d] = box.lower[d] + u * (box.upper[d] - box.lower[d]);
      }
    }
    starts.push_back(std::move(x));
  }

  NelderMeadOptions nm;
  nm.max_evaluations = cfg.max_evaluations;
  nm.f_tolerance = 1e-9;
  nm.x_tolerance = 1e-6;
  nm.initial_step.assign(dim, 0.0);
  for (std::size_t l = 0; l < depth_p; ++l) {
    nm.initial_step[l] = 0.25 * gamma_scale;
    nm.initial_step[depth_p + l] = 0.25;
  }

  std::vector<NelderMeadResult> results(cfg.restarts);
  parallel_for(cfg.restarts, [&](std::size_t r) {
    auto objective = [&](const std::vector<double>& v) { return circuit.expectation(unpack(v, depth_p)); };
    results[r] = nelder_mead(objective, starts[r], nm, box);
  });

  QaoaOptimization out;
  out.params = QaoaParams::zeros(depth_p);
  out.uniform_expectation = circuit.expectation(out.params);
  out.expectation = out.uniform_expectation;
  for (const auto& res : results) {
    out.evaluations += res.evaluations;
    if (res.value < out.expectation) {
      out.expectation = res.value;
      out.params = unpack(res.x, depth_p);
    }
  }
  return out;
}

void NoiseConfig::validate() const {
  if (!(readout_flip_prob >= 0.0 && readout_flip_prob <= 0.5)) {
    throw InvalidArgument("readout_flip_prob must lie in [0, 0.5]");
  }
}

ShotSampler::ShotSampler(const StateVector& state, const QuboInstance& inst)
    : qubits_(state.qubits()), energies_(energy_table(inst)) {
  if (inst.n() != state.qubits()) throw InvalidArgument("instance and state disagree on qubit count");
  cumulative_.resize(state.size());
  double acc = 0.0;
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    acc += std::norm(amps[i]);
    cumulative_[i] = acc;
  }
  if (!(acc > 0.0)) throw InvalidArgument("state has zero norm");
}

std::uint64_t ShotSampler::draw(const NoiseConfig& noise, Rng& rng) const {
  const double u = uniform01(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  std::uint64_t index = static_cast<std::uint64_t>(it - cumulative_.begin());
  if (noise.readout_flip_prob > 0.0) {
    for (std::size_t b = 0; b < qubits_; ++b) {
      if (uniform01(rng) < noise.readout_flip_prob) index ^= std::uint64_t{1} << b;
    }
  }
  return index;
}

double ShotSampler::run_minimum(std::size_t shots_s, const NoiseConfig& noise, Rng& rng) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < shots_s; ++s) best = std::min(best, energies_[draw(noise, rng)]);
  return best;
}

ShotBatch ShotSampler::sample(std::size_t shots_s, const NoiseConfig& noise, std::uint64_t seed) const {
  if (shots_s == 0) throw InvalidArgument("shots_s must be at least 1");
  noise.validate();
  Rng rng(seed);
  ShotBatch batch;
  batch.shots_s = shots_s;
  batch.energies.reserve(shots_s);
  for (std::size_t s = 0; s < shots_s; ++s) batch.energies.push_back(energies_[draw(noise, rng)]);
  batch.minimum = *std::min_element(batch.energies.begin(), batch.energies.end());
  return batch;
}

ShotBatch sample_shots(const StateVector& state, const QuboInstance& inst, std::size_t shots_s,
                       const NoiseConfig& noise, std::uint64_t seed) {
  return ShotSampler(state, inst).sample(shots_s, noise, seed);
}

std::uint64_t run_seed(std::uint64_t seed, std::size_t run) { return derive_seed(seed, {stream::kShots, run}); }

std::vector<double> collect_extreme_samples(const ShotSampler& sampler, std::size_t shots_s, std::size_t runs,
                                            const NoiseConfig& noise, std::uint64_t seed) {
  if (runs == 0) throw InvalidArgument("runs must be at least 1");
  if (shots_s == 0) throw InvalidArgument("shots_s must be at least 1");
  noise.validate();
  std::vector<double> minima(runs);
  parallel_for(runs, [&](std::size_t r) {
    Rng rng(run_seed(seed, r));
    minima[r] = sampler.run_minimum(shots_s, noise, rng);
  });
  return minima;
}

std::vector<double> collect_extreme_samples(const QuboInstance& inst, const QaoaParams& params, std::size_t shots_s,
                                            std::size_t runs, const NoiseConfig& noise, std::uint64_t seed,
                                            InitialState variant) {
  const QaoaCircuit circuit(inst, variant);
  const ShotSampler sampler(circuit.run(params), inst);
  return collect_extreme_samples(sampler, shots_s, runs, noise, seed);
}

}  // namespace qevt
