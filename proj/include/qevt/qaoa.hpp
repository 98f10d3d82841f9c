#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qevt/qubo.hpp"
#include "qevt/random.hpp"

namespace qevt {

using Amplitude = std::complex<double>;

class StateVector {
 public:
  StateVector(std::size_t qubits, std::vector<Amplitude> amplitudes);

  std::size_t qubits() const noexcept { return qubits_; }
  std::size_t size() const noexcept { return amplitudes_.size(); }
  std::span<const Amplitude> amplitudes() const noexcept { return amplitudes_; }
  std::span<Amplitude> amplitudes() noexcept { return amplitudes_; }
  const Amplitude& operator[](std::size_t i) const { return amplitudes_[i]; }

  double norm_squared() const noexcept;
  std::vector<double> probabilities() const;

 private:
  std::size_t qubits_;
  std::vector<Amplitude> amplitudes_;
};

// standard: H^n |0>, every amplitude 2^(-n/2).
// paper:    H^n X^n |0>, amplitude (-1)^popcount(x) 2^(-n/2).
enum class InitialState { Standard, Paper };

InitialState parse_initial_state(std::string_view name);
std::string_view to_string(InitialState variant);

StateVector prepare_initial_state(std::size_t n, InitialState variant);

// a_x <- exp(-i gamma E(x)) a_x with E the Ising energy (offset included).
void apply_cost_layer(StateVector& state, const IsingModel& model, double gamma);
// Same, with E(x) precomputed for every basis state.
void apply_cost_layer(StateVector& state, std::span<const double> diagonal, double gamma);

// exp(-i beta X) on every qubit.
void apply_mixer_layer(StateVector& state, double beta);

double expectation_energy(const StateVector& state, const IsingModel& model);
double expectation_energy(const StateVector& state, std::span<const double> diagonal);

struct QaoaParams {
  std::size_t depth_p = 0;
  std::vector<double> gammas;
  std::vector<double> betas;

  void validate() const;
  static QaoaParams zeros(std::size_t depth_p);
};

// A fixed instance prepared for repeated circuit evaluation.
class QaoaCircuit {
 public:
  QaoaCircuit(const QuboInstance& inst, InitialState variant);

  StateVector run(const QaoaParams& params) const;
  double expectation(const QaoaParams& params) const;

  std::size_t qubits() const noexcept { return model_.n; }
  const IsingModel& model() const noexcept { return model_; }
  std::span<const double> diagonal() const noexcept { return diagonal_; }
  InitialState variant() const noexcept { return variant_; }

 private:
  IsingModel model_;
  std::vector<double> diagonal_;
  InitialState variant_;
};

struct QaoaOptimizerConfig {
  std::size_t restarts = 10;
  std::size_t max_evaluations = 600;  // per restart
  InitialState variant = InitialState::Paper;
  std::uint64_t seed = 0;
};

struct QaoaOptimization {
  QaoaParams params;
  double expectation = 0.0;
  double uniform_expectation = 0.0;
  std::size_t evaluations = 0;
};

// Multi-start Nelder-Mead over the 2p angles, gamma in [-pi, pi] and beta in
// [-pi/2, pi/2], minimizing the exact expectation. Starts: a linear ramp of
// each mixer sign, then seeded-shift Halton points. The all-zero point is
// always a candidate, so the result is never worse than the uniform mean.
QaoaOptimization optimize_parameters(const QuboInstance& inst, std::size_t depth_p,
                                     const QaoaOptimizerConfig& cfg = {});

struct NoiseConfig {
  double readout_flip_prob = 0.0;
  void validate() const;
};

struct ShotBatch {
  std::size_t shots_s = 0;
  std::vector<double> energies;
  double minimum = 0.0;
};

// Draws basis states from |a_x|^2 and scores them with qubo_energy.
class ShotSampler {
 public:
  ShotSampler(const StateVector& state, const QuboInstance& inst);

  ShotBatch sample(std::size_t shots_s, const NoiseConfig& noise, std::uint64_t seed) const;
  // Minimum energy over one run of shots_s shots drawn from rng.
  double run_minimum(std::size_t shots_s, const NoiseConfig& noise, Rng& rng) const;
  std::uint64_t draw(const NoiseConfig& noise, Rng& rng) const;

  std::span<const double> energies() const noexcept { return energies_; }

 private:
  std::size_t qubits_;
  std::vector<double> cumulative_;
  std::vector<double> energies_;
};

ShotBatch sample_shots(const StateVector& state, const QuboInstance& inst, std::size_t shots_s,
                       const NoiseConfig& noise, std::uint64_t seed);

// Seed of run `run` within a collection seeded with `seed`.
std::uint64_t run_seed(std::uint64_t seed, std::size_t run);

// Per-run minima over `runs` independent batches of shots_s shots (the
// extreme samples fitted by the EVT stage).
std::vector<double> collect_extreme_samples(const QuboInstance& inst, const QaoaParams& params, std::size_t shots_s,
                                            std::size_t runs, const NoiseConfig& noise, std::uint64_t seed,
                                            InitialState variant = InitialState::Paper);
std::vector<double> collect_extreme_samples(const ShotSampler& sampler, std::size_t shots_s, std::size_t runs,
                                            const NoiseConfig& noise, std::uint64_t seed);

}  // namespace qevt
