#include "qevt/anneal.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qevt/error.hpp"
#include "qevt/parallel.hpp"
#include "qevt/random.hpp"

namespace qevt {

namespace {

struct RestartOutcome {
  BitString x;
  double energy = 0.0;
};

RestartOutcome anneal_once(const QuboInstance& inst, const SaConfig& cfg, double t0, std::uint64_t seed) {
  const std::size_t n = inst.n();
  const double w = inst.penalty_weight();
  const double k = static_cast<double>(inst.k());
  Rng rng(seed);

  BitString x(n);
  for (auto& b : x) b = static_cast<std::uint8_t>(rng() >> 63);

  // field[i] = sum_{j != i} Q_ij x_j
  std::vector<double> field(n, 0.0);
  std::size_t weight = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] == 0) continue;
    ++weight;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) field[j] += inst.q(j, i);
    }
  }

  double energy = qubo_energy(inst, x);
  BitString best = x;
  double best_energy = energy;
  double temperature = t0;

  for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
      const double sign = x[i] == 0 ? 1.0 : -1.0;
      const double c = static_cast<double>(weight);
      const double dev_before = c - k;
      const double dev_after = c + sign - k;
      const double delta =
          sign * (inst.q(i, i) + 2.0 * field[i]) + w * (dev_after * dev_after - dev_before * dev_before);

      const bool accept = delta <= 0.0 || (temperature > 0.0 && uniform01(rng) < std::exp(-delta / temperature));
      if (!accept) continue;

      x[i] ^= 1U;
      weight = sign > 0 ? weight + 1 : weight - 1;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) field[j] += sign * inst.q(j, i);
      }
      energy += delta;
      if (energy < best_energy) {
        best_energy = energy;
        best = x;
      }
    }
    temperature *= cfg.cooling_rate;
  }
  return {best, qubo_energy(inst, best)};
}

}  // namespace

void SaConfig::validate() const {
  if (initial_temperature && !(*initial_temperature > 0.0 && std::isfinite(*initial_temperature))) {
    throw InvalidArgument("initial_temperature must be a positive finite number");
  }
  if (!(cooling_rate > 0.0 && cooling_rate < 1.0)) throw InvalidArgument("cooling_rate must lie in (0, 1)");
  if (sweeps == 0) throw InvalidArgument("sweeps must be positive");
  if (restarts == 0) throw InvalidArgument("restarts must be positive");
}

double SaConfig::resolved_temperature(const QuboInstance& inst) const {
  if (initial_temperature) return *initial_temperature;
  const double scale = std::max(inst.max_abs_coefficient(), std::abs(inst.penalty_weight()));
  return scale > 0.0 ? scale * static_cast<double>(inst.n()) : 1.0;
}

SaResult simulated_annealing(const QuboInstance& inst, const SaConfig& cfg) {
  cfg.validate();
  const double t0 = cfg.resolved_temperature(inst);

  std::vector<RestartOutcome> outcomes(cfg.restarts);
  parallel_for(cfg.restarts, [&](std::size_t r) {
    outcomes[r] = anneal_once(inst, cfg, t0, derive_seed(cfg.seed, {stream::kAnneal, r}));
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < outcomes.size(); ++r) {
    if (outcomes[r].energy < outcomes[best].energy) best = r;
  }
  return {std::move(outcomes[best].x), outcomes[best].energy, t0};
}

}  // namespace qevt
