#pragma once

#include <cstdint>
#include <optional>

#include "qevt/qubo.hpp"

namespace qevt {

struct SaConfig {
  // Unset: max(max|Q_ij|, penalty weight) * n.
  std::optional<double> initial_temperature;
  double cooling_rate = 0.995;
  std::size_t sweeps = 1000;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;

  void validate() const;
  double resolved_temperature(const QuboInstance& inst) const;
};

struct SaResult {
  BitString x;
  double energy = 0.0;
  double initial_temperature = 0.0;
};

// Single-flip Metropolis annealing with geometric cooling (one sweep = n
// proposals, T <- cooling_rate * T after each sweep). Returns the best state
// visited over all restarts; its energy is recomputed with qubo_energy.
SaResult simulated_annealing(const QuboInstance& inst, const SaConfig& cfg);

}  // namespace qevt
