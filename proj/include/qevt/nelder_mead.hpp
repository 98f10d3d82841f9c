#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace qevt {

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct NelderMeadOptions {
  std::size_t max_evaluations = 2000;
  // Stop when max - min over the simplex falls below
  // f_tolerance * (1 + |f_best|) and every vertex lies within x_tolerance of
  // the best vertex in each coordinate.
  double f_tolerance = 1e-10;
  double x_tolerance = 1e-8;
  // Initial simplex edge per coordinate; a scalar applies to all.
  std::vector<double> initial_step = {0.1};
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

// Downhill simplex minimization. With a box, every trial point is clamped
// into it before evaluation. Deterministic; never returns a point worse than
// the start.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options = {},
                             const std::optional<Box>& box = std::nullopt);

}  // namespace qevt
