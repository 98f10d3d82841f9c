#include "qevt/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qevt/error.hpp"

namespace qevt {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

double finite_or_huge(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options,
                             const std::optional<Box>& box) {
  const std::size_t dim = start.size();
  if (dim == 0) throw InvalidArgument("nelder_mead needs at least one coordinate");
  if (options.initial_step.empty() || (options.initial_step.size() != 1 && options.initial_step.size() != dim)) {
    throw InvalidArgument("initial_step must have one entry or one per coordinate");
  }
  if (box && (box->lower.size() != dim || box->upper.size() != dim)) {
    throw InvalidArgument("box bounds must match the dimension");
  }

  auto clamp = [&](std::vector<double>& x) {
    if (!box) return;
    for (std::size_t i = 0; i < dim; ++i) x[i] = std::clamp(x[i], box->lower[i], box->upper[i]);
  };

  std::size_t evaluations = 0;
  auto eval = [&](std::vector<double>& x) {
    clamp(x);
    ++evaluations;
    return finite_or_huge(f(x));
  };

  std::vector<std::vector<double>> simplex(dim + 1, start);
  std::vector<double> values(dim + 1);
  values[0] = eval(simplex[0]);
  for (std::size_t i = 0; i < dim; ++i) {
    const double step = options.initial_step.size() == 1 ? options.initial_step[0] : options.initial_step[i];
    auto& v = simplex[i + 1];
    v[i] += step;
    if (box && v[i] > box->upper[i]) v[i] = start[i] - step;
    values[i + 1] = eval(v);
  }

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim);
  std::vector<double> trial(dim);
  std::vector<double> trial2(dim);
  bool converged = false;

  auto point = [&](double t, const std::vector<double>& toward, std::vector<double>& out) {
    // centroid + t * (centroid - toward)
    for (std::size_t i = 0; i < dim; ++i) out[i] = centroid[i] + t * (centroid[i] - toward[i]);
  };

  while (evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[dim - 1];

    const double spread = values[worst] - values[best];
    bool small_simplex = true;
    for (std::size_t v = 0; v <= dim && small_simplex; ++v) {
      for (std::size_t i = 0; i < dim; ++i) {
        if (std::abs(simplex[v][i] - simplex[best][i]) > options.x_tolerance) {
          small_simplex = false;
          break;
        }
      }
    }
    if (std::isfinite(values[best]) && spread <= options.f_tolerance * (1.0 + std::abs(values[best])) &&
        small_simplex) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v <= dim; ++v) {
      if (v == worst) continue;
      for (std::size_t i = 0; i < dim; ++i) centroid[i] += simplex[v][i];
    }
    for (double& c : centroid) c /= static_cast<double>(dim);

    point(kReflect, simplex[worst], trial);
    const double reflected = eval(trial);

    if (reflected < values[best]) {
      point(kReflect * kExpand, simplex[worst], trial2);
      const double expanded = eval(trial2);
      if (expanded < reflected) {
        simplex[worst] = trial2;
        values[worst] = expanded;
      } else {
        simplex[worst] = trial;
        values[worst] = reflected;
      }
      continue;
    }
    if (reflected < values[second_worst]) {
      simplex[worst] = trial;
      values[worst] = reflected;
      continue;
    }

    // Contraction: outside if the reflection improved on the worst vertex.
    const bool outside = reflected < values[worst];
    point(outside ? kReflect * kContract : -kContract, simplex[worst], trial2);
    const double contracted = eval(trial2);
    if (contracted < (outside ? reflected : values[worst])) {
      simplex[worst] = trial2;
      values[worst] = contracted;
      continue;
    }

    for (std::size_t v = 0; v <= dim; ++v) {
      if (v == best) continue;
      for (std::size_t i = 0; i < dim; ++i) {
        simplex[v][i] = simplex[best][i] + kShrink * (simplex[v][i] - simplex[best][i]);
      }
      values[v] = eval(simplex[v]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const std::size_t best = static_cast<std::size_t>(best_it - values.begin());
  return {simplex[best], values[best], evaluations, converged};
}

}  // namespace qevt
