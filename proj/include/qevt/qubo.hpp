#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qevt {

// Bit i of a basis-state index is variable x_i (little-endian), everywhere.
using BitString = std::vector<std::uint8_t>;

BitString bits_from_index(std::uint64_t index, std::size_t n);
std::uint64_t index_from_bits(std::span<const std::uint8_t> bits);

// Largest n accepted by exhaustive enumeration and statevector simulation.
inline constexpr std::size_t kMaxEnumerableVariables = 24;

// Cardinality-constrained QUBO:
//   Y(x) = x^T Q x + w * (sum_i x_i - k)^2,  x in {0,1}^n
// with w = penalty_weight (1 unless configured otherwise).
class QuboInstance {
 public:
  QuboInstance(std::size_t n, std::size_t k, std::vector<double> q, double penalty_weight = 1.0);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  double penalty_weight() const noexcept { return penalty_weight_; }
  double q(std::size_t i, std::size_t j) const noexcept { return q_[i * n_ + j]; }
  // Row-major n*n coefficients.
  const std::vector<double>& matrix() const noexcept { return q_; }
  double max_abs_coefficient() const noexcept;

  friend bool operator==(const QuboInstance&, const QuboInstance&) = default;

 private:
  std::size_t n_;
  std::size_t k_;
  std::vector<double> q_;
  double penalty_weight_;
};

double qubo_energy(const QuboInstance& inst, std::span<const std::uint8_t> x);
// Same arithmetic as qubo_energy, on a packed basis-state index.
double qubo_energy(const QuboInstance& inst, std::uint64_t index);

// Energies of all 2^n basis states, entry i computed by qubo_energy(inst, i).
std::vector<double> energy_table(const QuboInstance& inst);

struct IsingModel {
  std::size_t n = 0;
  std::vector<double> h;
  std::map<std::pair<std::size_t, std::size_t>, double> j;  // keys i < j
  double offset = 0.0;

  void validate() const;
};

// Spin form with z_i = 2 x_i - 1; energies agree with qubo_energy on every
// bitstring (the offset carries every constant term).
IsingModel to_ising(const QuboInstance& inst);

double ising_energy(const IsingModel& model, std::span<const int> spins);
// Energy of basis state `index` with z_i = +1 where bit i is set.
double ising_energy(const IsingModel& model, std::uint64_t index);
std::vector<double> ising_diagonal(const IsingModel& model);

struct Minimum {
  BitString x;
  double energy = 0.0;
};

// Exhaustive search; ties go to the smallest basis-state index.
Minimum brute_force_minimum(const QuboInstance& inst);

enum class GeneratorStyle { PdquboLike, Uniform };

GeneratorStyle parse_generator_style(std::string_view name);
std::string_view to_string(GeneratorStyle style);

struct GeneratorOptions {
  // Bound on |Q_ij|.
  double scale = 0.1;
  // Relative weight of feature relevance against pairwise noise.
  double signal_to_noise = 2.0;
  double penalty_weight = 1.0;
  // Entries are rounded to multiples of this step, as metric deltas reported
  // at fixed precision would be. Zero keeps full precision.
  double resolution = 0.001;
};

// Synthetic stand-in for a PDQUBO matrix: diagonal entries play the role of
// single-feature metric deltas, off-diagonal entries pairwise deltas.
QuboInstance generate_synthetic_q(std::size_t n, std::size_t k, GeneratorStyle style,
                                  std::uint64_t seed, const GeneratorOptions& options = {});

// JSON ({n, k, penalty_weight, q}) or CSV (header `# n=<n> k=<k>`), chosen
// by file extension.
QuboInstance load_instance(const std::filesystem::path& path);
void save_instance(const QuboInstance& inst, const std::filesystem::path& path);

QuboInstance parse_instance_json(std::string_view text);
std::string format_instance_json(const QuboInstance& inst);
QuboInstance parse_instance_csv(std::string_view text);
std::string format_instance_csv(const QuboInstance& inst);

}  // namespace qevt
