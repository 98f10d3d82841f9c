#include "qevt/qubo.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qevt/error.hpp"
#include "qevt/random.hpp"

namespace qevt {

namespace {

using json = nlohmann::json;

// x^T Q x + w (|S| - k)^2 over the ascending list S of set variables.
double energy_over_support(const QuboInstance& inst, std::span<const std::size_t> support) {
  const std::size_t n = inst.n();
  const double* q = inst.matrix().data();
  double quad = 0.0;
  for (std::size_t a : support) {
    const double* row = q + a * n;
    double acc = 0.0;
    for (std::size_t b : support) acc += row[b];
    quad += acc;
  }
  const double deviation = static_cast<double>(support.size()) - static_cast<double>(inst.k());
  return quad + inst.penalty_weight() * deviation * deviation;
}

void check_enumerable(std::size_t n, const char* what) {
  if (n > kMaxEnumerableVariables) {
    throw CapacityError(std::string(what) + ": n=" + std::to_string(n) + " exceeds the enumeration limit of " +
                        std::to_string(kMaxEnumerableVariables));
  }
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

BitString bits_from_index(std::uint64_t index, std::size_t n) {
  BitString bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = static_cast<std::uint8_t>((index >> i) & 1U);
  return bits;
}

std::uint64_t index_from_bits(std::span<const std::uint8_t> bits) {
  if (bits.size() > 64) throw InvalidArgument("bitstring longer than 64 bits cannot be packed");
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw InvalidArgument("bitstring entries must be 0 or 1");
    index |= static_cast<std::uint64_t>(bits[i]) << i;
  }
  return index;
}

QuboInstance::QuboInstance(std::size_t n, std::size_t k, std::vector<double> q, double penalty_weight)
    : n_(n), k_(k), q_(std::move(q)), penalty_weight_(penalty_weight) {
  if (n_ == 0) throw InvalidArgument("instance dimension n must be positive");
  if (k_ > n_) throw InvalidArgument("cardinality k=" + std::to_string(k_) + " exceeds n=" + std::to_string(n_));
  if (q_.size() != n_ * n_) {
    throw InvalidArgument("Q has " + std::to_string(q_.size()) + " entries, expected " + std::to_string(n_ * n_));
  }
  if (!std::isfinite(penalty_weight_)) throw InvalidArgument("penalty weight must be finite");
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      const double v = q_[i * n_ + j];
      if (!std::isfinite(v)) {
        throw InvalidArgument("Q[" + std::to_string(i) + "][" + std::to_string(j) + "] is not finite");
      }
      if (j > i && v != q_[j * n_ + i]) {
        throw InvalidArgument("Q is not symmetric: Q[" + std::to_string(i) + "][" + std::to_string(j) +
                              "] != Q[" + std::to_string(j) + "][" + std::to_string(i) + "]");
      }
    }
  }
}

double QuboInstance::max_abs_coefficient() const noexcept {
  double m = 0.0;
  for (double v : q_) m = std::max(m, std::abs(v));
  return m;
}

double qubo_energy(const QuboInstance& inst, std::span<const std::uint8_t> x) {
  if (x.size() != inst.n()) {
    throw InvalidArgument("bitstring length " + std::to_string(x.size()) + " does not match n=" +
                          std::to_string(inst.n()));
  }
  std::vector<std::size_t> support;
  support.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 1) throw InvalidArgument("bitstring entries must be 0 or 1");
    if (x[i] != 0) support.push_back(i);
  }
  return energy_over_support(inst, support);
}

double qubo_energy(const QuboInstance& inst, std::uint64_t index) {
  if (inst.n() < 64 && (index >> inst.n()) != 0) throw InvalidArgument("basis index out of range for n");
  std::size_t support[64];
  std::size_t count = 0;
  for (std::uint64_t rest = index; rest != 0; rest &= rest - 1) {
    support[count++] = static_cast<std::size_t>(std::countr_zero(rest));
  }
  return energy_over_support(inst, std::span<const std::size_t>(support, count));
}

std::vector<double> energy_table(const QuboInstance& inst) {
  check_enumerable(inst.n(), "energy table");
  const std::uint64_t size = std::uint64_t{1} << inst.n();
  std::vector<double> table(size);
  for (std::uint64_t i = 0; i < size; ++i) table[i] = qubo_energy(inst, i);
  return table;
}

void IsingModel::validate() const {
  if (n == 0) throw InvalidArgument("Ising model needs n >= 1");
  if (h.size() != n) throw InvalidArgument("Ising field vector length does not match n");
  if (!std::isfinite(offset)) throw InvalidArgument("Ising offset is not finite");
  for (double v : h) {
    if (!std::isfinite(v)) throw InvalidArgument("Ising field is not finite");
  }
  for (const auto& [key, v] : j) {
    if (!(key.first < key.second && key.second < n)) throw InvalidArgument("coupling key must satisfy i < j < n");
    if (!std::isfinite(v)) throw InvalidArgument("coupling is not finite");
  }
}

IsingModel to_ising(const QuboInstance& inst) {
  // Substitute x_i = (1 + z_i) / 2:
  //   x^T Q x   -> 1/4 sum_ij Q_ij (1 + z_i)(1 + z_j), with z_i^2 = 1
  //   (sum x - k)^2 -> ((sum z + c) / 2)^2, c = n - 2k, (sum z)^2 = n + 2 sum_{i<j} z_i z_j
  const std::size_t n = inst.n();
  const double w = inst.penalty_weight();
  const double c = static_cast<double>(n) - 2.0 * static_cast<double>(inst.k());

  IsingModel model;
  model.n = n;
  model.h.assign(n, 0.0);

  double total = 0.0;
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t jj = 0; jj < n; ++jj) {
      row += inst.q(i, jj) + inst.q(jj, i);
      total += inst.q(i, jj);
    }
    trace += inst.q(i, i);
    model.h[i] = 0.25 * row + 0.5 * w * c;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t jj = i + 1; jj < n; ++jj) {
      const double coupling = 0.25 * (inst.q(i, jj) + inst.q(jj, i)) + 0.5 * w;
      if (coupling != 0.0) model.j[{i, jj}] = coupling;
    }
  }
  model.offset = 0.25 * (total + trace) + 0.25 * w * (static_cast<double>(n) + c * c);
  return model;
}

double ising_energy(const IsingModel& model, std::span<const int> spins) {
  if (spins.size() != model.n || model.h.size() != model.n) {
    throw InvalidArgument("spin vector length " + std::to_string(spins.size()) + " does not match n=" +
                          std::to_string(model.n));
  }
  double e = model.offset;
  for (std::size_t i = 0; i < model.n; ++i) {
    if (spins[i] != 1 && spins[i] != -1) throw InvalidArgument("spins must be -1 or +1");
    e += model.h[i] * spins[i];
  }
  for (const auto& [key, v] : model.j) e += v * spins[key.first] * spins[key.second];
  return e;
}

double ising_energy(const IsingModel& model, std::uint64_t index) {
  auto spin = [index](std::size_t i) { return ((index >> i) & 1U) != 0 ? 1.0 : -1.0; };
  double e = model.offset;
  for (std::size_t i = 0; i < model.n; ++i) e += model.h[i] * spin(i);
  for (const auto& [key, v] : model.j) e += v * spin(key.first) * spin(key.second);
  return e;
}

std::vector<double> ising_diagonal(const IsingModel& model) {
  check_enumerable(model.n, "Ising diagonal");
  const std::uint64_t size = std::uint64_t{1} << model.n;
  std::vector<double> diag(size);
  for (std::uint64_t i = 0; i < size; ++i) diag[i] = ising_energy(model, i);
  return diag;
}

Minimum brute_force_minimum(const QuboInstance& inst) {
  check_enumerable(inst.n(), "brute force minimum");
  const std::uint64_t size = std::uint64_t{1} << inst.n();
  std::uint64_t best = 0;
  double best_energy = qubo_energy(inst, std::uint64_t{0});
  for (std::uint64_t i = 1; i < size; ++i) {
    const double e = qubo_energy(inst, i);
    if (e < best_energy) {
      best_energy = e;
      best = i;
    }
  }
  return {bits_from_index(best, inst.n()), best_energy};
}

GeneratorStyle parse_generator_style(std::string_view name) {
  if (name == "pdqubo-like") return GeneratorStyle::PdquboLike;
  if (name == "uniform") return GeneratorStyle::Uniform;
  throw InvalidArgument("unknown generator style '" + std::string(name) + "' (expected pdqubo-like or uniform)");
}

std::string_view to_string(GeneratorStyle style) {
  switch (style) {
    case GeneratorStyle::PdquboLike:
      return "pdqubo-like";
    case GeneratorStyle::Uniform:
      return "uniform";
  }
  return "unknown";
}

QuboInstance generate_synthetic_q(std::size_t n, std::size_t k, GeneratorStyle style, std::uint64_t seed,
                                  const GeneratorOptions& options) {
  if (n < 2) throw InvalidArgument("synthetic instances need n >= 2");
  if (!(options.scale > 0.0) || !std::isfinite(options.scale)) throw InvalidArgument("scale must be positive");
  if (!(options.signal_to_noise >= 0.0)) throw InvalidArgument("signal_to_noise must be non-negative");
  if (!(options.resolution >= 0.0) || !std::isfinite(options.resolution)) {
    throw InvalidArgument("resolution must be non-negative");
  }

  Rng rng(derive_seed(seed, {stream::kGenerator}));
  auto symmetric_uniform = [&rng] { return 2.0 * uniform01(rng) - 1.0; };

  std::vector<double> q(n * n, 0.0);
  if (style == GeneratorStyle::Uniform) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double v = options.scale * symmetric_uniform();
        q[i * n + j] = v;
        q[j * n + i] = v;
      }
    }
  } else {
    // Diagonal: a relevance gain in [0, 1] mixed with unit noise, scaled so
    // the result never exceeds `scale` in magnitude. A relevant feature
    // lowers the energy when selected.
    const double snr = options.signal_to_noise;
    for (std::size_t i = 0; i < n; ++i) {
      const double relevance = uniform01(rng);
      q[i * n + i] = -options.scale * (snr * relevance + symmetric_uniform()) / (snr + 1.0);
    }
    // Off-diagonal: pairwise deltas without a preferred sign, weaker than the
    // strongest single-feature effect.
    const double pair_scale = options.scale / (snr + 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = pair_scale * symmetric_uniform();
        q[i * n + j] = v;
        q[j * n + i] = v;
      }
    }
  }
  if (options.resolution > 0.0) {
    for (double& v : q) v = options.resolution * std::trunc(v / options.resolution);
  }
  return QuboInstance(n, k, std::move(q), options.penalty_weight);
}

QuboInstance parse_instance_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), line_of_offset(text, e.byte));
  }
  if (!doc.is_object()) throw ParseError("instance must be a JSON object");

  auto require_unsigned = [&doc](const char* field) -> std::size_t {
    if (!doc.contains(field)) throw ParseError(std::string("missing field '") + field + "'", 0, field);
    const auto& v = doc.at(field);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ParseError(std::string("field '") + field + "' must be a non-negative integer", 0, field);
    }
    return v.get<std::size_t>();
  };
  const std::size_t n = require_unsigned("n");
  const std::size_t k = require_unsigned("k");
  if (n == 0) throw ParseError("field 'n' must be positive", 0, "n");
  if (k > n) throw ParseError("k=" + std::to_string(k) + " exceeds n=" + std::to_string(n), 0, "k");

  double penalty_weight = 1.0;
  if (doc.contains("penalty_weight")) {
    if (!doc["penalty_weight"].is_number()) throw ParseError("penalty_weight must be a number", 0, "penalty_weight");
    penalty_weight = doc["penalty_weight"].get<double>();
  }

  if (!doc.contains("q") || !doc["q"].is_array()) throw ParseError("field 'q' must be an array of rows", 0, "q");
  const auto& rows = doc["q"];
  if (rows.size() != n) {
    throw ParseError("q has " + std::to_string(rows.size()) + " rows, expected " + std::to_string(n), 0, "q");
  }
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i];
    const std::string row_field = "q[" + std::to_string(i) + "]";
    if (!row.is_array() || row.size() != n) {
      throw ParseError(row_field + " must be an array of " + std::to_string(n) + " numbers", 0, row_field);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!row[j].is_number()) {
        const std::string cell = row_field + "[" + std::to_string(j) + "]";
        throw ParseError(cell + " is not a number", 0, cell);
      }
      q[i * n + j] = row[j].get<double>();
    }
  }
  try {
    return QuboInstance(n, k, std::move(q), penalty_weight);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), 0, "q");
  }
}

std::string format_instance_json(const QuboInstance& inst) {
  json doc;
  doc["n"] = inst.n();
  doc["k"] = inst.k();
  doc["penalty_weight"] = inst.penalty_weight();
  json rows = json::array();
  for (std::size_t i = 0; i < inst.n(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < inst.n(); ++j) row.push_back(inst.q(i, j));
    rows.push_back(std::move(row));
  }
  doc["q"] = std::move(rows);
  return doc.dump(2) + "\n";
}

QuboInstance parse_instance_csv(std::string_view text) {
  std::size_t n = 0;
  std::size_t k = 0;
  bool have_n = false;
  bool have_k = false;
  double penalty_weight = 1.0;
  std::vector<double> q;
  std::size_t rows = 0;
  std::size_t line_no = 0;

  auto parse_number = [&](std::string_view token, std::size_t line, const std::string& field) {
    token = trim(token);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
      throw ParseError("cannot parse '" + std::string(token) + "' as a number", line, field);
    }
    return v;
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      std::istringstream header{std::string(line.substr(1))};
      std::string token;
      while (header >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string_view value = std::string_view(token).substr(eq + 1);
        if (key == "n" || key == "k") {
          const double v = parse_number(value, line_no, key);
          if (v < 0 || v != std::floor(v)) throw ParseError(key + " must be a non-negative integer", line_no, key);
          (key == "n" ? n : k) = static_cast<std::size_t>(v);
          (key == "n" ? have_n : have_k) = true;
        } else if (key == "penalty_weight") {
          penalty_weight = parse_number(value, line_no, key);
        }
      }
      if (have_n) q.reserve(n * n);
      continue;
    }
    if (!have_n || !have_k) throw ParseError("matrix row before the '# n=<n> k=<k>' header", line_no);
    if (n == 0) throw ParseError("n must be positive", line_no, "n");
    if (rows >= n) throw ParseError("more than n=" + std::to_string(n) + " matrix rows", line_no);
    std::size_t col = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = std::min(line.find(',', start), line.size());
      const std::string field = "q[" + std::to_string(rows) + "][" + std::to_string(col) + "]";
      if (col >= n) throw ParseError("row has more than n=" + std::to_string(n) + " columns", line_no, field);
      q.push_back(parse_number(line.substr(start, comma - start), line_no, field));
      ++col;
      start = comma + 1;
      if (comma == line.size()) break;
    }
    if (col != n) {
      throw ParseError("row has " + std::to_string(col) + " columns, expected " + std::to_string(n), line_no);
    }
    ++rows;
  }
  if (!have_n || !have_k) throw ParseError("missing '# n=<n> k=<k>' header line");
  if (k > n) throw ParseError("k=" + std::to_string(k) + " exceeds n=" + std::to_string(n), 0, "k");
  if (rows != n) throw ParseError("found " + std::to_string(rows) + " matrix rows, expected " + std::to_string(n));
  try {
    return QuboInstance(n, k, std::move(q), penalty_weight);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), 0, "q");
  }
}

std::string format_instance_csv(const QuboInstance& inst) {
  std::string out = "# n=" + std::to_string(inst.n()) + " k=" + std::to_string(inst.k()) +
                    " penalty_weight=" + format_double(inst.penalty_weight()) + "\n";
  for (std::size_t i = 0; i < inst.n(); ++i) {
    for (std::size_t j = 0; j < inst.n(); ++j) {
      if (j > 0) out += ',';
      out += format_double(inst.q(i, j));
    }
    out += '\n';
  }
  return out;
}

QuboInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open instance file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    if (path.extension() == ".csv") return parse_instance_csv(text);
    return parse_instance_json(text);
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

void save_instance(const QuboInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write instance file " + path.string());
  out << (path.extension() == ".csv" ? format_instance_csv(inst) : format_instance_json(inst));
  if (!out) throw IoError("failed writing instance file " + path.string());
}

}  // namespace qevt
