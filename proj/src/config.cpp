#include "qevt/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qevt/error.hpp"

namespace qevt {

namespace {

using Json = nlohmann::ordered_json;

std::string join(std::string_view where, std::string_view key) {
  return where.empty() ? std::string(key) : std::string(where) + "." + std::string(key);
}

void check_keys(const Json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError((where.empty() ? "config" : std::string(where)) + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError("unknown config key '" + join(where, item.key()) + "'");
  }
}

std::uint64_t as_unsigned(const Json& v, const std::string& path) {
  if (!v.is_number_unsigned()) throw ConfigError(path + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

double as_real(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + " must be a number");
  return v.get<double>();
}

int as_int(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path + " must be an integer");
  return v.get<int>();
}

std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + " must be a string");
  return v.get<std::string>();
}

template <class F>
void with(const Json& obj, std::string_view where, std::string_view key, F&& apply) {
  auto it = obj.find(std::string(key));
  if (it != obj.end()) apply(*it, join(where, key));
}

void read_count(const Json& obj, std::string_view where, std::string_view key, std::size_t& out) {
  with(obj, where, key, [&](const Json& v, const std::string& p) { out = as_unsigned(v, p); });
}

void read_real(const Json& obj, std::string_view where, std::string_view key, double& out) {
  with(obj, where, key, [&](const Json& v, const std::string& p) { out = as_real(v, p); });
}

std::vector<std::size_t> read_counts(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + " must be an array of positive integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_unsigned(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void parse_instance(const Json& j, InstanceSource& inst) {
  constexpr std::string_view w = "instance";
  check_keys(j, w, {"path", "n", "k", "style", "seed", "scale", "signal_to_noise", "resolution", "penalty_weight"});
  with(j, w, "path", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      inst.path.reset();
    } else {
      inst.path = as_string(v, p);
    }
  });
  read_count(j, w, "n", inst.n);
  read_count(j, w, "k", inst.k);
  with(j, w, "style", [&](const Json& v, const std::string& p) {
    try {
      inst.style = parse_generator_style(as_string(v, p));
    } catch (const InvalidArgument& e) {
      throw ConfigError(p + ": " + e.what());
    }
  });
  with(j, w, "seed", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      inst.seed.reset();
    } else {
      inst.seed = as_unsigned(v, p);
    }
  });
  read_real(j, w, "scale", inst.options.scale);
  read_real(j, w, "signal_to_noise", inst.options.signal_to_noise);
  read_real(j, w, "resolution", inst.options.resolution);
  read_real(j, w, "penalty_weight", inst.options.penalty_weight);
}

void parse_sa(const Json& j, SaConfig& sa) {
  constexpr std::string_view w = "sa";
  check_keys(j, w, {"initial_temperature", "cooling_rate", "sweeps", "restarts"});
  with(j, w, "initial_temperature", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      sa.initial_temperature.reset();
    } else {
      sa.initial_temperature = as_real(v, p);
    }
  });
  read_real(j, w, "cooling_rate", sa.cooling_rate);
  read_count(j, w, "sweeps", sa.sweeps);
  read_count(j, w, "restarts", sa.restarts);
}

void parse_qaoa(const Json& j, QaoaSettings& q) {
  constexpr std::string_view w = "qaoa";
  check_keys(j, w, {"depth_p", "max_evaluations", "restarts", "initial_state"});
  read_count(j, w, "depth_p", q.depth_p);
  read_count(j, w, "max_evaluations", q.max_evaluations);
  read_count(j, w, "restarts", q.restarts);
  with(j, w, "initial_state", [&](const Json& v, const std::string& p) {
    try {
      q.initial_state = parse_initial_state(as_string(v, p));
    } catch (const InvalidArgument& e) {
      throw ConfigError(p + ": " + e.what());
    }
  });
}

void parse_sample_size(const Json& j, SampleSizeConfig& s) {
  constexpr std::string_view w = "sample_size";
  check_keys(j, w, {"n_min", "n_max", "stride", "reps_i", "reps_j", "level", "failure_threshold", "replicates"});
  read_count(j, w, "n_min", s.n_min);
  read_count(j, w, "n_max", s.n_max);
  read_count(j, w, "stride", s.stride);
  read_count(j, w, "reps_i", s.reps_i);
  read_count(j, w, "reps_j", s.reps_j);
  read_real(j, w, "level", s.level);
  read_real(j, w, "failure_threshold", s.failure_threshold);
  read_count(j, w, "replicates", s.normality.replicates);
}

void parse_pool(const Json& j, PoolSource& pool) {
  constexpr std::string_view w = "pool";
  check_keys(j, w, {"path", "synthetic_gev", "synthetic_size"});
  with(j, w, "path", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      pool.path.reset();
    } else {
      pool.path = as_string(v, p);
    }
  });
  with(j, w, "synthetic_gev", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      pool.synthetic_gev.reset();
      return;
    }
    check_keys(v, p, {"mu", "sigma", "xi"});
    GevParams g;
    read_real(v, p, "mu", g.mu);
    read_real(v, p, "sigma", g.sigma);
    read_real(v, p, "xi", g.xi);
    pool.synthetic_gev = g;
  });
  read_count(j, w, "synthetic_size", pool.synthetic_size);
}

void parse_validation(const Json& j, ValidationSettings& val) {
  constexpr std::string_view w = "validate";
  check_keys(j, w, {"shots", "alpha", "n_evt", "delta_min", "delta_max", "trials"});
  with(j, w, "shots", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      val.shots.reset();
    } else {
      val.shots = as_unsigned(v, p);
    }
  });
  read_real(j, w, "alpha", val.alpha);
  with(j, w, "n_evt", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      val.n_evt.reset();
    } else {
      val.n_evt = as_unsigned(v, p);
    }
  });
  with(j, w, "delta_min", [&](const Json& v, const std::string& p) { val.delta_min = as_int(v, p); });
  with(j, w, "delta_max", [&](const Json& v, const std::string& p) { val.delta_max = as_int(v, p); });
  read_count(j, w, "trials", val.trials);
}

void parse_sweep(const Json& j, SweepSettings& sw) {
  constexpr std::string_view w = "sweep";
  check_keys(j, w, {"shots", "reps"});
  with(j, w, "shots", [&](const Json& v, const std::string& p) { sw.shots = read_counts(v, p); });
  read_count(j, w, "reps", sw.reps);
}

template <class T>
Json nullable(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (out_dir.empty()) fail("out_dir must not be empty");
  if (!instance.path) {
    if (instance.n < 2) fail("instance.n must be at least 2 for synthetic instances");
    if (instance.k > instance.n) fail("instance.k must not exceed instance.n");
    if (!(instance.options.scale > 0.0)) fail("instance.scale must be positive");
    if (!(instance.options.signal_to_noise >= 0.0)) fail("instance.signal_to_noise must be non-negative");
    if (!(instance.options.resolution >= 0.0)) fail("instance.resolution must be non-negative");
    if (!std::isfinite(instance.options.penalty_weight)) fail("instance.penalty_weight must be finite");
  }
  try {
    sa.validate();
    noise.validate();
    sample_size.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  if (qaoa.depth_p == 0) fail("qaoa.depth_p must be at least 1");
  if (qaoa.restarts == 0) fail("qaoa.restarts must be at least 1");
  if (qaoa.max_evaluations == 0) fail("qaoa.max_evaluations must be at least 1");
  if (shots.empty()) fail("shots must list at least one setting");
  for (auto s : shots) {
    if (s == 0) fail("shots entries must be positive");
  }
  if (runs == 0) fail("runs must be positive");
  if (alphas.empty()) fail("alphas must list at least one level");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) fail("alphas entries must lie in (0, 1)");
  }
  if (y_ideal && !std::isfinite(*y_ideal)) fail("y_ideal must be finite");
  if (pool.synthetic_gev) {
    try {
      pool.synthetic_gev->validate();
    } catch (const InvalidArgument& e) {
      fail(std::string("pool.synthetic_gev: ") + e.what());
    }
  }
  if (validation.shots && *validation.shots == 0) fail("validate.shots must be positive");
  if (!(validation.alpha > 0.0 && validation.alpha < 1.0)) fail("validate.alpha must lie in (0, 1)");
  if (validation.delta_min > validation.delta_max) fail("validate.delta_min must not exceed validate.delta_max");
  if (validation.trials == 0) fail("validate.trials must be positive");
  if (sweep.shots.empty()) fail("sweep.shots must list at least one setting");
  for (auto s : sweep.shots) {
    if (s == 0) fail("sweep.shots entries must be positive");
  }
  if (sweep.reps == 0) fail("sweep.reps must be positive");
}

ExperimentConfig parse_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "", {"seed", "out_dir", "instance", "sa", "qaoa", "noise", "shots", "runs", "alphas", "y_ideal",
                     "sample_size", "pool", "validate", "sweep"});
  ExperimentConfig cfg;
  with(j, "", "seed", [&](const Json& v, const std::string& p) { cfg.seed = as_unsigned(v, p); });
  with(j, "", "out_dir", [&](const Json& v, const std::string& p) { cfg.out_dir = as_string(v, p); });
  with(j, "", "instance", [&](const Json& v, const std::string&) { parse_instance(v, cfg.instance); });
  with(j, "", "sa", [&](const Json& v, const std::string&) { parse_sa(v, cfg.sa); });
  with(j, "", "qaoa", [&](const Json& v, const std::string&) { parse_qaoa(v, cfg.qaoa); });
  with(j, "", "noise", [&](const Json& v, const std::string& p) {
    check_keys(v, p, {"readout_flip_prob"});
    read_real(v, p, "readout_flip_prob", cfg.noise.readout_flip_prob);
  });
  with(j, "", "shots", [&](const Json& v, const std::string& p) { cfg.shots = read_counts(v, p); });
  read_count(j, "", "runs", cfg.runs);
  with(j, "", "alphas", [&](const Json& v, const std::string& p) {
    if (!v.is_array()) throw ConfigError(p + " must be an array of numbers");
    cfg.alphas.clear();
    for (std::size_t i = 0; i < v.size(); ++i) cfg.alphas.push_back(as_real(v[i], p + "[" + std::to_string(i) + "]"));
  });
  with(j, "", "y_ideal", [&](const Json& v, const std::string& p) {
    if (v.is_null()) {
      cfg.y_ideal.reset();
    } else {
      cfg.y_ideal = as_real(v, p);
    }
  });
  with(j, "", "sample_size", [&](const Json& v, const std::string&) { parse_sample_size(v, cfg.sample_size); });
  with(j, "", "pool", [&](const Json& v, const std::string&) { parse_pool(v, cfg.pool); });
  with(j, "", "validate", [&](const Json& v, const std::string&) { parse_validation(v, cfg.validation); });
  with(j, "", "sweep", [&](const Json& v, const std::string&) { parse_sweep(v, cfg.sweep); });
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const ExperimentConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir.generic_string();
  Json inst;
  inst["path"] = cfg.instance.path ? Json(cfg.instance.path->generic_string()) : Json(nullptr);
  inst["n"] = cfg.instance.n;
  inst["k"] = cfg.instance.k;
  inst["style"] = std::string(to_string(cfg.instance.style));
  inst["seed"] = nullable(cfg.instance.seed);
  inst["scale"] = cfg.instance.options.scale;
  inst["signal_to_noise"] = cfg.instance.options.signal_to_noise;
  inst["resolution"] = cfg.instance.options.resolution;
  inst["penalty_weight"] = cfg.instance.options.penalty_weight;
  j["instance"] = inst;
  j["sa"] = {{"initial_temperature", nullable(cfg.sa.initial_temperature)},
             {"cooling_rate", cfg.sa.cooling_rate},
             {"sweeps", cfg.sa.sweeps},
             {"restarts", cfg.sa.restarts}};
  j["qaoa"] = {{"depth_p", cfg.qaoa.depth_p},
               {"max_evaluations", cfg.qaoa.max_evaluations},
               {"restarts", cfg.qaoa.restarts},
               {"initial_state", std::string(to_string(cfg.qaoa.initial_state))}};
  j["noise"] = {{"readout_flip_prob", cfg.noise.readout_flip_prob}};
  j["shots"] = cfg.shots;
  j["runs"] = cfg.runs;
  j["alphas"] = cfg.alphas;
  j["y_ideal"] = nullable(cfg.y_ideal);
  const auto& ss = cfg.sample_size;
  j["sample_size"] = {{"n_min", ss.n_min},   {"n_max", ss.n_max},   {"stride", ss.stride},
                      {"reps_i", ss.reps_i}, {"reps_j", ss.reps_j}, {"level", ss.level},
                      {"failure_threshold", ss.failure_threshold}, {"replicates", ss.normality.replicates}};
  Json pool;
  pool["path"] = cfg.pool.path ? Json(cfg.pool.path->generic_string()) : Json(nullptr);
  pool["synthetic_gev"] = cfg.pool.synthetic_gev ? Json{{"mu", cfg.pool.synthetic_gev->mu},
                                                        {"sigma", cfg.pool.synthetic_gev->sigma},
                                                        {"xi", cfg.pool.synthetic_gev->xi}}
                                                  : Json(nullptr);
  pool["synthetic_size"] = cfg.pool.synthetic_size;
  j["pool"] = pool;
  j["validate"] = {{"shots", nullable(cfg.validation.shots)}, {"alpha", cfg.validation.alpha},
                   {"n_evt", nullable(cfg.validation.n_evt)}, {"delta_min", cfg.validation.delta_min},
                   {"delta_max", cfg.validation.delta_max},   {"trials", cfg.validation.trials}};
  j["sweep"] = {{"shots", cfg.sweep.shots}, {"reps", cfg.sweep.reps}};
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Where the artifacts go does not change what they contain.
  ExperimentConfig canonical = cfg;
  canonical.out_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : format_config(canonical)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qevt
