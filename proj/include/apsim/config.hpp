#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "apsim/ccpomdp.hpp"
#include "apsim/checkpoint.hpp"
#include "apsim/evaluation.hpp"
#include "apsim/soft_q.hpp"

namespace apsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of an experiment. The defaults are the published settings of
/// the checkpoint study; the evaluation budgets and quadrature order are ours.
struct ExperimentConfig {
  // scenario
  int start_distance = 12;
  int horizon = 10;
  double gamma = 0.95;
  double prior = 0.5;
  int quadrature_nodes = 8;

  // soft-Q learner
  double learning_rate = 5e-4;
  long batch_size = 50;
  long buffer_capacity = 1'000'000;
  long epochs = 100'000;
  long warmup = 1000;
  double tau = 0.01;
  double sigma = 0.25;

  // learning adversary
  long adversary_epochs = 20'000;
  long adversary_seeds = 10;

  // chance-constrained baseline
  double cc_epsilon = 0.05;
  double cc_variance = 0.001;
  long cc_grid_size = 201;

  // evaluation
  long eval_episodes = 10'000;
  std::vector<std::uint64_t> eval_seeds{0};
  double nominal_alpha = 1.5;
  double nominal_beta = 1.5;
  double eta_step = 0.25;
  double eta_max = 5.0;
  double bthre_step = 0.025;
  double bthre_max = 0.5;

  void validate() const {
    auto require = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("invalid config: " + what);
    };
    require(start_distance >= 1, "start_distance must be >= 1");
    require(horizon >= 1, "horizon must be >= 1");
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    require(prior >= 0.0 && prior <= 1.0, "prior must lie in [0, 1]");
    require(quadrature_nodes >= 1, "quadrature_nodes must be >= 1");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(buffer_capacity >= 1, "buffer_capacity must be >= 1");
    require(epochs >= 0, "epochs must be >= 0");
    require(warmup >= 0, "warmup must be >= 0");
    require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
    require(sigma > 0.0, "sigma must be positive");
    require(adversary_epochs >= 0, "adversary_epochs must be >= 0");
    require(adversary_seeds >= 1, "adversary_seeds must be >= 1");
    require(cc_epsilon > 0.0 && cc_epsilon < 1.0, "cc_epsilon must lie in (0, 1)");
    require(cc_variance >= 0.0, "cc_variance must be >= 0");
    require(cc_grid_size >= 2, "cc_grid_size must be >= 2");
    require(eval_episodes >= 1, "eval_episodes must be >= 1");
    require(!eval_seeds.empty(), "eval_seeds must not be empty");
    require(AdversaryParams{nominal_alpha, nominal_beta}.in_support(), "nominal (alpha, beta) must lie in [1, 2]^2");
    require(eta_step > 0.0 && eta_max >= 0.0, "eta grid step must be positive");
    require(bthre_step > 0.0 && bthre_max >= 0.0 && bthre_max <= DeceptiveParams::kMax,
            "b_thre grid must have a positive step and lie in [0, 0.5]");
  }

  Scenario scenario() const { return {start_distance, horizon, gamma, prior}; }

  SoftQConfig learner() const {
    SoftQConfig c;
    c.learning_rate = learning_rate;
    c.batch_size = static_cast<std::size_t>(batch_size);
    c.buffer_capacity = static_cast<std::size_t>(buffer_capacity);
    c.epochs = epochs;
    c.warmup = static_cast<std::size_t>(warmup);
    c.tau = tau;
    c.sigma = sigma;
    c.gamma = gamma;
    return c;
  }

  SoftQConfig adversary_learner() const {
    SoftQConfig c = learner();
    c.epochs = adversary_epochs;
    return c;
  }

  CcProblem cc_problem() const { return {scenario(), {cc_variance, cc_epsilon}, {}}; }

  EvaluationOptions evaluation(unsigned workers = 1) const {
    EvaluationOptions o;
    o.scenario = scenario();
    o.episodes = eval_episodes;
    o.seeds = eval_seeds;
    o.nominal = {nominal_alpha, nominal_beta};
    o.workers = workers;
    return o;
  }

  SweepOptions sweep(unsigned workers = 1, std::uint64_t base_seed = 0) const {
    SweepOptions o;
    o.evaluation = evaluation(workers);
    o.adversary_learner = adversary_learner();
    o.adversary_seeds = static_cast<std::size_t>(adversary_seeds);
    o.eta_step = eta_step;
    o.eta_max = eta_max;
    o.bthre_step = bthre_step;
    o.bthre_max = bthre_max;
    o.base_seed = base_seed;
    return o;
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {
      {"start_distance", c.start_distance},   {"horizon", c.horizon},
      {"gamma", c.gamma},                     {"prior", c.prior},
      {"quadrature_nodes", c.quadrature_nodes},
      {"learning_rate", c.learning_rate},     {"batch_size", c.batch_size},
      {"buffer_capacity", c.buffer_capacity}, {"epochs", c.epochs},
      {"warmup", c.warmup},                   {"tau", c.tau},
      {"sigma", c.sigma},                     {"adversary_epochs", c.adversary_epochs},
      {"adversary_seeds", c.adversary_seeds}, {"cc_epsilon", c.cc_epsilon},
      {"cc_variance", c.cc_variance},         {"cc_grid_size", c.cc_grid_size},
      {"eval_episodes", c.eval_episodes},     {"eval_seeds", c.eval_seeds},
      {"nominal_alpha", c.nominal_alpha},     {"nominal_beta", c.nominal_beta},
      {"eta_step", c.eta_step},               {"eta_max", c.eta_max},
      {"bthre_step", c.bthre_step},           {"bthre_max", c.bthre_max},
  };
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const std::string& key, T& out) {
  const auto& v = j.at(key);
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  } else {
    if (!v.is_array()) throw ConfigError("config key '" + key + "' must be a list of integers");
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) throw ConfigError("config key '" + key + "' must be a list of non-negative integers");
    }
  }
  out = v.get<T>();
}

}  // namespace detail

/// Reads a flat JSON object on top of the defaults. Unknown keys and
/// mistyped values are errors.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  ExperimentConfig c;
  const nlohmann::json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (value.is_object()) throw ConfigError("config key '" + key + "' must not be nested");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) detail::read_field(j, key, field);
  };
  get("start_distance", c.start_distance);
  get("horizon", c.horizon);
  get("gamma", c.gamma);
  get("prior", c.prior);
  get("quadrature_nodes", c.quadrature_nodes);
  get("learning_rate", c.learning_rate);
  get("batch_size", c.batch_size);
  get("buffer_capacity", c.buffer_capacity);
  get("epochs", c.epochs);
  get("warmup", c.warmup);
  get("tau", c.tau);
  get("sigma", c.sigma);
  get("adversary_epochs", c.adversary_epochs);
  get("adversary_seeds", c.adversary_seeds);
  get("cc_epsilon", c.cc_epsilon);
  get("cc_variance", c.cc_variance);
  get("cc_grid_size", c.cc_grid_size);
  get("eval_episodes", c.eval_episodes);
  get("eval_seeds", c.eval_seeds);
  get("nominal_alpha", c.nominal_alpha);
  get("nominal_beta", c.nominal_beta);
  get("eta_step", c.eta_step);
  get("eta_max", c.eta_max);
  get("bthre_step", c.bthre_step);
  get("bthre_max", c.bthre_max);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of the canonical (key-sorted, compact) JSON form.
inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(to_json(c).dump())); }

}  // namespace apsim
