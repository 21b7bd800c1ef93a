#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "silan/config.hpp"
#include "silan/nn.hpp"

namespace silan {

// Everything a command can read from a config document. Command-line flags
// override these values; the resolved config is echoed next to the outputs.
struct RunConfig {
  std::uint64_t seed = 7;
  std::size_t n = 1000;
  double noise_std = 0.1;
  double rotation_deg = 30.0;
  std::uint64_t seed_s = 1;
  std::uint64_t seed_t = 2;
  std::vector<std::size_t> layers = {2, 64, 64, 64, 64, 2};
  std::string activation = "relu";
  std::size_t feature_depth = 4;
  std::size_t k_t = 3;
  std::size_t k_s = 3;
  double tau = 0.11;
  std::size_t batch_size = 32;
  std::optional<std::size_t> epochs;  // unset -> the command's own default
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::string centroid_space = "input";
  std::string bank_refresh = "per_epoch";

  MlpSpec mlp_spec() const {
    MlpSpec s{layers, activation_from_string(activation), feature_depth, seed};
    s.validate();
    return s;
  }

  AdaptConfig adapt_config(std::size_t default_epochs) const {
    AdaptConfig c;
    c.k_t = k_t;
    c.k_s = k_s;
    c.tau = tau;
    c.batch_size = batch_size;
    c.epochs = epochs.value_or(default_epochs);
    c.learning_rate = learning_rate;
    c.momentum = momentum;
    c.seed = seed;
    c.centroid_space = centroid_space_from_string(centroid_space);
    c.bank_refresh = bank_refresh_from_string(bank_refresh);
    c.validate();
    return c;
  }
};

inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    try {
      if (key == "seed") cfg.seed = it->get<std::uint64_t>();
      else if (key == "n") cfg.n = it->get<std::size_t>();
      else if (key == "noise_std") cfg.noise_std = it->get<double>();
      else if (key == "rotation_deg") cfg.rotation_deg = it->get<double>();
      else if (key == "seed_s") cfg.seed_s = it->get<std::uint64_t>();
      else if (key == "seed_t") cfg.seed_t = it->get<std::uint64_t>();
      else if (key == "layers") cfg.layers = it->get<std::vector<std::size_t>>();
      else if (key == "activation") cfg.activation = it->get<std::string>();
      else if (key == "feature_depth") cfg.feature_depth = it->get<std::size_t>();
      else if (key == "k_t") cfg.k_t = it->get<std::size_t>();
      else if (key == "k_s") cfg.k_s = it->get<std::size_t>();
      else if (key == "tau") cfg.tau = it->get<double>();
      else if (key == "batch_size") cfg.batch_size = it->get<std::size_t>();
      else if (key == "epochs") cfg.epochs = it->get<std::size_t>();
      else if (key == "learning_rate") cfg.learning_rate = it->get<double>();
      else if (key == "momentum") cfg.momentum = it->get<double>();
      else if (key == "centroid_space") cfg.centroid_space = it->get<std::string>();
      else if (key == "bank_refresh") cfg.bank_refresh = it->get<std::string>();
      else throw std::runtime_error("config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("config: key '" + key + "': " + e.what());
    }
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
  RunConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

inline nlohmann::json run_config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["n"] = cfg.n;
  j["noise_std"] = cfg.noise_std;
  j["rotation_deg"] = cfg.rotation_deg;
  j["seed_s"] = cfg.seed_s;
  j["seed_t"] = cfg.seed_t;
  j["layers"] = cfg.layers;
  j["activation"] = cfg.activation;
  j["feature_depth"] = cfg.feature_depth;
  j["k_t"] = cfg.k_t;
  j["k_s"] = cfg.k_s;
  j["tau"] = cfg.tau;
  j["batch_size"] = cfg.batch_size;
  if (cfg.epochs) j["epochs"] = *cfg.epochs;
  j["learning_rate"] = cfg.learning_rate;
  j["momentum"] = cfg.momentum;
  j["centroid_space"] = cfg.centroid_space;
  j["bank_refresh"] = cfg.bank_refresh;
  return j;
}

}  // namespace silan
