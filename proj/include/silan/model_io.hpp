#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "silan/nn.hpp"

namespace silan {

// Self-describing JSON document: spec plus flat row-major weight and bias
// arrays in layer order. Doubles are printed in shortest round-trip form, so
// save/load is bit-exact for finite values.
inline nlohmann::json model_to_json(const MlpModel& m) {
  nlohmann::json j;
  j["layer_widths"] = m.spec.layer_widths;
  j["activation"] = to_string(m.spec.activation);
  j["feature_depth"] = m.spec.feature_depth;
  j["seed"] = m.spec.seed;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (const DenseMatrix& w : m.weights) j["weights"].push_back(w.values);
  for (const std::vector<double>& b : m.biases) j["biases"].push_back(b);
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  try {
    MlpSpec spec;
    spec.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
    spec.activation = activation_from_string(j.at("activation").get<std::string>());
    spec.feature_depth = j.at("feature_depth").get<std::size_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();

    MlpModel m;
    m.spec = spec;
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != spec.num_weight_layers() || biases.size() != spec.num_weight_layers()) {
      throw std::runtime_error("model document: layer count does not match layer_widths");
    }
    for (std::size_t l = 0; l < spec.num_weight_layers(); ++l) {
      DenseMatrix w(spec.layer_widths[l], spec.layer_widths[l + 1]);
      auto values = weights[l].get<std::vector<double>>();
      if (values.size() != w.values.size()) {
        throw std::runtime_error("model document: weight layer " + std::to_string(l) +
                                 " has wrong element count");
      }
      w.values = std::move(values);
      m.weights.push_back(std::move(w));
      m.biases.push_back(biases[l].get<std::vector<double>>());
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model document: ") + e.what());
  }
}

inline std::string model_to_string(const MlpModel& m) { return model_to_json(m).dump(2) + "\n"; }

inline void save_model(const MlpModel& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << model_to_string(m);
  if (!f) throw std::runtime_error("write failed for " + path);
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model document " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace silan
