#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace silan {

// Where the positive-key base point lives: `input` feeds the mean of the
// neighborhood's raw samples through the live extractor, `feature` averages
// the bank feature rows directly.
enum class CentroidSpace { input, feature };

enum class BankRefresh { per_epoch, per_step };

inline const char* to_string(CentroidSpace v) {
  return v == CentroidSpace::input ? "input" : "feature";
}

inline const char* to_string(BankRefresh v) {
  return v == BankRefresh::per_epoch ? "per_epoch" : "per_step";
}

inline CentroidSpace centroid_space_from_string(const std::string& s) {
  if (s == "input") return CentroidSpace::input;
  if (s == "feature") return CentroidSpace::feature;
  throw std::invalid_argument("unknown centroid_space '" + s + "' (expected input or feature)");
}

inline BankRefresh bank_refresh_from_string(const std::string& s) {
  if (s == "per_epoch") return BankRefresh::per_epoch;
  if (s == "per_step") return BankRefresh::per_step;
  throw std::invalid_argument("unknown bank_refresh '" + s +
                              "' (expected per_epoch or per_step)");
}

// Hyperparameters of the target adaptation loop.
struct AdaptConfig {
  std::size_t k_t = 3;  // neighbors under the live target extractor
  std::size_t k_s = 3;  // neighbors under the frozen source extractor
  double tau = 0.11;
  std::size_t batch_size = 32;
  std::size_t epochs = 60;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  CentroidSpace centroid_space = CentroidSpace::input;
  BankRefresh bank_refresh = BankRefresh::per_epoch;

  void validate() const {
    if (k_t < 1) throw std::invalid_argument("adapt config: k_t must be >= 1");
    if (k_s < 1) throw std::invalid_argument("adapt config: k_s must be >= 1");
    if (!(tau > 0.0)) throw std::invalid_argument("adapt config: tau must be > 0");
    if (batch_size < 2) throw std::invalid_argument("adapt config: batch_size must be >= 2");
    if (!(learning_rate >= 0.0)) {
      throw std::invalid_argument("adapt config: learning_rate must be >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw std::invalid_argument("adapt config: momentum must be in [0, 1)");
    }
  }
};

}  // namespace silan
