#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "silan/augment.hpp"

using namespace silan;

namespace {

LabeledDataset toy_points() {
  LabeledDataset ds;
  ds.X = DenseMatrix(10, 2);
  Rng rng(404);
  for (double& v : ds.X.values) v = rng.uniform(-2.0, 2.0);
  ds.labels.assign(10, 0);
  for (std::size_t i = 5; i < 10; ++i) ds.labels[i] = 1;
  ds.num_classes = 2;
  return ds;
}

// plain-loop re-implementation of the whole key pipeline for the oracle
struct PipelineOracle {
  const MlpModel& model_t;
  const MlpModel& model_s;
  const LabeledDataset& ds;

  std::vector<double> extract(const MlpModel& m, std::span<const double> x) const {
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < m.spec.feature_depth; ++l) {
      std::vector<double> next(m.spec.layer_widths[l + 1], 0.0);
      for (std::size_t j = 0; j < next.size(); ++j) {
        double z = m.biases[l][j];
        for (std::size_t k = 0; k < a.size(); ++k) {
          z += a[k] * m.weights[l].values[k * next.size() + j];
        }
        next[j] = std::tanh(z);
      }
      a = std::move(next);
    }
    return a;
  }

  std::vector<double> head(const MlpModel& m, std::span<const double> h) const {
    std::vector<double> a(h.begin(), h.end());
    for (std::size_t l = m.spec.feature_depth; l < m.spec.num_weight_layers(); ++l) {
      std::vector<double> next(m.spec.layer_widths[l + 1], 0.0);
      for (std::size_t j = 0; j < next.size(); ++j) {
        double z = m.biases[l][j];
        for (std::size_t k = 0; k < a.size(); ++k) {
          z += a[k] * m.weights[l].values[k * next.size() + j];
        }
        next[j] = l + 1 < m.spec.num_weight_layers() ? std::tanh(z) : z;
      }
      a = std::move(next);
    }
    return a;
  }

  std::vector<std::size_t> top_k(const MlpModel& m, std::size_t qi, std::size_t k) const {
    const std::vector<double> qf = extract(m, ds.X.row(qi));
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (i == qi) continue;
      const std::vector<double> f = extract(m, ds.X.row(i));
      double d = 0.0, nq = 0.0, nf = 0.0;
      for (std::size_t h = 0; h < f.size(); ++h) {
        d += qf[h] * f[h];
        nq += qf[h] * qf[h];
        nf += f[h] * f[h];
      }
      scored.emplace_back(d / std::sqrt(nq * nf), i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = scored[i].second;
    return out;
  }

  PositiveKey key_for(std::size_t qi, const AdaptConfig& cfg, const Rng& rng,
                      std::size_t slot) const {
    const std::vector<std::size_t> nt = top_k(model_t, qi, cfg.k_t);
    const std::vector<std::size_t> ns = top_k(model_s, qi, cfg.k_s);

    std::vector<double> centroid(ds.dim(), 0.0);
    for (std::size_t i : nt) {
      for (std::size_t j = 0; j < ds.dim(); ++j) centroid[j] += ds.X(i, j) / nt.size();
    }
    const std::size_t h_dim = model_s.spec.feature_dim();
    std::vector<double> mean(h_dim, 0.0), variance(h_dim, 0.0);
    for (std::size_t i : ns) {
      const std::vector<double> f = extract(model_s, ds.X.row(i));
      for (std::size_t h = 0; h < h_dim; ++h) mean[h] += f[h] / ns.size();
    }
    for (std::size_t i : ns) {
      const std::vector<double> f = extract(model_s, ds.X.row(i));
      for (std::size_t h = 0; h < h_dim; ++h) {
        variance[h] += (f[h] - mean[h]) * (f[h] - mean[h]) / ns.size();
      }
    }
    Rng slot_rng = rng.split(slot);
    PositiveKey key;
    key.noise.resize(h_dim);
    for (std::size_t h = 0; h < h_dim; ++h) {
      key.noise[h] = std::sqrt(variance[h]) * slot_rng.normal();
    }
    key.augmented_features = extract(model_t, centroid);
    for (std::size_t h = 0; h < h_dim; ++h) key.augmented_features[h] += key.noise[h];
    key.key_logits = head(model_t, key.augmented_features);
    return key;
  }
};

}  // namespace

TEST_CASE("sample_noise") {
  SECTION("zero variance is exactly zero") {
    Rng rng(1);
    REQUIRE(sample_noise({0.0, 0.0, 0.0}, rng) == std::vector<double>{0.0, 0.0, 0.0});
  }
  SECTION("negative variance is rejected") {
    Rng rng(1);
    REQUIRE_THROWS_AS(sample_noise({1.0, -0.1}, rng), std::invalid_argument);
  }
  SECTION("deterministic per seed") {
    Rng a(9), b(9);
    REQUIRE(sample_noise({1.0, 2.0}, a) == sample_noise({1.0, 2.0}, b));
  }
  SECTION("unit-variance draws have matching sample moments") {
    const std::vector<double> variance(4, 1.0);
    Rng rng(123);
    std::vector<double> sum(4, 0.0), sum_sq(4, 0.0);
    constexpr std::size_t kDraws = 100000;
    for (std::size_t t = 0; t < kDraws; ++t) {
      const std::vector<double> xi = sample_noise(variance, rng);
      for (std::size_t h = 0; h < 4; ++h) {
        sum[h] += xi[h];
        sum_sq[h] += xi[h] * xi[h];
      }
    }
    for (std::size_t h = 0; h < 4; ++h) {
      const double mean = sum[h] / kDraws;
      const double var = sum_sq[h] / kDraws - mean * mean;
      REQUIRE(std::fabs(mean) <= 0.02);
      REQUIRE(var >= 0.97);
      REQUIRE(var <= 1.03);
    }
  }
}

TEST_CASE("make_positive_key") {
  const MlpModel m = init_model({{2, 4, 3, 2}, Activation::relu, 2, 61});
  const std::vector<double> centroid_input = {0.4, -0.2};
  const std::vector<double> centroid_feature = {0.1, 0.2, 0.3};

  SECTION("zero variance in input space encodes the centroid exactly") {
    Rng rng(2);
    const PositiveKey key = make_positive_key(m, centroid_input, {}, {0, 0, 0},
                                              CentroidSpace::input, rng);
    DenseMatrix mu(1, 2);
    mu.values = centroid_input;
    const ForwardResult f = forward(m, mu);
    REQUIRE(key.augmented_features == f.features.values);
    REQUIRE(key.key_logits == f.logits.values);
    Rng rng2(99);
    const PositiveKey again = make_positive_key(m, centroid_input, {}, {0, 0, 0},
                                                CentroidSpace::input, rng2);
    REQUIRE(again.augmented_features == key.augmented_features);  // deterministic key
  }
  SECTION("key logits are recomputable from the augmented features") {
    Rng rng(3);
    const PositiveKey key = make_positive_key(m, centroid_input, {}, {0.5, 1.0, 0.2},
                                              CentroidSpace::input, rng);
    DenseMatrix hhat(1, 3);
    hhat.values = key.augmented_features;
    REQUIRE(key.key_logits == forward_head(m, hhat).logits.values);
  }
  SECTION("feature space adds the noise to the feature centroid") {
    Rng rng(4);
    const PositiveKey key = make_positive_key(m, {}, centroid_feature, {0, 0, 0},
                                              CentroidSpace::feature, rng);
    REQUIRE(key.augmented_features == centroid_feature);
    DenseMatrix hhat(1, 3);
    hhat.values = centroid_feature;
    REQUIRE(key.key_logits == forward_head(m, hhat).logits.values);
  }
  SECTION("dimension mismatches are rejected") {
    Rng rng(5);
    REQUIRE_THROWS_AS(make_positive_key(m, centroid_input, {}, {0, 0}, CentroidSpace::input, rng),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(
        make_positive_key(m, {0.4}, {}, {0, 0, 0}, CentroidSpace::input, rng),
        std::invalid_argument);
    REQUIRE_THROWS_AS(
        make_positive_key(m, {}, {0.1}, {0, 0, 0}, CentroidSpace::feature, rng),
        std::invalid_argument);
  }
}

TEST_CASE("batch_positive_keys") {
  const LabeledDataset ds = toy_points();
  const MlpModel model_t = init_model({{2, 3, 2}, Activation::tanh, 1, 51});
  const MlpModel model_s = init_model({{2, 3, 2}, Activation::tanh, 1, 52});
  const FeatureBank bank_t = build_bank(model_t, ds, false);
  const FeatureBank bank_s = build_bank(model_s, ds, true);
  AdaptConfig cfg;
  cfg.k_t = 3;
  cfg.k_s = 2;

  SECTION("a batch of one reduces to make_positive_key") {
    const Rng rng(7);
    const auto keys = batch_positive_keys(model_t, model_s, bank_t, bank_s, ds, {3}, cfg, rng);
    const Neighborhood nb_t = find_neighborhood(bank_t, ds, 3, cfg.k_t);
    const Neighborhood nb_s = find_neighborhood(bank_s, ds, 3, cfg.k_s);
    Rng slot_rng = rng.split(0);
    const PositiveKey single = make_positive_key(model_t, nb_t.centroid_input,
                                                 nb_t.centroid_feature, nb_s.variance,
                                                 cfg.centroid_space, slot_rng);
    REQUIRE(keys.size() == 1);
    REQUIRE(keys[0].augmented_features == single.augmented_features);
    REQUIRE(keys[0].key_logits == single.key_logits);
    REQUIRE(keys[0].noise == single.noise);
  }
  SECTION("identical queries in different slots share centroids but not noise") {
    const Rng rng(8);
    const auto keys = batch_positive_keys(model_t, model_s, bank_t, bank_s, ds, {5, 5}, cfg, rng);
    std::vector<double> base0 = keys[0].augmented_features;
    std::vector<double> base1 = keys[1].augmented_features;
    for (std::size_t h = 0; h < base0.size(); ++h) {
      base0[h] -= keys[0].noise[h];
      base1[h] -= keys[1].noise[h];
    }
    REQUIRE(base0 == base1);
    REQUIRE(keys[0].noise != keys[1].noise);
  }
  SECTION("bank roles are enforced") {
    const Rng rng(9);
    REQUIRE_THROWS_AS(batch_positive_keys(model_t, model_s, bank_s, bank_s, ds, {0}, cfg, rng),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(batch_positive_keys(model_t, model_s, bank_t, bank_t, ds, {0}, cfg, rng),
                      std::invalid_argument);
  }
  SECTION("variances are source-informed only") {
    const Rng rng(10);
    const MlpModel other_t = init_model({{2, 3, 2}, Activation::tanh, 1, 99});
    const FeatureBank other_bank_t = build_bank(other_t, ds, false);
    const std::vector<std::size_t> queries = {0, 4, 9};
    const KeyBatch a = gather_key_batch(bank_t, bank_s, ds, queries, cfg, rng);
    const KeyBatch b = gather_key_batch(other_bank_t, bank_s, ds, queries, cfg, rng);
    REQUIRE(bitwise_equal(a.variances, b.variances));
    REQUIRE(bitwise_equal(a.noise, b.noise));
  }
  SECTION("full pipeline matches a scripted oracle on ten points") {
    const Rng rng(11);
    std::vector<std::size_t> queries(10);
    std::iota(queries.begin(), queries.end(), 0);
    const auto keys =
        batch_positive_keys(model_t, model_s, bank_t, bank_s, ds, queries, cfg, rng);
    const PipelineOracle oracle{model_t, model_s, ds};
    for (std::size_t slot = 0; slot < queries.size(); ++slot) {
      const PositiveKey expected = oracle.key_for(queries[slot], cfg, rng, slot);
      REQUIRE(keys[slot].noise.size() == expected.noise.size());
      for (std::size_t h = 0; h < expected.noise.size(); ++h) {
        REQUIRE(keys[slot].noise[h] == Catch::Approx(expected.noise[h]).margin(1e-9));
        REQUIRE(keys[slot].augmented_features[h] ==
                Catch::Approx(expected.augmented_features[h]).margin(1e-9));
      }
      for (std::size_t c = 0; c < expected.key_logits.size(); ++c) {
        REQUIRE(keys[slot].key_logits[c] ==
                Catch::Approx(expected.key_logits[c]).margin(1e-9));
      }
    }
  }
}

TEST_CASE("single-member source neighborhood gives deterministic keys") {
  const LabeledDataset ds = toy_points();
  const MlpModel model_t = init_model({{2, 3, 2}, Activation::tanh, 1, 51});
  const MlpModel model_s = init_model({{2, 3, 2}, Activation::tanh, 1, 52});
  const FeatureBank bank_t = build_bank(model_t, ds, false);
  const FeatureBank bank_s = build_bank(model_s, ds, true);
  AdaptConfig cfg;
  cfg.k_t = 3;
  cfg.k_s = 1;  // one member -> zero variance -> zero noise
  const auto a = batch_positive_keys(model_t, model_s, bank_t, bank_s, ds, {2, 6}, cfg, Rng(1));
  const auto b = batch_positive_keys(model_t, model_s, bank_t, bank_s, ds, {2, 6}, cfg, Rng(2));
  for (std::size_t slot = 0; slot < 2; ++slot) {
    REQUIRE(a[slot].noise == std::vector<double>(3, 0.0));
    REQUIRE(a[slot].augmented_features == b[slot].augmented_features);
    REQUIRE(a[slot].key_logits == b[slot].key_logits);
  }
}
