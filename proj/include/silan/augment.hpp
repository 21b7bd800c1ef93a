#pragma once

#include <vector>

#include "silan/config.hpp"
#include "silan/neighborhood.hpp"

namespace silan {

// One latent augmentation: the perturbed centroid features, the classifier
// head's logits for them, and the noise that was drawn.
struct PositiveKey {
  std::vector<double> augmented_features;
  std::vector<double> key_logits;
  std::vector<double> noise;
};

// One zero-mean Gaussian draw per dimension with the given variance. A zero
// variance dimension yields exactly zero.
inline std::vector<double> sample_noise(const std::vector<double>& variance, Rng& rng) {
  std::vector<double> xi(variance.size());
  for (std::size_t h = 0; h < variance.size(); ++h) {
    if (variance[h] < 0.0) throw std::invalid_argument("sample_noise: negative variance");
    xi[h] = std::sqrt(variance[h]) * rng.normal();
  }
  return xi;
}

// Positive key for one query. The noise scale comes from the source-informed
// neighborhood variance; the base point is either the encoded input-space
// centroid or the feature-space centroid, per `space`.
inline PositiveKey make_positive_key(const MlpModel& model_t,
                                     const std::vector<double>& centroid_input,
                                     const std::vector<double>& centroid_feature,
                                     const std::vector<double>& variance_s, CentroidSpace space,
                                     Rng& rng) {
  const std::size_t h_dim = model_t.spec.feature_dim();
  if (variance_s.size() != h_dim) {
    throw std::invalid_argument("make_positive_key: variance dimension mismatch");
  }
  PositiveKey key;
  key.noise = sample_noise(variance_s, rng);
  if (space == CentroidSpace::input) {
    if (centroid_input.size() != model_t.spec.input_dim()) {
      throw std::invalid_argument("make_positive_key: centroid input dimension mismatch");
    }
    DenseMatrix mu(1, centroid_input.size());
    mu.values.assign(centroid_input.begin(), centroid_input.end());
    DenseMatrix offset(1, h_dim);
    offset.values = key.noise;
    ForwardResult r = forward(model_t, mu, offset);
    key.augmented_features = std::move(r.features.values);
    key.key_logits = std::move(r.logits.values);
  } else {
    if (centroid_feature.size() != h_dim) {
      throw std::invalid_argument("make_positive_key: centroid feature dimension mismatch");
    }
    DenseMatrix hhat(1, h_dim);
    for (std::size_t h = 0; h < h_dim; ++h) hhat.values[h] = centroid_feature[h] + key.noise[h];
    HeadForwardResult r = forward_head(model_t, hhat);
    key.augmented_features = std::move(hhat.values);
    key.key_logits = std::move(r.logits.values);
  }
  return key;
}

// Per-query material gathered ahead of the key forward pass: centroids from
// the live target bank, variances from the frozen source bank, noise drawn
// from a per-slot child stream (rng.split(slot)).
struct KeyBatch {
  DenseMatrix centroid_inputs;    // m x d
  DenseMatrix centroid_features;  // m x H
  DenseMatrix variances;          // m x H
  DenseMatrix noise;              // m x H
};

inline KeyBatch gather_key_batch(const FeatureBank& bank_t, const FeatureBank& bank_s,
                                 const LabeledDataset& ds,
                                 const std::vector<std::size_t>& query_indices,
                                 const AdaptConfig& cfg, const Rng& rng) {
  if (!bank_s.source_frozen) {
    throw std::invalid_argument("gather_key_batch: source bank must be frozen");
  }
  if (bank_t.source_frozen) {
    throw std::invalid_argument("gather_key_batch: target bank must be live");
  }
  if (bank_t.size() != ds.size() || bank_s.size() != ds.size()) {
    throw std::invalid_argument("gather_key_batch: bank/dataset size mismatch");
  }
  if (bank_t.dim() != bank_s.dim()) {
    throw std::invalid_argument("gather_key_batch: bank feature widths differ");
  }
  const std::size_t m = query_indices.size();
  KeyBatch kb{DenseMatrix(m, ds.dim()), DenseMatrix(m, bank_t.dim()),
              DenseMatrix(m, bank_s.dim()), DenseMatrix(m, bank_s.dim())};
  for (std::size_t slot = 0; slot < m; ++slot) {
    const Neighborhood nb_t = find_neighborhood(bank_t, ds, query_indices[slot], cfg.k_t);
    const Neighborhood nb_s = find_neighborhood(bank_s, ds, query_indices[slot], cfg.k_s);
    std::copy(nb_t.centroid_input.begin(), nb_t.centroid_input.end(),
              kb.centroid_inputs.row(slot).begin());
    std::copy(nb_t.centroid_feature.begin(), nb_t.centroid_feature.end(),
              kb.centroid_features.row(slot).begin());
    std::copy(nb_s.variance.begin(), nb_s.variance.end(), kb.variances.row(slot).begin());
    Rng slot_rng = rng.split(slot);
    const std::vector<double> xi = sample_noise(nb_s.variance, slot_rng);
    std::copy(xi.begin(), xi.end(), kb.noise.row(slot).begin());
  }
  return kb;
}

// Keys for a whole mini-batch: target neighborhood per query from the live
// bank, source-informed variance per query from the frozen bank, one
// independent noise draw per slot.
inline std::vector<PositiveKey> batch_positive_keys(
    const MlpModel& model_t, const MlpModel& model_s, const FeatureBank& bank_t,
    const FeatureBank& bank_s, const LabeledDataset& ds,
    const std::vector<std::size_t>& query_indices, const AdaptConfig& cfg, const Rng& rng) {
  if (model_t.spec.feature_dim() != bank_t.dim()) {
    throw std::invalid_argument("batch_positive_keys: target bank does not match target model");
  }
  if (model_s.spec.feature_dim() != bank_s.dim()) {
    throw std::invalid_argument("batch_positive_keys: source bank does not match source model");
  }
  const KeyBatch kb = gather_key_batch(bank_t, bank_s, ds, query_indices, cfg, rng);
  const std::size_t m = query_indices.size();
  std::vector<PositiveKey> keys(m);
  DenseMatrix features;
  DenseMatrix logits;
  if (cfg.centroid_space == CentroidSpace::input) {
    ForwardResult r = forward(model_t, kb.centroid_inputs, kb.noise);
    features = std::move(r.features);
    logits = std::move(r.logits);
  } else {
    DenseMatrix hhat = kb.centroid_features;
    for (std::size_t i = 0; i < hhat.values.size(); ++i) hhat.values[i] += kb.noise.values[i];
    HeadForwardResult r = forward_head(model_t, hhat);
    features = std::move(hhat);
    logits = std::move(r.logits);
  }
  for (std::size_t slot = 0; slot < m; ++slot) {
    const auto f = features.row(slot);
    const auto l = logits.row(slot);
    const auto x = kb.noise.row(slot);
    keys[slot].augmented_features.assign(f.begin(), f.end());
    keys[slot].key_logits.assign(l.begin(), l.end());
    keys[slot].noise.assign(x.begin(), x.end());
  }
  return keys;
}

}  // namespace silan
