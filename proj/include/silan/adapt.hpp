#pragma once

#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "silan/augment.hpp"
#include "silan/contrastive.hpp"
#include "silan/format.hpp"

namespace silan {

struct EpochMetrics {
  std::size_t epoch = 0;           // 1-based
  double mean_loss = 0.0;          // contrastive loss per query
  double target_accuracy = 0.0;
  double mean_noise_std = 0.0;     // mean over queries of the mean per-dim noise std
  double pos_mislabel_rate = 0.0;  // key argmax disagreeing with its query's label
  double neg_collision_rate = 0.0; // another query's key argmax hitting this query's label
};

inline double evaluate(const MlpModel& model, const LabeledDataset& ds) {
  ds.validate();
  if (ds.dim() != model.spec.input_dim()) {
    throw std::invalid_argument("evaluate: data dimension mismatch");
  }
  if (ds.size() == 0) return 0.0;
  const DenseMatrix logits = forward(model, ds.X).logits;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (argmax(logits.row(i)) == static_cast<std::size_t>(ds.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

// Mini-batch SGD on softmax cross-entropy over the labeled source set.
inline MlpModel pretrain_source(const MlpSpec& spec, const LabeledDataset& ds,
                                std::size_t epochs, double learning_rate, double momentum,
                                std::uint64_t seed, std::size_t batch_size = 32) {
  ds.validate();
  if (ds.dim() != spec.input_dim()) {
    throw std::invalid_argument("pretrain_source: data dimension mismatch");
  }
  if (static_cast<std::size_t>(ds.num_classes) > spec.logit_dim()) {
    throw std::invalid_argument("pretrain_source: more classes than logits");
  }
  if (batch_size < 1) throw std::invalid_argument("pretrain_source: batch_size must be >= 1");

  MlpModel model = init_model(spec);
  OptimizerState opt = make_optimizer(model, learning_rate, momentum);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  const Rng shuffle_root(Rng::mix(seed, 0x70726521ULL));
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Rng perm_rng = shuffle_root.split(epoch);
    shuffle_indices(order, perm_rng);
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
      const std::size_t b = std::min(batch_size, ds.size() - start);
      DenseMatrix xb(b, ds.dim());
      std::vector<int> yb(b);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = order[start + r];
        std::copy(ds.X.row(src).begin(), ds.X.row(src).end(), xb.row(r).begin());
        yb[r] = ds.labels[src];
      }
      ForwardResult f = forward(model, xb);
      CrossEntropyResult ce = cross_entropy(f.logits, yb);
      ParamGrads g = backprop_from_logits(model, f.cache, ce.dlogits);
      sgd_step(model, g, opt);
    }
  }
  return model;
}

struct AdaptResult {
  MlpModel model;
  std::vector<EpochMetrics> metrics;
};

// Called at the start of each epoch with the fresh bank snapshots.
using EpochObserver = std::function<void(std::size_t epoch, const FeatureBank& source_bank,
                                         const FeatureBank& target_bank, const MlpModel& model)>;

// Label-free target adaptation. The target model starts as a copy of the
// source model; a frozen bank of source-extractor features is built once and
// the live bank is refreshed from the current extractor. Every step pulls each
// query's logits toward its own augmented key and pushes them from the other
// keys in the batch; gradients flow through both the query and key paths.
// Target labels feed the reported metrics only, never a gradient.
inline AdaptResult adapt_target(const MlpModel& model_s, const LabeledDataset& ds_t,
                                const AdaptConfig& cfg, const EpochObserver& observer = {}) {
  cfg.validate();
  ds_t.validate();
  model_s.validate();
  if (ds_t.dim() != model_s.spec.input_dim()) {
    throw std::invalid_argument("adapt_target: data dimension mismatch");
  }
  const std::size_t n = ds_t.size();
  if (cfg.epochs > 0) {
    if (n < 2) throw std::invalid_argument("adapt_target: target set needs at least 2 samples");
    if (cfg.k_t > n - 1 || cfg.k_s > n - 1) {
      throw std::invalid_argument("adapt_target: k exceeds available neighbors");
    }
  }

  AdaptResult out;
  out.model = model_s;
  const FeatureBank bank_s = build_bank(model_s, ds_t, true);
  OptimizerState opt = make_optimizer(out.model, cfg.learning_rate, cfg.momentum);
  const Rng shuffle_root(Rng::mix(cfg.seed, 0x73687566ULL));
  const Rng noise_root(Rng::mix(cfg.seed, 0x6e6f6973ULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    FeatureBank bank_t = build_bank(out.model, ds_t, false);
    if (observer) observer(epoch, bank_s, bank_t, out.model);
    Rng perm_rng = shuffle_root.split(epoch);
    shuffle_indices(order, perm_rng);
    const Rng epoch_noise = noise_root.split(epoch);

    double loss_sum = 0.0;
    double noise_std_sum = 0.0;
    std::size_t query_count = 0;
    std::size_t pos_mislabels = 0;
    std::size_t neg_collisions = 0;
    std::size_t pair_count = 0;

    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      if (b < 2) continue;  // the loss needs at least one negative
      if (cfg.bank_refresh == BankRefresh::per_step && batch_index > 0) {
        bank_t = build_bank(out.model, ds_t, false);
      }
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(start + b));
      const KeyBatch kb =
          gather_key_batch(bank_t, bank_s, ds_t, batch, cfg, epoch_noise.split(batch_index));

      DenseMatrix xb(b, ds_t.dim());
      for (std::size_t r = 0; r < b; ++r) {
        std::copy(ds_t.X.row(batch[r]).begin(), ds_t.X.row(batch[r]).end(), xb.row(r).begin());
      }
      ForwardResult fq = forward(out.model, xb);

      InfoNceResult nce;
      ParamGrads grads;
      DenseMatrix key_logits;
      if (cfg.centroid_space == CentroidSpace::input) {
        ForwardResult fk = forward(out.model, kb.centroid_inputs, kb.noise);
        nce = infonce_loss_normalized({fq.logits, fk.logits, cfg.tau});
        grads = backprop_from_logits(out.model, fq.cache, nce.dquery);
        add_grads(grads, backprop_from_logits(out.model, fk.cache, nce.dkeys));
        key_logits = std::move(fk.logits);
      } else {
        DenseMatrix hhat = kb.centroid_features;
        for (std::size_t i = 0; i < hhat.values.size(); ++i) hhat.values[i] += kb.noise.values[i];
        HeadForwardResult fk = forward_head(out.model, hhat);
        nce = infonce_loss_normalized({fq.logits, fk.logits, cfg.tau});
        grads = backprop_from_logits(out.model, fq.cache, nce.dquery);
        add_grads(grads, backprop_head(out.model, fk.cache, nce.dkeys).grads);
        key_logits = std::move(fk.logits);
      }
      sgd_step(out.model, grads, opt);

      // metrics; labels enter here only
      loss_sum += nce.loss;
      query_count += b;
      for (std::size_t r = 0; r < b; ++r) {
        double std_sum = 0.0;
        for (double v : kb.variances.row(r)) std_sum += std::sqrt(v);
        noise_std_sum += std_sum / static_cast<double>(kb.variances.cols);
        const int label = ds_t.labels[batch[r]];
        if (argmax(key_logits.row(r)) != static_cast<std::size_t>(label)) ++pos_mislabels;
        for (std::size_t j = 0; j < b; ++j) {
          if (j == r) continue;
          ++pair_count;
          if (argmax(key_logits.row(j)) == static_cast<std::size_t>(label)) ++neg_collisions;
        }
      }
    }

    EpochMetrics em;
    em.epoch = epoch + 1;
    em.mean_loss = loss_sum / static_cast<double>(query_count);
    em.target_accuracy = evaluate(out.model, ds_t);
    em.mean_noise_std = noise_std_sum / static_cast<double>(query_count);
    em.pos_mislabel_rate = static_cast<double>(pos_mislabels) / static_cast<double>(query_count);
    em.neg_collision_rate = static_cast<double>(neg_collisions) / static_cast<double>(pair_count);
    out.metrics.push_back(em);
  }
  return out;
}

inline std::string metrics_to_csv(const std::vector<EpochMetrics>& metrics) {
  std::string out =
      "epoch,mean_loss,target_accuracy,mean_noise_std,pos_mislabel_rate,neg_collision_rate\n";
  for (const EpochMetrics& m : metrics) {
    out += std::to_string(m.epoch) + "," + format_double(m.mean_loss) + "," +
           format_double(m.target_accuracy) + "," + format_double(m.mean_noise_std) + "," +
           format_double(m.pos_mislabel_rate) + "," + format_double(m.neg_collision_rate) + "\n";
  }
  return out;
}

inline void save_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << metrics_to_csv(metrics);
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace silan
