#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "silan/matrix.hpp"
#include "silan/rng.hpp"

namespace silan {

enum class Activation { relu, tanh };

inline const char* to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + s + "' (expected relu or tanh)");
}

// Network topology. layer_widths runs input -> hidden ... -> logits. The
// extractor/classifier split sits after weight layer `feature_depth`: the
// extractor is layers [1, feature_depth], the classifier head is the rest.
struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::relu;
  std::size_t feature_depth = 0;
  std::uint64_t seed = 0;

  std::size_t num_weight_layers() const {
    return layer_widths.empty() ? 0 : layer_widths.size() - 1;
  }
  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t logit_dim() const { return layer_widths.back(); }
  std::size_t feature_dim() const { return layer_widths[feature_depth]; }

  void validate() const {
    if (layer_widths.size() < 3) {
      throw std::invalid_argument("mlp spec: needs input, at least one hidden, and logit widths");
    }
    for (std::size_t w : layer_widths) {
      if (w == 0) throw std::invalid_argument("mlp spec: layer width 0");
    }
    if (logit_dim() < 2) throw std::invalid_argument("mlp spec: logit width must be >= 2");
    if (feature_depth < 1 || feature_depth >= num_weight_layers()) {
      throw std::invalid_argument("mlp spec: feature_depth out of range [1, weight layers)");
    }
  }
};

struct MlpModel {
  MlpSpec spec;
  std::vector<DenseMatrix> weights;         // [l]: widths[l] x widths[l+1]
  std::vector<std::vector<double>> biases;  // [l]: widths[l+1]

  void validate() const {
    spec.validate();
    const std::size_t nl = spec.num_weight_layers();
    if (weights.size() != nl || biases.size() != nl) {
      throw std::invalid_argument("mlp model: layer count does not match spec");
    }
    for (std::size_t l = 0; l < nl; ++l) {
      if (weights[l].rows != spec.layer_widths[l] || weights[l].cols != spec.layer_widths[l + 1] ||
          biases[l].size() != spec.layer_widths[l + 1]) {
        throw std::invalid_argument("mlp model: parameter shapes do not chain with spec");
      }
      if (!all_finite(weights[l]) || !all_finite(std::span<const double>(biases[l]))) {
        throw std::invalid_argument("mlp model: non-finite parameter");
      }
    }
  }
};

// Same shape as the model parameters.
struct ParamGrads {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
};

inline ParamGrads zero_grads_like(const MlpModel& m) {
  ParamGrads g;
  g.weights.reserve(m.weights.size());
  g.biases.reserve(m.biases.size());
  for (const DenseMatrix& w : m.weights) g.weights.emplace_back(w.rows, w.cols);
  for (const std::vector<double>& b : m.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

inline void add_grads(ParamGrads& into, const ParamGrads& g) {
  if (into.weights.size() != g.weights.size()) {
    throw std::invalid_argument("add_grads: layer count mismatch");
  }
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    if (!into.weights[l].same_shape(g.weights[l]) || into.biases[l].size() != g.biases[l].size()) {
      throw std::invalid_argument("add_grads: shape mismatch");
    }
    for (std::size_t i = 0; i < g.weights[l].values.size(); ++i) {
      into.weights[l].values[i] += g.weights[l].values[i];
    }
    for (std::size_t i = 0; i < g.biases[l].size(); ++i) into.biases[l][i] += g.biases[l][i];
  }
}

inline bool params_equal(const MlpModel& a, const MlpModel& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (!bitwise_equal(a.weights[l], b.weights[l])) return false;
    if (!bitwise_equal(std::span<const double>(a.biases[l]),
                       std::span<const double>(b.biases[l]))) {
      return false;
    }
  }
  return true;
}

// Seeded uniform init scaled by 1/sqrt(fan_in); biases start at zero.
inline MlpModel init_model(const MlpSpec& spec) {
  spec.validate();
  MlpModel m;
  m.spec = spec;
  Rng rng(spec.seed);
  for (std::size_t l = 0; l < spec.num_weight_layers(); ++l) {
    const std::size_t fan_in = spec.layer_widths[l];
    const std::size_t fan_out = spec.layer_widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.values) v = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

inline void apply_activation(DenseMatrix& m, Activation act) {
  if (act == Activation::relu) {
    for (double& v : m.values) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : m.values) v = std::tanh(v);
  }
}

inline DenseMatrix linear_layer(const DenseMatrix& x, const DenseMatrix& w,
                                const std::vector<double>& b) {
  DenseMatrix z = matmul(x, w);
  for (std::size_t i = 0; i < z.rows; ++i) {
    double* zrow = z.values.data() + i * z.cols;
    for (std::size_t j = 0; j < z.cols; ++j) zrow[j] += b[j];
  }
  return z;
}

struct ForwardCache {
  std::vector<DenseMatrix> activations;  // [0] = input, [l] = output of weight layer l
  DenseMatrix feature_offset;            // optional additive term at the split point
};

struct ForwardResult {
  DenseMatrix features;  // activations at the split (offset included when one was given)
  DenseMatrix logits;    // final linear output, no softmax
  ForwardCache cache;
};

// Full forward pass. When `feature_offset` is non-empty it is added to the
// split-point activations before the classifier head runs, which is how
// latent-augmented keys are pushed through the network.
inline ForwardResult forward(const MlpModel& model, const DenseMatrix& x,
                             const DenseMatrix& feature_offset = {}) {
  const MlpSpec& spec = model.spec;
  if (x.cols != spec.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols) +
                                " columns, model expects " + std::to_string(spec.input_dim()));
  }
  const bool with_offset = !feature_offset.empty();
  if (with_offset &&
      (feature_offset.rows != x.rows || feature_offset.cols != spec.feature_dim())) {
    throw std::invalid_argument("forward: feature offset shape mismatch");
  }
  ForwardCache cache;
  if (with_offset) cache.feature_offset = feature_offset;
  const std::size_t nl = spec.num_weight_layers();
  cache.activations.reserve(nl + 1);
  cache.activations.push_back(x);
  for (std::size_t l = 0; l < nl; ++l) {
    DenseMatrix a = linear_layer(cache.activations.back(), model.weights[l], model.biases[l]);
    if (l + 1 < nl) apply_activation(a, spec.activation);
    if (l + 1 == spec.feature_depth && with_offset) {
      for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += feature_offset.values[i];
    }
    cache.activations.push_back(std::move(a));
  }
  ForwardResult r;
  r.features = cache.activations[spec.feature_depth];
  r.logits = cache.activations.back();
  r.cache = std::move(cache);
  return r;
}

// Exact reverse-mode gradients of any scalar loss whose logit gradient is
// `dlogits`, through every layer of the cached forward pass.
inline ParamGrads backprop_from_logits(const MlpModel& model, const ForwardCache& cache,
                                       const DenseMatrix& dlogits) {
  const MlpSpec& spec = model.spec;
  const std::size_t nl = spec.num_weight_layers();
  if (cache.activations.size() != nl + 1) {
    throw std::invalid_argument("backprop: cache depth does not match model");
  }
  for (std::size_t l = 0; l <= nl; ++l) {
    if (cache.activations[l].cols != spec.layer_widths[l]) {
      throw std::invalid_argument("backprop: cache widths do not match model");
    }
  }
  if (!dlogits.same_shape(cache.activations.back())) {
    throw std::invalid_argument("backprop: dlogits shape mismatch");
  }

  ParamGrads g = zero_grads_like(model);
  DenseMatrix d = dlogits;
  for (std::size_t l = nl; l-- > 0;) {
    const DenseMatrix& a_prev = cache.activations[l];
    g.weights[l] = matmul_at_b(a_prev, d);
    g.biases[l] = column_sums(d);
    if (l == 0) break;
    DenseMatrix dprev = matmul_a_bt(d, model.weights[l]);
    // Hidden activation derivative, reconstructed from the stored output; at
    // the split point the additive offset is removed first so the derivative
    // sees the genuine activation value.
    const bool at_split = (l == spec.feature_depth) && !cache.feature_offset.empty();
    for (std::size_t i = 0; i < dprev.values.size(); ++i) {
      double a = a_prev.values[i];
      if (at_split) a -= cache.feature_offset.values[i];
      if (spec.activation == Activation::relu) {
        if (!(a > 0.0)) dprev.values[i] = 0.0;
      } else {
        dprev.values[i] *= (1.0 - a * a);
      }
    }
    d = std::move(dprev);
  }
  return g;
}

struct HeadCache {
  std::vector<DenseMatrix> activations;  // [0] = head input .. logits
};

struct HeadForwardResult {
  DenseMatrix logits;
  HeadCache cache;
};

// Classifier head alone, fed with latent features directly.
inline HeadForwardResult forward_head(const MlpModel& model, const DenseMatrix& features) {
  const MlpSpec& spec = model.spec;
  if (features.cols != spec.feature_dim()) {
    throw std::invalid_argument("forward_head: feature width mismatch");
  }
  HeadCache cache;
  cache.activations.push_back(features);
  const std::size_t nl = spec.num_weight_layers();
  for (std::size_t l = spec.feature_depth; l < nl; ++l) {
    DenseMatrix a = linear_layer(cache.activations.back(), model.weights[l], model.biases[l]);
    if (l + 1 < nl) apply_activation(a, spec.activation);
    cache.activations.push_back(std::move(a));
  }
  return {cache.activations.back(), std::move(cache)};
}

struct HeadBackprop {
  ParamGrads grads;       // head layers filled in, extractor layers zero
  DenseMatrix dfeatures;  // gradient w.r.t. the head input
};

inline HeadBackprop backprop_head(const MlpModel& model, const HeadCache& cache,
                                  const DenseMatrix& dlogits) {
  const MlpSpec& spec = model.spec;
  const std::size_t nl = spec.num_weight_layers();
  const std::size_t fd = spec.feature_depth;
  if (cache.activations.size() != nl - fd + 1) {
    throw std::invalid_argument("backprop_head: cache depth does not match model");
  }
  if (!dlogits.same_shape(cache.activations.back())) {
    throw std::invalid_argument("backprop_head: dlogits shape mismatch");
  }
  ParamGrads g = zero_grads_like(model);
  DenseMatrix d = dlogits;
  for (std::size_t l = nl; l-- > fd;) {
    const DenseMatrix& a_prev = cache.activations[l - fd];
    g.weights[l] = matmul_at_b(a_prev, d);
    g.biases[l] = column_sums(d);
    DenseMatrix dprev = matmul_a_bt(d, model.weights[l]);
    if (l == fd) {
      // the head input is a free variable, no activation derivative here
      return {std::move(g), std::move(dprev)};
    }
    for (std::size_t i = 0; i < dprev.values.size(); ++i) {
      const double a = a_prev.values[i];
      if (spec.activation == Activation::relu) {
        if (!(a > 0.0)) dprev.values[i] = 0.0;
      } else {
        dprev.values[i] *= (1.0 - a * a);
      }
    }
    d = std::move(dprev);
  }
  throw std::logic_error("backprop_head: unreachable");
}

// Max-subtracted, so huge logits cannot overflow.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : p) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

struct CrossEntropyResult {
  double loss = 0.0;
  DenseMatrix dlogits;  // (softmax - one_hot) / n
};

inline CrossEntropyResult cross_entropy(const DenseMatrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows) {
    throw std::invalid_argument("cross_entropy: one label per logit row required");
  }
  const std::size_t n = logits.rows;
  const std::size_t z = logits.cols;
  CrossEntropyResult r;
  r.dlogits = DenseMatrix(n, z);
  if (n == 0) return r;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= z) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                  " out of range [0, " + std::to_string(z) + ")");
    }
    const auto row = logits.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    total += mx + std::log(sum) - row[static_cast<std::size_t>(label)];
    for (std::size_t j = 0; j < z; ++j) {
      const double p = std::exp(row[j] - mx) / sum;
      r.dlogits(i, j) = (p - (j == static_cast<std::size_t>(label) ? 1.0 : 0.0)) * inv_n;
    }
  }
  r.loss = total * inv_n;
  return r;
}

struct OptimizerState {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  ParamGrads velocity;
};

inline OptimizerState make_optimizer(const MlpModel& model, double learning_rate,
                                     double momentum) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("optimizer: learning_rate must be >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("optimizer: momentum must be in [0, 1)");
  }
  return {learning_rate, momentum, zero_grads_like(model)};
}

// v <- momentum * v + g;  w <- w - lr * v
inline void sgd_step(MlpModel& model, const ParamGrads& grads, OptimizerState& state) {
  if (grads.weights.size() != model.weights.size() ||
      state.velocity.weights.size() != model.weights.size()) {
    throw std::invalid_argument("sgd_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    if (!grads.weights[l].same_shape(model.weights[l]) ||
        grads.biases[l].size() != model.biases[l].size()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < model.weights[l].values.size(); ++i) {
      double& v = state.velocity.weights[l].values[i];
      v = state.momentum * v + grads.weights[l].values[i];
      model.weights[l].values[i] -= state.learning_rate * v;
    }
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
      double& v = state.velocity.biases[l][i];
      v = state.momentum * v + grads.biases[l][i];
      model.biases[l][i] -= state.learning_rate * v;
    }
  }
}

}  // namespace silan
