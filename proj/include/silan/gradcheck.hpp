#pragma once

#include <algorithm>
#include <functional>

#include "silan/contrastive.hpp"
#include "silan/nn.hpp"

namespace silan {

enum class GradCheckLoss { cross_entropy, infonce, infonce_normalized };

namespace detail {

// Relative error with a floor so that near-zero gradient pairs do not blow up
// on finite-difference noise.
inline double relative_error(double a, double b, double floor_value) {
  const double denom = std::max({std::fabs(a), std::fabs(b), floor_value});
  return std::fabs(a - b) / denom;
}

}  // namespace detail

// Central-difference check of the analytic gradients over every parameter of
// a small seeded model. Returns the worst relative error observed.
inline double grad_check(const MlpSpec& spec, GradCheckLoss loss_kind, double eps,
                         std::uint64_t seed) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw std::invalid_argument("grad_check: eps must be in (0, 1e-2]");
  }
  MlpSpec s = spec;
  s.seed = seed;
  MlpModel model = init_model(s);
  Rng data_rng(Rng::mix(seed, 0x6461746121ULL));

  std::function<double(const MlpModel&)> loss_of;
  std::function<ParamGrads(const MlpModel&)> grads_of;

  if (loss_kind == GradCheckLoss::cross_entropy) {
    const std::size_t n = 6;
    DenseMatrix x(n, s.input_dim());
    for (double& v : x.values) v = data_rng.normal();
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(data_rng.next_u64() % s.logit_dim());
    loss_of = [x, labels](const MlpModel& m) {
      return cross_entropy(forward(m, x).logits, labels).loss;
    };
    grads_of = [x, labels](const MlpModel& m) {
      ForwardResult f = forward(m, x);
      return backprop_from_logits(m, f.cache, cross_entropy(f.logits, labels).dlogits);
    };
  } else {
    // The full key path: queries straight through the network, keys through
    // the extractor with a fixed latent offset, gradients through both.
    const bool normalized = loss_kind == GradCheckLoss::infonce_normalized;
    const std::size_t mb = 4;
    const double tau = 0.11;
    DenseMatrix x(mb, s.input_dim());
    DenseMatrix centroids(mb, s.input_dim());
    DenseMatrix xi(mb, s.feature_dim());
    for (double& v : x.values) v = data_rng.normal();
    for (double& v : centroids.values) v = data_rng.normal();
    for (double& v : xi.values) v = 0.5 * data_rng.normal();
    const auto nce = [normalized](const ContrastiveBatch& b) {
      return normalized ? infonce_loss_normalized(b) : infonce_loss(b);
    };
    loss_of = [x, centroids, xi, tau, nce](const MlpModel& m) {
      return nce({forward(m, x).logits, forward(m, centroids, xi).logits, tau}).loss;
    };
    grads_of = [x, centroids, xi, tau, nce](const MlpModel& m) {
      ForwardResult fq = forward(m, x);
      ForwardResult fk = forward(m, centroids, xi);
      InfoNceResult r = nce({fq.logits, fk.logits, tau});
      ParamGrads g = backprop_from_logits(m, fq.cache, r.dquery);
      add_grads(g, backprop_from_logits(m, fk.cache, r.dkeys));
      return g;
    };
  }

  const ParamGrads analytic = grads_of(model);
  double worst = 0.0;
  const auto probe = [&](double& param, double analytic_grad) {
    const double saved = param;
    param = saved + eps;
    const double lp = loss_of(model);
    param = saved - eps;
    const double lm = loss_of(model);
    param = saved;
    const double fd = (lp - lm) / (2.0 * eps);
    worst = std::max(worst, detail::relative_error(analytic_grad, fd, 1e-4));
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].values.size(); ++i) {
      probe(model.weights[l].values[i], analytic.weights[l].values[i]);
    }
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
      probe(model.biases[l][i], analytic.biases[l][i]);
    }
  }
  return worst;
}

}  // namespace silan
