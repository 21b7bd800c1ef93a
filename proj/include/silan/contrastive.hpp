#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "silan/matrix.hpp"

namespace silan {

struct ContrastiveBatch {
  DenseMatrix query_logits;  // m x Z
  DenseMatrix key_logits;    // m x Z, row i is the positive key of query i
  double tau = 0.11;

  void validate() const {
    if (!query_logits.same_shape(key_logits)) {
      throw std::invalid_argument("contrastive batch: query/key shapes differ");
    }
    if (query_logits.rows < 2) {
      throw std::invalid_argument(
          "contrastive batch: m must be >= 2 (negatives come from the batch)");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("contrastive batch: tau must be > 0");
  }
};

struct InfoNceResult {
  double loss = 0.0;
  DenseMatrix dquery;
  DenseMatrix dkeys;
};

// Logit-space InfoNCE. Key i is the positive of query i; every other key in
// the batch is a negative. The denominator runs over the other keys only --
// the positive pair is deliberately not part of it. Log-sum-exp is stabilized
// by per-row max subtraction.
inline InfoNceResult infonce_loss(const ContrastiveBatch& batch) {
  batch.validate();
  const DenseMatrix& q = batch.query_logits;
  const DenseMatrix& k = batch.key_logits;
  const std::size_t m = q.rows;
  const std::size_t z = q.cols;
  const double inv_tau = 1.0 / batch.tau;

  DenseMatrix s(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) s(i, j) = dot(q.row(i), k.row(j)) * inv_tau;
  }

  InfoNceResult r;
  r.dquery = DenseMatrix(m, z);
  r.dkeys = DenseMatrix(m, z);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) mx = std::max(mx, s(i, j));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) sum += std::exp(s(i, j) - mx);
    }
    const double lse = mx + std::log(sum);
    r.loss += lse - s(i, i);

    // dL/ds(i,j) = softmax weight for j != i, -1 for the positive
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double p = std::exp(s(i, j) - lse);
      for (std::size_t c = 0; c < z; ++c) {
        r.dquery(i, c) += p * k(j, c) * inv_tau;
        r.dkeys(j, c) += p * q(i, c) * inv_tau;
      }
    }
    for (std::size_t c = 0; c < z; ++c) {
      r.dquery(i, c) -= k(i, c) * inv_tau;
      r.dkeys(i, c) -= q(i, c) * inv_tau;
    }
  }
  return r;
}

// Same objective computed on unit-normalized logit rows (cosine similarity
// over tau), with the returned gradients chained back through the
// normalization so they apply to the raw logits. This is the training form:
// raw dot products of cross-entropy-scale logits explode the exponentials at
// small tau, while cosine keeps them in [-1/tau, 1/tau].
inline InfoNceResult infonce_loss_normalized(const ContrastiveBatch& batch) {
  batch.validate();
  const std::size_t m = batch.query_logits.rows;
  const std::size_t z = batch.query_logits.cols;
  ContrastiveBatch unit = batch;
  std::vector<double> query_norms(m);
  std::vector<double> key_norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    query_norms[i] = l2_norm(unit.query_logits.row(i));
    key_norms[i] = l2_norm(unit.key_logits.row(i));
    if (query_norms[i] == 0.0 || key_norms[i] == 0.0) {
      throw std::invalid_argument("infonce_loss_normalized: zero-norm logit row");
    }
    for (double& v : unit.query_logits.row(i)) v /= query_norms[i];
    for (double& v : unit.key_logits.row(i)) v /= key_norms[i];
  }
  InfoNceResult r = infonce_loss(unit);
  // d(x/|x|) pullback: g -> (g - (g.u) u) / |x|
  for (std::size_t i = 0; i < m; ++i) {
    const auto pull = [z](std::span<double> grad, std::span<const double> u, double norm) {
      const double along = dot(grad, u);
      for (std::size_t c = 0; c < z; ++c) grad[c] = (grad[c] - along * u[c]) / norm;
    };
    pull(r.dquery.row(i), unit.query_logits.row(i), query_norms[i]);
    pull(r.dkeys.row(i), unit.key_logits.row(i), key_norms[i]);
  }
  return r;
}

// Pairwise-distance lower bound on the loss above: per query, log(m-1) plus
// the positive-pair squared distance over 2*tau minus the mean negative-pair
// squared distance over 2*tau. The dot-product/distance identity behind it
// holds on the unit sphere only, so normalize=true rescales every row to unit
// length first (rows already unit-length pass through unchanged).
inline double prop1_lower_bound(const ContrastiveBatch& batch, bool normalize) {
  batch.validate();
  DenseMatrix q = batch.query_logits;
  DenseMatrix k = batch.key_logits;
  if (normalize) {
    for (DenseMatrix* mat : {&q, &k}) {
      for (std::size_t i = 0; i < mat->rows; ++i) {
        auto row = mat->row(i);
        const double norm = l2_norm(row);
        if (norm == 0.0) throw std::invalid_argument("prop1_lower_bound: zero-norm row");
        for (double& v : row) v /= norm;
      }
    }
  }
  const std::size_t m = q.rows;
  const double inv_2tau = 1.0 / (2.0 * batch.tau);
  double bound = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    bound += std::log(static_cast<double>(m - 1));
    bound += l2_distance_sq(q.row(i), k.row(i)) * inv_2tau;
    double neg = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) neg += l2_distance_sq(q.row(i), k.row(j));
    }
    bound -= neg * inv_2tau / static_cast<double>(m - 1);
  }
  return bound;
}

}  // namespace silan
