#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "silan/data.hpp"
#include "silan/nn.hpp"

namespace silan {

// Latent feature row per sample under one extractor snapshot. Rows are
// immutable after construction; a refresh builds a new bank.
struct FeatureBank {
  DenseMatrix features;        // M x H
  bool source_frozen = false;  // true when built from the fixed source extractor

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

inline FeatureBank build_bank(const MlpModel& model, const LabeledDataset& ds,
                              bool source_frozen) {
  ForwardResult r = forward(model, ds.X);
  return {std::move(r.features), source_frozen};
}

inline double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_sim: dimension mismatch");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine_sim: zero-norm vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

// Indices of the k bank rows most cosine-similar to the query, sorted by
// descending similarity, ties broken by lower index. Passing query_index
// excludes that row from its own neighborhood. Exhaustive scan; banks are a
// few thousand rows at most.
inline std::vector<std::size_t> knn(const FeatureBank& bank, std::span<const double> query,
                                    std::optional<std::size_t> query_index, std::size_t k) {
  const std::size_t m = bank.size();
  if (query.size() != bank.dim()) throw std::invalid_argument("knn: query dimension mismatch");
  if (query_index && *query_index >= m) {
    throw std::invalid_argument("knn: query index out of range");
  }
  const std::size_t available = query_index ? m - 1 : m;
  if (k < 1 || k > available) {
    throw std::invalid_argument("knn: k must be in [1, " + std::to_string(available) + "]");
  }
  const double query_norm = l2_norm(query);
  if (query_norm == 0.0) throw std::invalid_argument("knn: zero-norm query");

  std::vector<double> sims(m, 0.0);
  std::vector<std::size_t> idx;
  idx.reserve(available);
  for (std::size_t i = 0; i < m; ++i) {
    if (query_index && *query_index == i) continue;
    const auto row = bank.features.row(i);
    const double row_norm = l2_norm(row);
    if (row_norm == 0.0) {
      throw std::invalid_argument("knn: zero-norm bank row " + std::to_string(i));
    }
    sims[i] = dot(query, row) / (query_norm * row_norm);
    idx.push_back(i);
  }
  const auto better = [&sims](std::size_t a, std::size_t b) {
    return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

struct NeighborhoodStats {
  std::vector<double> centroid_input;    // mean of the members' raw inputs
  std::vector<double> centroid_feature;  // mean of the members' bank rows
  std::vector<double> variance;          // per-dimension population variance (1/K)
};

inline NeighborhoodStats neighborhood_stats(const FeatureBank& bank, const LabeledDataset& ds,
                                            const std::vector<std::size_t>& members) {
  if (members.empty()) throw std::invalid_argument("neighborhood_stats: empty member set");
  if (bank.size() != ds.size()) {
    throw std::invalid_argument("neighborhood_stats: bank/dataset size mismatch");
  }
  for (std::size_t i : members) {
    if (i >= bank.size()) throw std::invalid_argument("neighborhood_stats: member out of range");
  }
  const double inv_k = 1.0 / static_cast<double>(members.size());
  NeighborhoodStats st;
  st.centroid_input.assign(ds.dim(), 0.0);
  st.centroid_feature.assign(bank.dim(), 0.0);
  st.variance.assign(bank.dim(), 0.0);
  for (std::size_t i : members) {
    for (std::size_t j = 0; j < ds.dim(); ++j) st.centroid_input[j] += ds.X(i, j);
    for (std::size_t h = 0; h < bank.dim(); ++h) st.centroid_feature[h] += bank.features(i, h);
  }
  for (double& v : st.centroid_input) v *= inv_k;
  for (double& v : st.centroid_feature) v *= inv_k;
  for (std::size_t i : members) {
    for (std::size_t h = 0; h < bank.dim(); ++h) {
      const double d = bank.features(i, h) - st.centroid_feature[h];
      st.variance[h] += d * d;
    }
  }
  for (double& v : st.variance) v *= inv_k;
  return st;
}

struct Neighborhood {
  std::size_t query_index = 0;
  std::vector<std::size_t> member_indices;
  std::vector<double> centroid_input;
  std::vector<double> centroid_feature;
  std::vector<double> variance;
};

// kNN of a bank row around itself plus the member statistics in one call.
inline Neighborhood find_neighborhood(const FeatureBank& bank, const LabeledDataset& ds,
                                      std::size_t query_index, std::size_t k) {
  Neighborhood nb;
  nb.query_index = query_index;
  nb.member_indices = knn(bank, bank.features.row(query_index), query_index, k);
  NeighborhoodStats st = neighborhood_stats(bank, ds, nb.member_indices);
  nb.centroid_input = std::move(st.centroid_input);
  nb.centroid_feature = std::move(st.centroid_feature);
  nb.variance = std::move(st.variance);
  return nb;
}

}  // namespace silan
