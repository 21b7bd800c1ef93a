#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "silan/augment.hpp"
#include "silan/contrastive.hpp"
#include "silan/diagnostics.hpp"
#include "silan/gradcheck.hpp"
#include "silan/neighborhood.hpp"

namespace silan {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Analytic gradients vs central differences on small seeded models, for both
// supported losses and both activations.
inline std::vector<CheckResult> verify_gradcheck() {
  std::vector<CheckResult> out;
  const auto run = [&out](const std::string& name, MlpSpec spec, GradCheckLoss kind,
                          std::uint64_t seed) {
    const double err = grad_check(spec, kind, 1e-5, seed);
    out.push_back({name, err <= 1e-4, "max_rel_err=" + format_double(err)});
  };
  run("gradcheck cross_entropy [2,4,2] relu", {{2, 4, 2}, Activation::relu, 1, 0},
      GradCheckLoss::cross_entropy, 11);
  run("gradcheck cross_entropy [3,8,5,4] tanh", {{3, 8, 5, 4}, Activation::tanh, 2, 0},
      GradCheckLoss::cross_entropy, 12);
  run("gradcheck infonce [2,4,4,2] relu", {{2, 4, 4, 2}, Activation::relu, 2, 0},
      GradCheckLoss::infonce, 13);
  run("gradcheck infonce [2,6,4,3] tanh", {{2, 6, 4, 3}, Activation::tanh, 1, 0},
      GradCheckLoss::infonce, 14);
  run("gradcheck normalized infonce [2,4,4,2] relu", {{2, 4, 4, 2}, Activation::relu, 2, 0},
      GradCheckLoss::infonce_normalized, 15);
  run("gradcheck normalized infonce [2,6,4,3] tanh", {{2, 6, 4, 3}, Activation::tanh, 1, 0},
      GradCheckLoss::infonce_normalized, 16);
  return out;
}

// The distance-based lower bound never exceeds the contrastive loss on
// unit-normalized logits, checked over 1000 random batches spanning
// m in {2,4,8}, Z in {2,5}, tau in {0.11, 1.0}.
inline std::vector<CheckResult> verify_prop1() {
  constexpr std::size_t kTrials = 1000;
  constexpr std::size_t kBatch[] = {2, 4, 8};
  constexpr std::size_t kClasses[] = {2, 5};
  constexpr double kTaus[] = {0.11, 1.0};
  std::size_t held = 0;
  double worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < kTrials; ++t) {
    const std::size_t m = kBatch[t % 3];
    const std::size_t z = kClasses[(t / 3) % 2];
    const double tau = kTaus[(t / 6) % 2];
    Rng rng(Rng::mix(0x1aab5eedULL, t));
    ContrastiveBatch batch{DenseMatrix(m, z), DenseMatrix(m, z), tau};
    for (double& v : batch.query_logits.values) v = rng.normal();
    for (double& v : batch.key_logits.values) v = rng.normal();
    for (DenseMatrix* mat : {&batch.query_logits, &batch.key_logits}) {
      for (std::size_t i = 0; i < m; ++i) {
        auto row = mat->row(i);
        const double norm = l2_norm(row);
        for (double& v : row) v /= norm;
      }
    }
    const double loss = infonce_loss(batch).loss;
    const double bound = prop1_lower_bound(batch, true);
    worst_violation = std::max(worst_violation, bound - loss);
    if (bound <= loss + 1e-9) ++held;
  }
  return {{"prop1 lower bound <= loss on random unit-logit batches", held == kTrials,
           std::to_string(held) + "/" + std::to_string(kTrials) +
               " inequalities hold, max(bound-loss)=" + format_double(worst_violation)}};
}

// Stationarity constant and numeric maximization of the aperture objective.
inline std::vector<CheckResult> verify_beam() {
  std::vector<CheckResult> out;
  const BeamSolution sol = solve_beam_condition();
  const double residual = std::fabs(std::exp(sol.u_star) - 2.0 * sol.u_star - 1.0);
  out.push_back({"beam stationarity residual", residual <= 1e-9,
                 "residual=" + format_double(residual) + ", u_star=" + format_double(sol.u_star)});
  out.push_back({"beam radius_over_sigma", std::fabs(sol.radius_over_sigma - 1.5852) <= 5e-4,
                 "radius_over_sigma=" + format_double(sol.radius_over_sigma)});
  const double r1 = optimal_radius(1.0, 10.0, 10.0);
  out.push_back({"beam numeric maximizer (sigma=1, sigma_ext=10)",
                 std::fabs(r1 - 1.5852) / 1.5852 <= 0.01, "r_star=" + format_double(r1)});
  const double r2 = optimal_radius(2.0, 20.0, 20.0);
  out.push_back({"beam radius scales with sigma (sigma=2, sigma_ext=20)",
                 std::fabs(r2 - 3.1704) / 3.1704 <= 0.01, "r_star=" + format_double(r2)});
  return out;
}

// Cosine kNN against an independent exhaustive-scan oracle, exact index match.
inline std::vector<CheckResult> verify_knn() {
  constexpr std::size_t kPoints = 200;
  constexpr std::size_t kDim = 8;
  Rng rng(0xbeefULL);
  FeatureBank bank{DenseMatrix(kPoints, kDim), false};
  for (double& v : bank.features.values) v = rng.uniform(-1.0, 1.0);

  const auto oracle = [&bank](std::span<const double> query,
                              std::optional<std::size_t> self, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> scored;
    double qn = 0.0;
    for (double v : query) qn += v * v;
    qn = std::sqrt(qn);
    for (std::size_t i = 0; i < bank.size(); ++i) {
      if (self && *self == i) continue;
      const auto row = bank.features.row(i);
      double d = 0.0, rn = 0.0;
      for (std::size_t h = 0; h < row.size(); ++h) {
        d += query[h] * row[h];
        rn += row[h] * row[h];
      }
      scored.emplace_back(d / (qn * std::sqrt(rn)), i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<std::size_t> ids(k);
    for (std::size_t i = 0; i < k; ++i) ids[i] = scored[i].second;
    return ids;
  };

  std::vector<CheckResult> out;
  for (const std::size_t k : {1, 3, 5}) {
    std::size_t mismatches = 0;
    for (std::size_t q = 0; q < kPoints; ++q) {
      if (knn(bank, bank.features.row(q), q, k) != oracle(bank.features.row(q), q, k)) {
        ++mismatches;
      }
    }
    std::vector<double> external(kDim);
    for (double& v : external) v = rng.uniform(-1.0, 1.0);
    if (knn(bank, external, std::nullopt, k) != oracle(external, std::nullopt, k)) ++mismatches;
    out.push_back({"knn matches exhaustive oracle (K=" + std::to_string(k) + ")", mismatches == 0,
                   std::to_string(mismatches) + " mismatches over " + std::to_string(kPoints + 1) +
                       " queries"});
  }
  return out;
}

// Monte-Carlo statistics of the augmented keys for one fixed query, plus the
// zero-variance degeneracy.
inline std::vector<CheckResult> verify_silan_stats() {
  const MlpSpec spec{{2, 6, 6, 2}, Activation::relu, 2, 21};
  const MlpModel model = init_model(spec);
  const std::vector<double> centroid = {0.3, -0.4};
  const std::vector<double> variance = {1.7, 0.9, 0.0, 1.2, 0.6, 1.4};
  const std::size_t h_dim = spec.feature_dim();

  DenseMatrix mu(1, 2);
  mu.values.assign(centroid.begin(), centroid.end());
  const std::vector<double> encoded = forward(model, mu).features.values;

  constexpr std::size_t kDraws = 100000;
  const Rng base(0x5117a1ULL);
  std::vector<double> sum(h_dim, 0.0);
  std::vector<double> sum_sq(h_dim, 0.0);
  for (std::size_t t = 0; t < kDraws; ++t) {
    Rng draw_rng = base.split(t);
    const PositiveKey key =
        make_positive_key(model, centroid, {}, variance, CentroidSpace::input, draw_rng);
    for (std::size_t h = 0; h < h_dim; ++h) {
      sum[h] += key.augmented_features[h];
      sum_sq[h] += key.augmented_features[h] * key.augmented_features[h];
    }
  }
  double worst_mean_err = 0.0;
  double worst_var_rel = 0.0;
  for (std::size_t h = 0; h < h_dim; ++h) {
    const double mean = sum[h] / kDraws;
    const double var = sum_sq[h] / kDraws - mean * mean;
    worst_mean_err = std::max(worst_mean_err, std::fabs(mean - encoded[h]));
    if (variance[h] > 1e-6) {
      worst_var_rel = std::max(worst_var_rel, std::fabs(var - variance[h]) / variance[h]);
    }
  }

  std::vector<CheckResult> out;
  out.push_back({"silan key mean matches encoded centroid", worst_mean_err <= 0.02,
                 "max_abs_err=" + format_double(worst_mean_err)});
  out.push_back({"silan key variance matches source-informed variance", worst_var_rel <= 0.05,
                 "max_rel_err=" + format_double(worst_var_rel)});

  const std::vector<double> zero_variance(h_dim, 0.0);
  Rng first_rng = base.split(0);
  const PositiveKey first =
      make_positive_key(model, centroid, {}, zero_variance, CentroidSpace::input, first_rng);
  bool constant = true;
  for (std::size_t t = 1; t < 10; ++t) {
    Rng draw_rng = base.split(t);
    const PositiveKey key =
        make_positive_key(model, centroid, {}, zero_variance, CentroidSpace::input, draw_rng);
    constant = constant &&
               bitwise_equal(std::span<const double>(key.augmented_features),
                             std::span<const double>(first.augmented_features)) &&
               bitwise_equal(std::span<const double>(key.key_logits),
                             std::span<const double>(first.key_logits));
  }
  out.push_back({"silan zero variance gives bitwise-constant keys", constant,
                 constant ? "10/10 draws identical" : "draws differ"});
  return out;
}

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"gradcheck", "prop1", "beam", "knn",
                                                 "silan-stats"};
  return names;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& name) {
  if (name == "gradcheck") return verify_gradcheck();
  if (name == "prop1") return verify_prop1();
  if (name == "beam") return verify_beam();
  if (name == "knn") return verify_knn();
  if (name == "silan-stats") return verify_silan_stats();
  throw std::invalid_argument("unknown verify suite '" + name + "'");
}

inline bool report_checks(const std::vector<CheckResult>& checks, std::ostream& os) {
  bool all = true;
  for (const CheckResult& c : checks) {
    os << (c.passed ? "PASS" : "FAIL") << "  " << c.name;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
    all = all && c.passed;
  }
  return all;
}

}  // namespace silan
