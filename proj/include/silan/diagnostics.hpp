#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "silan/adapt.hpp"
#include "silan/data.hpp"
#include "silan/nn.hpp"

namespace silan {

// Gap factor between latent clusters implied by the optimal Gaussian aperture:
// twice the radius-to-sigma ratio that solve_beam_condition finds.
inline constexpr double kClusterGapFactor = 3.1704;

struct BeamParams {
  double sigma = 1.0;      // std of the Gaussian profile
  double sigma_ext = 0.0;  // std of the extraneous noise
  double radius = 0.0;     // aperture radius

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("beam params: sigma must be > 0");
    if (!(sigma_ext >= 0.0)) throw std::invalid_argument("beam params: sigma_ext must be >= 0");
    if (!(radius >= 0.0)) throw std::invalid_argument("beam params: radius must be >= 0");
  }
};

// Transformation-to-noise ratio of a Gaussian profile integrated over an
// aperture of the given radius, with extraneous noise growing with the
// aperture area:  (1 - e^{-R^2/2s^2}) / sqrt(1 - e^{-R^2/2s^2} + pi R^2 s_ext^2)
inline double tn_ratio(const BeamParams& p) {
  p.validate();
  if (p.radius == 0.0) return 0.0;
  const double u = p.radius * p.radius / (2.0 * p.sigma * p.sigma);
  const double enclosed = -std::expm1(-u);  // 1 - e^{-u}
  const double area_noise = std::numbers::pi * p.radius * p.radius * p.sigma_ext * p.sigma_ext;
  return enclosed / std::sqrt(enclosed + area_noise);
}

namespace detail {

// Golden-section search for the maximizer of a unimodal f on [lo, hi].
inline double golden_section_maximize(const std::function<double(double)>& f, double lo,
                                      double hi, double tol) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          double tol) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) {
    throw std::invalid_argument("bisect_root: endpoints do not bracket a root");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Singular values by one-sided Jacobi: rotate column pairs until orthogonal,
// the singular values are then the column norms. Meant for tiny matrices.
inline std::vector<double> singular_values(const DenseMatrix& mat) {
  DenseMatrix a = mat.rows >= mat.cols ? mat : transpose(mat);
  const std::size_t m = a.rows;
  const std::size_t n = a.cols;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          app += a(i, p) * a(i, p);
          aqq += a(i, q) * a(i, q);
          apq += a(i, p) * a(i, q);
        }
        if (std::fabs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double vp = a(i, p);
          const double vq = a(i, q);
          a(i, p) = c * vp - s * vq;
          a(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) norm2 += a(i, j) * a(i, j);
    sv[j] = std::sqrt(norm2);
  }
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

}  // namespace detail

// Numeric maximizer of tn_ratio over [0, r_max]. With sigma_ext = 0 the ratio
// keeps growing toward the search bound, so that case is rejected.
inline double optimal_radius(double sigma, double sigma_ext, double r_max) {
  if (!(sigma > 0.0)) throw std::invalid_argument("optimal_radius: sigma must be > 0");
  if (!(sigma_ext > 0.0)) {
    throw std::invalid_argument(
        "optimal_radius: sigma_ext must be > 0 (without extraneous noise the maximizer sits at "
        "the r_max boundary)");
  }
  if (!(r_max > 0.0)) throw std::invalid_argument("optimal_radius: r_max must be > 0");
  return detail::golden_section_maximize(
      [&](double r) { return tn_ratio({sigma, sigma_ext, r}); }, 0.0, r_max, 1e-8);
}

struct BeamSolution {
  double u_star = 0.0;            // root of e^u = 2u + 1, u = R^2 / (2 sigma^2)
  double radius_over_sigma = 0.0; // sqrt(2 u_star)
};

// Stationarity condition of the aperture objective in the noise-dominated
// regime, solved by bisection.
inline BeamSolution solve_beam_condition() {
  const double u = detail::bisect_root(
      [](double x) { return std::exp(x) - 2.0 * x - 1.0; }, 0.5, 3.0, 1e-10);
  return {u, std::sqrt(2.0 * u)};
}

struct Lemma2Report {
  double delta = 0.0;
  double r_delta = 0.0;             // fraction of samples within delta of another class
  double pos_mislabel_rate = 0.0;   // key argmax != its query's label
  double neg_collision_rate = 0.0;  // other-sample key argmax == query's label
};

// Overlap and key-labelling diagnostics on labeled data. key_logits row i is
// the logits of sample i's positive key; every other row acts as one of its
// negatives. Report only, never a training signal.
inline Lemma2Report lemma2_report(const MlpModel& model_t, const LabeledDataset& ds,
                                  const DenseMatrix& key_logits, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("lemma2_report: delta must be > 0");
  ds.validate();
  if (key_logits.rows != ds.size() || key_logits.cols != model_t.spec.logit_dim()) {
    throw std::invalid_argument("lemma2_report: key logits shape mismatch");
  }
  const std::size_t n = ds.size();
  const DenseMatrix logits = forward(model_t, ds.X).logits;

  std::size_t overlapping = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (ds.labels[j] == ds.labels[i]) continue;
      if (std::sqrt(l2_distance_sq(logits.row(i), logits.row(j))) <= delta) {
        ++overlapping;
        break;
      }
    }
  }
  std::size_t pos_mislabels = 0;
  std::size_t neg_collisions = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::size_t>(ds.labels[i]);
    if (argmax(key_logits.row(i)) != label) ++pos_mislabels;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && argmax(key_logits.row(j)) == label) ++neg_collisions;
    }
  }
  Lemma2Report r;
  r.delta = delta;
  r.r_delta = static_cast<double>(overlapping) / static_cast<double>(n);
  r.pos_mislabel_rate = static_cast<double>(pos_mislabels) / static_cast<double>(n);
  r.neg_collision_rate =
      n > 1 ? static_cast<double>(neg_collisions) / static_cast<double>(n * (n - 1)) : 0.0;
  return r;
}

struct Lemma4Report {
  double sigma = 0.0;
  double lipschitz_l = 0.0;  // 1 / smallest singular value of the final weight matrix
  double min_interclass_logit_gap = 0.0;
  double bound = 0.0;  // kClusterGapFactor * sigma / L
  bool satisfied = false;
};

// Logit-gap diagnostic for a single linear classifier head. Advisory: the
// perfect-separation premise behind the bound need not hold empirically.
inline Lemma4Report lemma4_report(const MlpModel& model_t, const LabeledDataset& ds,
                                  double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("lemma4_report: sigma must be >= 0");
  if (model_t.spec.feature_depth != model_t.spec.num_weight_layers() - 1) {
    throw std::invalid_argument("lemma4_report: classifier head must be a single linear layer");
  }
  ds.validate();
  const std::vector<double> sv = detail::singular_values(model_t.weights.back());
  const double smin = sv.back();
  if (smin < 1e-12) {
    throw std::runtime_error("lemma4_report: final weight matrix is numerically singular");
  }
  const DenseMatrix logits = forward(model_t, ds.X).logits;
  std::vector<std::size_t> preds(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) preds[i] = argmax(logits.row(i));

  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      if (preds[i] == preds[j]) continue;
      gap = std::min(gap, std::sqrt(l2_distance_sq(logits.row(i), logits.row(j))));
    }
  }
  Lemma4Report r;
  r.sigma = sigma;
  r.lipschitz_l = 1.0 / smin;
  r.min_interclass_logit_gap = gap;
  r.bound = kClusterGapFactor * sigma * smin;
  r.satisfied = gap >= r.bound;
  return r;
}

struct ErrorDecomposition {
  double cluster_misclassification = 0.0;
  double cluster_mislabel = 0.0;
};

// Class-mass-weighted misclassification per ground-truth group. Grouping by
// the true class makes the second term vanish identically; it is reported for
// completeness.
inline ErrorDecomposition error_decomposition(const MlpModel& model, const LabeledDataset& ds) {
  ds.validate();
  if (ds.size() == 0) return {};
  const DenseMatrix logits = forward(model, ds.X).logits;
  std::vector<std::size_t> total(static_cast<std::size_t>(ds.num_classes), 0);
  std::vector<std::size_t> wrong(static_cast<std::size_t>(ds.num_classes), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto z = static_cast<std::size_t>(ds.labels[i]);
    ++total[z];
    if (argmax(logits.row(i)) != z) ++wrong[z];
  }
  double first = 0.0;
  for (std::size_t z = 0; z < total.size(); ++z) {
    if (total[z] == 0) continue;
    const double mass = static_cast<double>(total[z]) / static_cast<double>(ds.size());
    first += mass * (static_cast<double>(wrong[z]) / static_cast<double>(total[z]));
  }
  return {first, 0.0};
}

inline std::string report_text(const Lemma2Report& r) {
  return "delta: " + format_double(r.delta) + "\nr_delta: " + format_double(r.r_delta) +
         "\npos_mislabel_rate: " + format_double(r.pos_mislabel_rate) +
         "\nneg_collision_rate: " + format_double(r.neg_collision_rate) + "\n";
}

inline nlohmann::json report_json(const Lemma2Report& r) {
  return {{"delta", r.delta},
          {"r_delta", r.r_delta},
          {"pos_mislabel_rate", r.pos_mislabel_rate},
          {"neg_collision_rate", r.neg_collision_rate}};
}

inline std::string report_text(const Lemma4Report& r) {
  return "sigma: " + format_double(r.sigma) + "\nlipschitz_l: " + format_double(r.lipschitz_l) +
         "\nmin_interclass_logit_gap: " + format_double(r.min_interclass_logit_gap) +
         "\nbound: " + format_double(r.bound) +
         "\nsatisfied: " + (r.satisfied ? "true" : "false") + "\n";
}

inline nlohmann::json report_json(const Lemma4Report& r) {
  return {{"sigma", r.sigma},
          {"lipschitz_l", r.lipschitz_l},
          {"min_interclass_logit_gap", r.min_interclass_logit_gap},
          {"bound", r.bound},
          {"satisfied", r.satisfied}};
}

inline std::string report_text(const ErrorDecomposition& r) {
  return "cluster_misclassification: " + format_double(r.cluster_misclassification) +
         "\ncluster_mislabel: " + format_double(r.cluster_mislabel) + "\n";
}

inline nlohmann::json report_json(const ErrorDecomposition& r) {
  return {{"cluster_misclassification", r.cluster_misclassification},
          {"cluster_mislabel", r.cluster_mislabel}};
}

}  // namespace silan
