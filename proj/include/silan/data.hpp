#pragma once

#include <algorithm>
#include <fstream>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "silan/format.hpp"
#include "silan/matrix.hpp"
#include "silan/rng.hpp"

namespace silan {

struct LabeledDataset {
  DenseMatrix X;
  std::vector<int> labels;  // class ids in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return X.rows; }
  std::size_t dim() const { return X.cols; }

  void validate() const {
    if (labels.size() != X.rows) {
      throw std::invalid_argument("dataset: one label per row required");
    }
    if (num_classes < 1) throw std::invalid_argument("dataset: num_classes must be >= 1");
    for (int l : labels) {
      if (l < 0 || l >= num_classes) {
        throw std::invalid_argument("dataset: label " + std::to_string(l) + " out of range");
      }
    }
    if (!all_finite(X)) throw std::invalid_argument("dataset: non-finite coordinate");
  }
};

// Two interleaving half circles: class 0 on the upper unit arc centered at the
// origin, class 1 on the reflected arc centered at (1, 0.5). Arc positions are
// evenly spaced; isotropic Gaussian jitter is added per coordinate.
inline LabeledDataset gen_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_moons: n must be >= 2");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("gen_moons: noise_std must be >= 0");
  const std::size_t n_upper = (n + 1) / 2;
  const std::size_t n_lower = n / 2;
  LabeledDataset ds;
  ds.X = DenseMatrix(n, 2);
  ds.labels.assign(n, 0);
  ds.num_classes = 2;
  for (std::size_t i = 0; i < n_upper; ++i) {
    const double t = n_upper > 1 ? std::numbers::pi * static_cast<double>(i) / (n_upper - 1) : 0.0;
    ds.X(i, 0) = std::cos(t);
    ds.X(i, 1) = std::sin(t);
  }
  for (std::size_t j = 0; j < n_lower; ++j) {
    const double t = n_lower > 1 ? std::numbers::pi * static_cast<double>(j) / (n_lower - 1) : 0.0;
    const std::size_t row = n_upper + j;
    ds.X(row, 0) = 1.0 - std::cos(t);
    ds.X(row, 1) = 0.5 - std::sin(t);
    ds.labels[row] = 1;
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    ds.X(i, 0) += noise_std * rng.normal();
    ds.X(i, 1) += noise_std * rng.normal();
  }
  return ds;
}

inline LabeledDataset rotate_about_point(const LabeledDataset& ds, double cx, double cy,
                                         double degrees) {
  if (ds.dim() != 2) throw std::invalid_argument("rotate: 2-d data only");
  if (degrees == 0.0) return ds;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  LabeledDataset out = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double dx = ds.X(i, 0) - cx;
    const double dy = ds.X(i, 1) - cy;
    out.X(i, 0) = cx + c * dx - s * dy;
    out.X(i, 1) = cy + s * dx + c * dy;
  }
  return out;
}

inline LabeledDataset rotate_about_mean(const LabeledDataset& ds, double degrees) {
  if (ds.dim() != 2) throw std::invalid_argument("rotate: 2-d data only");
  if (ds.size() == 0) return ds;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    mx += ds.X(i, 0);
    my += ds.X(i, 1);
  }
  mx /= static_cast<double>(ds.size());
  my /= static_cast<double>(ds.size());
  return rotate_about_point(ds, mx, my, degrees);
}

// Source and target drawn with distinct seeds; the target is rotated about its
// own mean to create the shift.
inline std::pair<LabeledDataset, LabeledDataset> make_shift_pair(std::size_t n, double noise_std,
                                                                 double degrees,
                                                                 std::uint64_t seed_s,
                                                                 std::uint64_t seed_t) {
  if (seed_s == seed_t) {
    throw std::invalid_argument("make_shift_pair: source and target seeds must differ");
  }
  LabeledDataset source = gen_moons(n, noise_std, seed_s);
  LabeledDataset target = rotate_about_mean(gen_moons(n, noise_std, seed_t), degrees);
  return {std::move(source), std::move(target)};
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

// Header `x0,...,x{d-1},label`, floats in shortest round-trip form.
inline std::string dataset_to_csv(const LabeledDataset& ds) {
  ds.validate();
  std::string out;
  for (std::size_t j = 0; j < ds.dim(); ++j) out += "x" + std::to_string(j) + ",";
  out += "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) out += format_double(ds.X(i, j)) + ",";
    out += std::to_string(ds.labels[i]) + "\n";
  }
  return out;
}

inline void save_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << dataset_to_csv(ds);
  if (!f) throw std::runtime_error("write failed for " + path);
}

// expected_classes > 0 pins the class count and rejects labels outside it;
// 0 infers the count from the largest label seen.
inline LabeledDataset load_csv(const std::string& path, int expected_classes = 0) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = detail::split_fields(line);
  if (header.size() < 2 || header.back() != "label") {
    throw std::runtime_error(path + ": malformed header (expected x0,...,label)");
  }
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "x" + std::to_string(j)) {
      throw std::runtime_error(path + ": malformed header (expected x0,...,label)");
    }
  }

  std::vector<double> coords;
  std::vector<int> labels;
  int max_label = 0;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split_fields(line);
    if (fields.size() != d + 1) {
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double v = parse_double_strict(fields[j], path);
      if (!std::isfinite(v)) throw std::runtime_error(path + ": non-finite coordinate");
      coords.push_back(v);
    }
    const long label = parse_int_strict(fields[d], path);
    if (label < 0) throw std::runtime_error(path + ": negative label");
    if (expected_classes > 0 && label >= expected_classes) {
      throw std::runtime_error(path + ": label " + std::to_string(label) +
                               " out of range [0, " + std::to_string(expected_classes) + ")");
    }
    max_label = std::max(max_label, static_cast<int>(label));
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw std::runtime_error(path + ": no data rows");

  LabeledDataset ds;
  ds.X = DenseMatrix(labels.size(), d);
  ds.X.values = std::move(coords);
  ds.labels = std::move(labels);
  ds.num_classes = expected_classes > 0 ? expected_classes : max_label + 1;
  ds.validate();
  return ds;
}

}  // namespace silan
