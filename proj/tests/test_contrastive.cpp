#include <catch2/catch_amalgamated.hpp>

#include "silan/contrastive.hpp"
#include "silan/gradcheck.hpp"
#include "silan/rng.hpp"

using namespace silan;

namespace {

DenseMatrix rows2(std::initializer_list<std::initializer_list<double>> rows) {
  DenseMatrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

void normalize_rows(DenseMatrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    const double norm = l2_norm(row);
    for (double& v : row) v /= norm;
  }
}

}  // namespace

TEST_CASE("infonce hand values") {
  SECTION("identical keys make every ratio one") {
    const ContrastiveBatch b{rows2({{1, 0}, {0, 1}}), rows2({{0.3, 0.7}, {0.3, 0.7}}), 1.0};
    REQUIRE(infonce_loss(b).loss == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("orthogonal one-hot batch") {
    const DenseMatrix q = rows2({{1, 0}, {0, 1}});
    const ContrastiveBatch b{q, q, 1.0};
    REQUIRE(infonce_loss(b).loss == Catch::Approx(-2.0).margin(1e-12));
  }
}

TEST_CASE("infonce validation") {
  const DenseMatrix q = rows2({{1, 0}, {0, 1}});
  REQUIRE_THROWS_AS(infonce_loss({rows2({{1, 0}}), rows2({{1, 0}}), 1.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(infonce_loss({q, q, 0.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(infonce_loss({q, q, -0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(infonce_loss({q, rows2({{1, 0, 0}, {0, 1, 0}}), 1.0}),
                    std::invalid_argument);
}

TEST_CASE("infonce gradients match central differences") {
  Rng rng(17);
  ContrastiveBatch b{DenseMatrix(3, 4), DenseMatrix(3, 4), 0.37};
  for (double& v : b.query_logits.values) v = rng.normal();
  for (double& v : b.key_logits.values) v = rng.normal();
  const InfoNceResult r = infonce_loss(b);

  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < b.query_logits.values.size(); ++i) {
    ContrastiveBatch bp = b, bm = b;
    bp.query_logits.values[i] += eps;
    bm.query_logits.values[i] -= eps;
    const double fd = (infonce_loss(bp).loss - infonce_loss(bm).loss) / (2.0 * eps);
    worst = std::max(worst, detail::relative_error(r.dquery.values[i], fd, 1e-3));
  }
  for (std::size_t i = 0; i < b.key_logits.values.size(); ++i) {
    ContrastiveBatch bp = b, bm = b;
    bp.key_logits.values[i] += eps;
    bm.key_logits.values[i] -= eps;
    const double fd = (infonce_loss(bp).loss - infonce_loss(bm).loss) / (2.0 * eps);
    worst = std::max(worst, detail::relative_error(r.dkeys.values[i], fd, 1e-3));
  }
  REQUIRE(worst <= 1e-6);
}

TEST_CASE("loss is invariant to a constant shift of all keys") {
  // s'(i,j) = s(i,j) + q_i.c/tau is constant within each row, so the per-row
  // log-ratio cancels it; regression guard against denominators picking up
  // row-dependent terms.
  Rng rng(19);
  ContrastiveBatch b{DenseMatrix(4, 3), DenseMatrix(4, 3), 0.11};
  for (double& v : b.query_logits.values) v = rng.normal();
  for (double& v : b.key_logits.values) v = rng.normal();
  const double base = infonce_loss(b).loss;
  ContrastiveBatch shifted = b;
  const std::vector<double> c = {0.8, -1.3, 0.4};
  for (std::size_t i = 0; i < shifted.key_logits.rows; ++i) {
    for (std::size_t j = 0; j < 3; ++j) shifted.key_logits(i, j) += c[j];
  }
  REQUIRE(infonce_loss(shifted).loss == Catch::Approx(base).margin(1e-9));
}

TEST_CASE("prop1 bound equals the loss in the degenerate case") {
  DenseMatrix same = rows2({{0.6, 0.8}, {0.6, 0.8}});
  const ContrastiveBatch b{same, same, 1.0};
  REQUIRE(prop1_lower_bound(b, true) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(infonce_loss(b).loss == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("prop1 bound never exceeds the loss on unit rows") {
  const std::size_t batch_sizes[] = {2, 4, 8};
  const std::size_t class_counts[] = {2, 5};
  const double taus[] = {0.11, 1.0};
  for (std::size_t t = 0; t < 240; ++t) {
    Rng rng(Rng::mix(900, t));
    const std::size_t m = batch_sizes[t % 3];
    const std::size_t z = class_counts[(t / 3) % 2];
    ContrastiveBatch b{DenseMatrix(m, z), DenseMatrix(m, z), taus[(t / 6) % 2]};
    for (double& v : b.query_logits.values) v = rng.normal();
    for (double& v : b.key_logits.values) v = rng.normal();
    normalize_rows(b.query_logits);
    normalize_rows(b.key_logits);
    REQUIRE(prop1_lower_bound(b, true) <= infonce_loss(b).loss + 1e-9);
  }
}

TEST_CASE("prop1 normalization handling") {
  SECTION("already-unit rows give the same value either way") {
    Rng rng(23);
    ContrastiveBatch b{DenseMatrix(3, 3), DenseMatrix(3, 3), 0.5};
    for (double& v : b.query_logits.values) v = rng.normal();
    for (double& v : b.key_logits.values) v = rng.normal();
    normalize_rows(b.query_logits);
    normalize_rows(b.key_logits);
    REQUIRE(prop1_lower_bound(b, false) ==
            Catch::Approx(prop1_lower_bound(b, true)).margin(1e-12));
  }
  SECTION("zero-norm rows are rejected when normalizing") {
    const ContrastiveBatch b{rows2({{0, 0}, {1, 0}}), rows2({{1, 0}, {0, 1}}), 1.0};
    REQUIRE_THROWS_AS(prop1_lower_bound(b, true), std::invalid_argument);
  }
}
