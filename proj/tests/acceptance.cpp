// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Everything is seeded; runs standalone with no inputs.

#include <chrono>
#include <cstdio>
#include <string>

#include "silan/adapt.hpp"
#include "silan/model_io.hpp"
#include "silan/verify.hpp"

using namespace silan;

namespace {

constexpr std::size_t kPretrainEpochs = 200;
constexpr std::size_t kAdaptEpochs = 60;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int failures = 0;

void report(int index, const std::string& name, bool passed, const std::string& detail,
            double seconds) {
  std::printf("criterion %d (%s): %s  %s (%.1fs)\n", index, name.c_str(),
              passed ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
  if (!passed) ++failures;
}

bool all_passed(const std::vector<CheckResult>& checks, std::string& detail) {
  bool ok = true;
  detail.clear();
  for (const CheckResult& c : checks) {
    ok = ok && c.passed;
    if (!c.passed) detail += (detail.empty() ? "failed: " : "; ") + c.name;
  }
  if (ok) detail = std::to_string(checks.size()) + " checks";
  return ok;
}

struct ToyRun {
  double source_accuracy = 0.0;
  double baseline_target_accuracy = 0.0;
  double adapted_target_accuracy = 0.0;
  std::string metrics_csv;
  std::string model_doc;
};

ToyRun toy_run(std::size_t run) {
  const auto [ds_s, ds_t] = make_shift_pair(1000, 0.1, 30.0, 2 * run + 1, 2 * run + 2);
  const MlpSpec spec{{2, 64, 64, 64, 64, 2}, Activation::relu, 4, 100 + run};
  const MlpModel source =
      pretrain_source(spec, ds_s, kPretrainEpochs, 1e-3, 0.9, 100 + run);
  AdaptConfig cfg;
  cfg.k_t = 3;
  cfg.k_s = 3;
  cfg.tau = 0.11;
  cfg.batch_size = 32;
  cfg.epochs = kAdaptEpochs;
  cfg.learning_rate = 1e-3;
  cfg.momentum = 0.9;
  cfg.seed = 1000 + run;
  const AdaptResult adapted = adapt_target(source, ds_t, cfg);

  ToyRun out;
  out.source_accuracy = evaluate(source, ds_s);
  out.baseline_target_accuracy = evaluate(source, ds_t);
  out.adapted_target_accuracy = adapted.metrics.back().target_accuracy;
  out.metrics_csv = metrics_to_csv(adapted.metrics);
  out.model_doc = model_to_string(adapted.model);
  return out;
}

}  // namespace

int main() {
  std::string detail;

  {
    Timer t;
    const bool ok = all_passed(verify_gradcheck(), detail);
    const double secs = t.seconds();
    report(1, "gradient oracle", ok && secs < 30.0, detail, secs);
  }
  {
    Timer t;
    const bool ok = all_passed(verify_prop1(), detail);
    const double secs = t.seconds();
    report(2, "proposition 1 bound", ok && secs < 10.0, detail, secs);
  }
  {
    Timer t;
    const bool ok = all_passed(verify_beam(), detail);
    const double secs = t.seconds();
    report(3, "beam constant 1.5852", ok && secs < 1.0, detail, secs);
  }
  {
    Timer t;
    const bool ok = all_passed(verify_knn(), detail);
    const double secs = t.seconds();
    report(4, "knn oracle", ok && secs < 1.0, detail, secs);
  }
  {
    Timer t;
    const bool ok = all_passed(verify_silan_stats(), detail);
    const double secs = t.seconds();
    report(5, "latent augmentation statistics", ok && secs < 10.0, detail, secs);
  }

  ToyRun first_run;
  {
    Timer t;
    double source_sum = 0.0, baseline_sum = 0.0, adapted_sum = 0.0;
    for (std::size_t run = 0; run < 5; ++run) {
      const ToyRun r = toy_run(run);
      if (run == 0) first_run = r;
      source_sum += r.source_accuracy;
      baseline_sum += r.baseline_target_accuracy;
      adapted_sum += r.adapted_target_accuracy;
    }
    const double source_mean = source_sum / 5.0;
    const double baseline_mean = baseline_sum / 5.0;
    const double adapted_mean = adapted_sum / 5.0;
    const double gain = adapted_mean - baseline_mean;
    const double secs = t.seconds();
    const bool ok = source_mean >= 0.99 && gain >= 0.05 && secs < 300.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "source_acc=%.4f source_only_target=%.4f adapted_target=%.4f gain=%.1fpp",
                  source_mean, baseline_mean, adapted_mean, 100.0 * gain);
    report(6, "toy end-to-end adaptation", ok, buf, secs);
  }
  {
    Timer t;
    const ToyRun repeat = toy_run(0);
    const bool ok = repeat.metrics_csv == first_run.metrics_csv &&
                    repeat.model_doc == first_run.model_doc;
    report(7, "determinism of the end-to-end run", ok,
           ok ? "metrics csv and model document byte-identical" : "artifacts differ",
           t.seconds());
  }
  {
    Timer t;
    const auto [ds_s, ds_t] = make_shift_pair(200, 0.1, 30.0, 11, 12);
    const MlpSpec spec{{2, 16, 16, 2}, Activation::relu, 2, 77};
    const MlpModel source = pretrain_source(spec, ds_s, 20, 1e-2, 0.9, 77);
    AdaptConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.seed = 13;

    AdaptConfig none = cfg;
    none.epochs = 0;
    const bool identity_ok = params_equal(adapt_target(source, ds_t, none).model, source);

    LabeledDataset blank = ds_t;
    for (int& l : blank.labels) l = 0;
    const bool label_free = params_equal(adapt_target(source, ds_t, cfg).model,
                                         adapt_target(source, blank, cfg).model);

    const FeatureBank expected = build_bank(source, ds_t, true);
    bool bank_frozen = true;
    adapt_target(source, ds_t, cfg,
                 [&](std::size_t, const FeatureBank& bank_s, const FeatureBank&,
                     const MlpModel&) {
                   bank_frozen =
                       bank_frozen && bitwise_equal(bank_s.features, expected.features);
                 });

    const bool ok = identity_ok && label_free && bank_frozen;
    detail = std::string("epoch0_identity=") + (identity_ok ? "yes" : "NO") +
             " label_free=" + (label_free ? "yes" : "NO") +
             " frozen_bank=" + (bank_frozen ? "yes" : "NO");
    report(8, "algorithm-fidelity properties", ok, detail, t.seconds());
  }

  if (failures == 0) {
    std::printf("acceptance: all 8 criteria passed\n");
  } else {
    std::printf("acceptance: %d criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
