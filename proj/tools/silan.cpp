#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "silan/adapt.hpp"
#include "silan/data.hpp"
#include "silan/diagnostics.hpp"
#include "silan/model_io.hpp"
#include "silan/plot.hpp"
#include "silan/run_config.hpp"
#include "silan/verify.hpp"

namespace fs = std::filesystem;
using namespace silan;

namespace {

constexpr std::size_t kDefaultPretrainEpochs = 200;
constexpr std::size_t kDefaultAdaptEpochs = 60;

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << body;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

// Every config-driven command drops the resolved config next to its outputs.
void echo_config(const fs::path& dir, const RunConfig& cfg) {
  write_text(dir / "effective_config.json", run_config_json(cfg).dump(2) + "\n");
}

fs::path parent_or_cwd(const fs::path& p) {
  const fs::path dir = p.parent_path();
  return dir.empty() ? fs::path(".") : dir;
}

RunConfig base_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"silan: source-informed latent augmentation lab for source-free domain "
               "adaptation on synthetic data"};
  app.require_subcommand(1);
  int rc = 0;

  // ---- gen-data ------------------------------------------------------------
  struct {
    std::string config, out_dir;
    std::size_t n = 0;
    double noise = 0.0, rotate = 0.0;
    std::uint64_t seed_s = 0, seed_t = 0;
  } gd;
  auto* gen = app.add_subcommand("gen-data", "write a source/target moon-pair as CSV");
  gen->add_option("--config", gd.config, "JSON config file");
  auto* gd_n = gen->add_option("--n", gd.n, "points per domain");
  auto* gd_noise = gen->add_option("--noise", gd.noise, "coordinate noise std");
  auto* gd_rot = gen->add_option("--rotate", gd.rotate, "target rotation in degrees");
  auto* gd_ss = gen->add_option("--seed-s", gd.seed_s, "source data seed");
  auto* gd_st = gen->add_option("--seed-t", gd.seed_t, "target data seed");
  gen->add_option("--out-dir", gd.out_dir, "output directory")->required();
  gen->callback([&] {
    RunConfig cfg = base_config(gd.config);
    if (gd_n->count()) cfg.n = gd.n;
    if (gd_noise->count()) cfg.noise_std = gd.noise;
    if (gd_rot->count()) cfg.rotation_deg = gd.rotate;
    if (gd_ss->count()) cfg.seed_s = gd.seed_s;
    if (gd_st->count()) cfg.seed_t = gd.seed_t;
    const auto [source, target] =
        make_shift_pair(cfg.n, cfg.noise_std, cfg.rotation_deg, cfg.seed_s, cfg.seed_t);
    fs::create_directories(gd.out_dir);
    save_csv(source, (fs::path(gd.out_dir) / "source.csv").string());
    save_csv(target, (fs::path(gd.out_dir) / "target.csv").string());
    echo_config(gd.out_dir, cfg);
    std::cout << "wrote source.csv and target.csv (" << cfg.n << " rows each) to " << gd.out_dir
              << "\n";
  });

  // ---- pretrain ------------------------------------------------------------
  struct {
    std::string config, data, out, activation;
    std::vector<std::size_t> layers;
    std::size_t epochs = 0, batch_size = 0, feature_depth = 0;
    double lr = 0.0, momentum = 0.0;
    std::uint64_t seed = 0;
  } pt;
  auto* pre = app.add_subcommand("pretrain", "train a source model with cross-entropy");
  pre->add_option("--config", pt.config, "JSON config file");
  pre->add_option("--data", pt.data, "labeled source CSV")->required();
  pre->add_option("--out", pt.out, "output model document")->required();
  auto* pt_epochs = pre->add_option("--epochs", pt.epochs, "training epochs");
  auto* pt_batch = pre->add_option("--batch-size", pt.batch_size, "mini-batch size");
  auto* pt_lr = pre->add_option("--learning-rate", pt.lr, "SGD learning rate");
  auto* pt_mom = pre->add_option("--momentum", pt.momentum, "SGD momentum");
  auto* pt_seed = pre->add_option("--seed", pt.seed, "init and shuffle seed");
  auto* pt_layers =
      pre->add_option("--layers", pt.layers, "layer widths, e.g. 2,64,64,64,64,2")->delimiter(',');
  auto* pt_act = pre->add_option("--activation", pt.activation, "relu or tanh");
  auto* pt_fd = pre->add_option("--feature-depth", pt.feature_depth,
                                "extractor/classifier split layer index");
  pre->callback([&] {
    RunConfig cfg = base_config(pt.config);
    if (pt_epochs->count()) cfg.epochs = pt.epochs;
    if (pt_batch->count()) cfg.batch_size = pt.batch_size;
    if (pt_lr->count()) cfg.learning_rate = pt.lr;
    if (pt_mom->count()) cfg.momentum = pt.momentum;
    if (pt_seed->count()) cfg.seed = pt.seed;
    if (pt_layers->count()) cfg.layers = pt.layers;
    if (pt_act->count()) cfg.activation = pt.activation;
    if (pt_fd->count()) cfg.feature_depth = pt.feature_depth;
    cfg.epochs = cfg.epochs.value_or(kDefaultPretrainEpochs);

    const LabeledDataset ds = load_csv(pt.data);
    const MlpSpec spec = cfg.mlp_spec();
    const MlpModel model = pretrain_source(spec, ds, *cfg.epochs, cfg.learning_rate,
                                           cfg.momentum, cfg.seed, cfg.batch_size);
    save_model(model, pt.out);
    echo_config(parent_or_cwd(pt.out), cfg);
    std::cout << "train_accuracy " << format_double(evaluate(model, ds)) << "\n";
  });

  // ---- adapt ---------------------------------------------------------------
  struct {
    std::string config, model, target, out, metrics, centroid_space, bank_refresh;
    std::size_t k_t = 0, k_s = 0, batch_size = 0, epochs = 0;
    double tau = 0.0, lr = 0.0, momentum = 0.0;
    std::uint64_t seed = 0;
  } ad;
  auto* adp = app.add_subcommand("adapt", "adapt a source model to an unlabeled target set");
  adp->add_option("--config", ad.config, "JSON config file");
  adp->add_option("--model", ad.model, "source model document")->required();
  adp->add_option("--target", ad.target, "target CSV (labels used for metrics only)")->required();
  adp->add_option("--out", ad.out, "adapted model document")->required();
  adp->add_option("--metrics", ad.metrics, "per-epoch metrics CSV")->required();
  auto* ad_kt = adp->add_option("--k-t", ad.k_t, "target-extractor neighbor count");
  auto* ad_ks = adp->add_option("--k-s", ad.k_s, "source-extractor neighbor count");
  auto* ad_tau = adp->add_option("--tau", ad.tau, "contrastive temperature");
  auto* ad_batch = adp->add_option("--batch-size", ad.batch_size, "mini-batch size");
  auto* ad_epochs = adp->add_option("--epochs", ad.epochs, "adaptation epochs");
  auto* ad_lr = adp->add_option("--learning-rate", ad.lr, "SGD learning rate");
  auto* ad_mom = adp->add_option("--momentum", ad.momentum, "SGD momentum");
  auto* ad_seed = adp->add_option("--seed", ad.seed, "adaptation seed");
  auto* ad_cs = adp->add_option("--centroid-space", ad.centroid_space, "input or feature");
  auto* ad_br = adp->add_option("--bank-refresh", ad.bank_refresh, "per_epoch or per_step");
  adp->callback([&] {
    RunConfig cfg = base_config(ad.config);
    if (ad_kt->count()) cfg.k_t = ad.k_t;
    if (ad_ks->count()) cfg.k_s = ad.k_s;
    if (ad_tau->count()) cfg.tau = ad.tau;
    if (ad_batch->count()) cfg.batch_size = ad.batch_size;
    if (ad_epochs->count()) cfg.epochs = ad.epochs;
    if (ad_lr->count()) cfg.learning_rate = ad.lr;
    if (ad_mom->count()) cfg.momentum = ad.momentum;
    if (ad_seed->count()) cfg.seed = ad.seed;
    if (ad_cs->count()) cfg.centroid_space = ad.centroid_space;
    if (ad_br->count()) cfg.bank_refresh = ad.bank_refresh;

    const MlpModel source = load_model(ad.model);
    const LabeledDataset target = load_csv(ad.target, static_cast<int>(source.spec.logit_dim()));
    const AdaptConfig acfg = cfg.adapt_config(kDefaultAdaptEpochs);
    cfg.epochs = acfg.epochs;
    const AdaptResult result = adapt_target(source, target, acfg);
    save_model(result.model, ad.out);
    save_metrics_csv(result.metrics, ad.metrics);
    echo_config(parent_or_cwd(ad.out), cfg);
    std::cout << "final_target_accuracy "
              << format_double(result.metrics.empty() ? evaluate(result.model, target)
                                                      : result.metrics.back().target_accuracy)
              << "\n";
  });

  // ---- eval ----------------------------------------------------------------
  struct {
    std::string model, data;
  } ev;
  auto* evl = app.add_subcommand("eval", "print a model's accuracy on a labeled CSV");
  evl->add_option("--model", ev.model, "model document")->required();
  evl->add_option("--data", ev.data, "labeled CSV")->required();
  evl->callback([&] {
    const MlpModel model = load_model(ev.model);
    const LabeledDataset ds = load_csv(ev.data, static_cast<int>(model.spec.logit_dim()));
    std::cout << format_double(evaluate(model, ds)) << "\n";
  });

  // ---- verify --------------------------------------------------------------
  struct {
    std::string suite;
  } vf;
  auto* ver = app.add_subcommand("verify", "run one of the numeric verification suites");
  ver->add_option("suite", vf.suite, "gradcheck | prop1 | beam | knn | silan-stats")
      ->required()
      ->check(CLI::IsMember(verify_suite_names()));
  ver->callback([&] {
    const bool ok = report_checks(run_verify_suite(vf.suite), std::cout);
    std::cout << (ok ? "PASS" : "FAIL") << "  suite " << vf.suite << "\n";
    if (!ok) rc = 1;
  });

  // ---- sweep ---------------------------------------------------------------
  struct {
    std::string config, param, model, target, out;
    std::vector<double> values;
  } sw;
  auto* swp = app.add_subcommand("sweep", "one adaptation run per hyperparameter value");
  swp->add_option("--config", sw.config, "JSON config file");
  swp->add_option("--param", sw.param, "k_t | k_s | tau")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>{"k_t", "k_s", "tau"}));
  swp->add_option("--values", sw.values, "comma-separated values")->required()->delimiter(',');
  swp->add_option("--model", sw.model, "source model document")->required();
  swp->add_option("--target", sw.target, "target CSV")->required();
  swp->add_option("--out", sw.out, "output CSV")->required();
  auto* sw_epochs = swp->add_option("--epochs", ad.epochs, "adaptation epochs per run");
  swp->callback([&] {
    RunConfig cfg = base_config(sw.config);
    if (sw_epochs->count()) cfg.epochs = ad.epochs;
    const MlpModel source = load_model(sw.model);
    const LabeledDataset target = load_csv(sw.target, static_cast<int>(source.spec.logit_dim()));

    std::string csv = "value,final_accuracy,mean_noise_std\n";
    for (const double value : sw.values) {
      AdaptConfig acfg = cfg.adapt_config(kDefaultAdaptEpochs);
      if (sw.param == "tau") {
        acfg.tau = value;
      } else {
        if (value < 1.0 || value != std::floor(value)) {
          throw std::runtime_error("sweep: " + sw.param + " values must be positive integers");
        }
        (sw.param == "k_t" ? acfg.k_t : acfg.k_s) = static_cast<std::size_t>(value);
      }
      acfg.validate();
      const AdaptResult result = adapt_target(source, target, acfg);
      const double acc = result.metrics.empty() ? evaluate(result.model, target)
                                                : result.metrics.back().target_accuracy;
      const double noise_std = result.metrics.empty() ? 0.0 : result.metrics.back().mean_noise_std;
      csv += format_double(value) + "," + format_double(acc) + "," + format_double(noise_std) +
             "\n";
    }
    write_text(sw.out, csv);
    cfg.epochs = cfg.epochs.value_or(kDefaultAdaptEpochs);
    echo_config(parent_or_cwd(sw.out), cfg);
    std::cout << "wrote " << sw.out << " (" << sw.values.size() << " rows)\n";
  });

  // ---- plot ----------------------------------------------------------------
  struct {
    std::string model, data, out;
    std::size_t grid_res = 200;
  } pl;
  auto* plt = app.add_subcommand("plot", "render a decision-boundary SVG");
  plt->add_option("--model", pl.model, "model document")->required();
  plt->add_option("--data", pl.data, "labeled CSV to overlay")->required();
  plt->add_option("--grid-res", pl.grid_res, "cells per axis (default 200)");
  plt->add_option("--out", pl.out, "output SVG path")->required();
  plt->callback([&] {
    const MlpModel model = load_model(pl.model);
    const LabeledDataset ds = load_csv(pl.data, static_cast<int>(model.spec.logit_dim()));
    save_decision_svg(model, ds, pl.grid_res, pl.out);
    std::cout << "wrote " << pl.out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // 0 is help; anything else is a usage error
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
