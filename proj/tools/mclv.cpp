// mclv: train RBMs and run tour estimators from the command line.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mclv/data_io.hpp"

using namespace mclv;
using namespace mclv::cli;

namespace {

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data-dir", d.data_dir, "Directory with the IDX files")->envname("MCLV_DATA_DIR");
  cmd->add_option("--split", d.split, "Re-partition train+test so the first N examples train");
  cmd->add_option("--train-limit", d.train_limit, "Use only the first N training examples");
  cmd->add_option("--test-limit", d.test_limit, "Use only the first N test examples");
  cmd->add_option("--binarize", d.binarize, "threshold or stochastic")->check(CLI::IsMember({"threshold", "stochastic"}));
  cmd->add_option("--binarize-seed", d.binarize_seed, "Seed for stochastic binarization");
}

const std::map<std::string, GibbsScan> kScans{{"alternating", GibbsScan::AlternatingVH},
                                              {"random", GibbsScan::RandomScan}};

void add_tour_options(CLI::App* cmd, TourOptions& t, std::size_t default_tours) {
  t.tours = default_tours;
  cmd->add_option("--k", t.k, "Fixed maximum tour length (default: dynamic)");
  cmd->add_option("--k-cap", t.k_cap, "Cap on dynamic tour length");
  cmd->add_option("--scan", t.scan, "Gibbs scan: alternating or random")
      ->transform(CLI::CheckedTransformer(kScans, CLI::ignore_case));
  cmd->add_option("--tours", t.tours, "Number of tours");
  cmd->add_option("--seed", t.seed, "Random seed");
  cmd->add_option("--threads", t.threads, "Tour worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Markov chain Las Vegas tour estimators for binary RBMs"};
  app.require_subcommand(1);

  // train
  TrainArgs train_args;
  TrainConfig flags;
  std::string config_file;
  std::string estimator = "lvs";
  std::string scan = "alternating";
  bool no_normalize = false;
  auto* train_cmd = app.add_subcommand("train", "Train an RBM and write checkpoint, log and manifest");
  train_cmd->add_option("--config", config_file, "JSON config; flags override its fields");
  auto* o_est = train_cmd->add_option("--estimator", estimator, "cd, pcd, lvs or exact")
                    ->check(CLI::IsMember({"cd", "pcd", "lvs", "exact"}));
  auto* o_k = train_cmd->add_option("--k", flags.k, "Gibbs steps (CD/PCD) or maximum tour length (LVS)");
  auto* o_dyn = train_cmd->add_flag("--dynamic-k", flags.dynamic_k, "Run LVS tours until they return");
  o_dyn->excludes(o_k);
  auto* o_cap = train_cmd->add_option("--k-cap", flags.k_dyn_cap, "Cap on dynamic tour length");
  auto* o_m = train_cmd->add_option("--m", flags.m, "Stopping-set samples per training example");
  auto* o_lr = train_cmd->add_option("--lr", flags.lr0, "Initial learning rate");
  auto* o_tau = train_cmd->add_option("--tau", flags.schedule.tau, "Learning-rate decay constant in epochs");
  auto* o_epochs = train_cmd->add_option("--epochs", flags.epochs, "Training epochs");
  auto* o_warmup = train_cmd->add_option("--warmup", flags.warmup_epochs, "CD-1 warm-up epochs for LVS");
  auto* o_batch = train_cmd->add_option("--batch", flags.batch_size, "Mini-batch size");
  auto* o_seed = train_cmd->add_option("--seed", flags.seed, "Random seed");
  auto* o_hidden = train_cmd->add_option("--hidden", flags.n_hidden, "Hidden units");
  auto* o_eval = train_cmd->add_option("--eval-every", flags.eval_every, "Epochs between evaluations");
  auto* o_threads = train_cmd->add_option("--threads", flags.threads, "Tour worker threads");
  auto* o_scan = train_cmd->add_option("--scan", scan, "Gibbs scan for tours")
                     ->check(CLI::IsMember({"alternating", "random"}));
  auto* o_nonorm = train_cmd->add_flag("--no-normalize", no_normalize, "Do not divide LVS by the mean tour length");
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  add_data_options(train_cmd, train_args.data);

  // tours
  ToursArgs tours_args;
  auto* tours_cmd = app.add_subcommand("tours", "Tour-length CCDFs and tail fits for a checkpoint");
  tours_cmd->add_option("--checkpoint", tours_args.checkpoint, "RBM1 checkpoint")->required();
  tours_cmd->add_option("--m", tours_args.ms, "Stopping-set sizes to sweep")->delimiter(',');
  tours_cmd->add_option("--out", tours_args.out, "Output directory")->required();
  add_tour_options(tours_cmd, tours_args.tour, 1000);
  add_data_options(tours_cmd, tours_args.data);

  // estimate-z
  EstimateZArgs z_args;
  auto* z_cmd = app.add_subcommand("estimate-z", "Unbiased partition-function estimate");
  z_cmd->add_option("--checkpoint", z_args.checkpoint, "RBM1 checkpoint")->required();
  z_cmd->add_option("--m", z_args.m, "Stopping-set samples per training example");
  z_cmd->add_flag("--full-set", z_args.full_set, "Use every hidden state as the stopping set");
  z_cmd->add_option("--out", z_args.out, "Output directory")->required();
  add_tour_options(z_cmd, z_args.tour, 10000);
  add_data_options(z_cmd, z_args.data);

  // verify
  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Exact-oracle property suite on random tiny models");
  verify_cmd->add_option("--seeds", verify_args.seeds, "Model seeds")->delimiter(',');
  verify_cmd->add_flag("--inject-fault", verify_args.inject_fault, "Break the collapsed chain (negative control)");
  verify_cmd->add_option("--out", verify_args.out, "Output directory");

  // report
  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Plain and length-biased tour-length distributions");
  report_cmd->add_option("--checkpoint", report_args.checkpoint, "RBM1 checkpoint")->required();
  report_cmd->add_option("--m", report_args.m, "Stopping-set samples per training example");
  report_cmd->add_option("--out", report_args.out, "Output directory")->required();
  add_tour_options(report_cmd, report_args.tour, 1000);
  add_data_options(report_cmd, report_args.data);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  if (verify_args.out.empty()) verify_args.out = "verify_out";

  try {
    if (*train_cmd) {
      TrainConfig& c = train_args.config;
      bool warmup_given = false;
      if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw DataError("cannot open config " + config_file);
        const auto json = nlohmann::json::parse(in);
        apply_config_json(c, json);
        warmup_given = json.contains("warmup");
      }
      if (o_est->count()) c.estimator = *parse_estimator(estimator);
      if (o_k->count()) {
        c.k = flags.k;
        c.dynamic_k = false;
      }
      if (o_dyn->count()) c.dynamic_k = true;
      if (o_cap->count()) c.k_dyn_cap = flags.k_dyn_cap;
      if (o_m->count()) c.m = flags.m;
      if (o_lr->count()) c.lr0 = flags.lr0;
      if (o_tau->count()) c.schedule.tau = flags.schedule.tau;
      if (o_epochs->count()) c.epochs = flags.epochs;
      if (o_warmup->count()) {
        c.warmup_epochs = flags.warmup_epochs;
        warmup_given = true;
      }
      if (o_batch->count()) c.batch_size = flags.batch_size;
      if (o_seed->count()) c.seed = flags.seed;
      if (o_hidden->count()) c.n_hidden = flags.n_hidden;
      if (o_eval->count()) c.eval_every = flags.eval_every;
      if (o_threads->count()) c.threads = flags.threads;
      if (o_scan->count()) c.scan = kScans.at(scan);
      if (o_nonorm->count()) c.normalize = false;
      // Leave at least one epoch for the chosen estimator.
      if (!warmup_given) c.warmup_epochs = std::min(c.warmup_epochs, c.epochs > 0 ? c.epochs - 1 : 0);
      return cmd_train(train_args, args);
    }
    if (*tours_cmd) return cmd_tours(tours_args, args);
    if (*z_cmd) return cmd_estimate_z(z_args, args);
    if (*verify_cmd) return cmd_verify(verify_args, args);
    if (*report_cmd) return cmd_report(report_args, args);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const IdxError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsage;
}
