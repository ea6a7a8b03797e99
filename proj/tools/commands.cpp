#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "mclv/data_io.hpp"
#include "mclv/digest.hpp"
#include "mclv/estimators.hpp"
#include "mclv/exact_oracle.hpp"
#include "mclv/stopping_set.hpp"
#include "mclv/tour.hpp"
#include "mclv/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mclv::cli {

namespace {

struct LoadedData {
  Dataset train;
  Dataset test;
  std::vector<fs::path> files;
};

LoadedData load_data(const DataOptions& opts) {
  if (opts.data_dir.empty()) throw DataError("no dataset directory: pass --data-dir or set MCLV_DATA_DIR");
  const fs::path dir(opts.data_dir);
  LoadedData out;
  auto load_one = [&](const std::string& images, const std::string& labels) {
    const fs::path img = dir / images;
    const fs::path lab = dir / labels;
    if (!fs::exists(img)) throw DataError("missing " + img.string());
    std::optional<fs::path> lab_opt;
    if (fs::exists(lab)) lab_opt = lab;
    RawImages raw;
    try {
      raw = load_idx(img, lab_opt);
    } catch (const IdxError& e) {
      throw DataError(e.what());
    }
    out.files.push_back(img);
    if (lab_opt) out.files.push_back(*lab_opt);
    Binarization mode = Binarization::threshold();
    if (opts.binarize == "stochastic") {
      mode = Binarization::stochastic(opts.binarize_seed);
    } else if (opts.binarize != "threshold") {
      throw std::invalid_argument("unknown binarization " + opts.binarize);
    }
    Dataset d = binarize(raw, mode);
    d.source_digest = file_digest(img);
    return d;
  };
  out.train = load_one("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
  const fs::path test_images = dir / "t10k-images-idx3-ubyte";
  if (fs::exists(test_images)) out.test = load_one("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
  if (opts.split) std::tie(out.train, out.test) = resplit(out.train, out.test, *opts.split);
  if (opts.train_limit) out.train = out.train.head(opts.train_limit);
  if (opts.test_limit) out.test = out.test.head(opts.test_limit);
  if (out.train.size() == 0) throw DataError("training set is empty");
  return out;
}

json data_json(const DataOptions& opts, const LoadedData& data) {
  json j;
  j["data_dir"] = opts.data_dir;
  j["split"] = opts.split ? json(*opts.split) : json(nullptr);
  j["train_limit"] = opts.train_limit;
  j["test_limit"] = opts.test_limit;
  j["binarize"] = opts.binarize;
  j["binarize_seed"] = opts.binarize_seed;
  j["n_train"] = data.train.size();
  j["n_test"] = data.test.size();
  j["train_digest"] = data.train.source_digest;
  j["test_digest"] = data.test.source_digest;
  return j;
}

json tour_json(const TourOptions& t) {
  json j;
  j["k"] = t.k ? json(*t.k) : json("dynamic");
  j["k_cap"] = t.k_cap;
  j["scan"] = to_string(t.scan);
  j["tours"] = t.tours;
  j["seed"] = t.seed;
  j["threads"] = t.threads;
  return j;
}

TourConfig tour_config(const TourOptions& t) {
  return t.k ? TourConfig::fixed(*t.k, t.scan) : TourConfig::dynamic(t.k_cap, t.scan);
}

json file_entries(const std::vector<fs::path>& files) {
  json arr = json::array();
  for (const auto& f : files) arr.push_back({{"path", f.string()}, {"digest", file_digest(f)}});
  return arr;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const std::vector<std::string>& argv,
                    json config, const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  json m;
  m["command"] = command;
  m["argv"] = argv;
  m["config"] = std::move(config);
  m["inputs"] = file_entries(inputs);
  m["outputs"] = file_entries(outputs);
  std::ofstream(out_dir / "manifest.json") << m.dump(2) << '\n';
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out.empty() ? "." : out);
  fs::create_directories(dir);
  return dir;
}

Rbm load_model(const std::string& path) {
  if (path.empty()) throw DataError("--checkpoint is required");
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path);
  try {
    return load_checkpoint(path);
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
}

void check_model_matches(const Rbm& params, const Dataset& data) {
  if (static_cast<std::size_t>(params.n_visible()) != data.n_visible()) {
    throw DataError("checkpoint has " + std::to_string(params.n_visible()) + " visible units but the data has " +
                    std::to_string(data.n_visible()));
  }
}

void write_ccdf_by_label(std::ostream& out, std::vector<TourRecord>& records) {
  std::map<int, std::vector<TourRecord>> groups;
  for (auto& r : records) {
    if (r.start_label) groups[*r.start_label].push_back(r);
  }
  out << "label,k,count,p_gt_k\n";
  out.precision(17);
  for (const auto& [label, group] : groups) {
    const TailSummary tail = summarize(group);
    for (std::size_t k = 1; k < tail.survival.size(); ++k) {
      const std::size_t count = k < tail.completed_by_length.size() ? tail.completed_by_length[k] : 0;
      out << label << ',' << k << ',' << count << ',' << tail.survival[k] << '\n';
    }
  }
}

}  // namespace

void apply_config_json(TrainConfig& c, const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "estimator") {
      const auto kind = parse_estimator(value.get<std::string>());
      if (!kind) throw std::invalid_argument("unknown estimator " + value.get<std::string>());
      c.estimator = *kind;
    } else if (key == "k") {
      c.k = value.get<std::size_t>();
    } else if (key == "dynamic_k") {
      c.dynamic_k = value.get<bool>();
    } else if (key == "k_cap") {
      c.k_dyn_cap = value.get<std::size_t>();
    } else if (key == "epochs") {
      c.epochs = value.get<std::size_t>();
    } else if (key == "warmup") {
      c.warmup_epochs = value.get<std::size_t>();
    } else if (key == "batch") {
      c.batch_size = value.get<std::size_t>();
    } else if (key == "lr") {
      c.lr0 = value.get<double>();
    } else if (key == "tau") {
      c.schedule.tau = value.get<double>();
    } else if (key == "m") {
      c.m = value.get<std::size_t>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else if (key == "eval_every") {
      c.eval_every = value.get<std::size_t>();
    } else if (key == "hidden") {
      c.n_hidden = value.get<std::size_t>();
    } else if (key == "threads") {
      c.threads = value.get<std::size_t>();
    } else if (key == "normalize") {
      c.normalize = value.get<bool>();
    } else if (key == "scan") {
      const auto s = value.get<std::string>();
      if (s != "alternating" && s != "random") throw std::invalid_argument("unknown scan " + s);
      c.scan = s == "random" ? GibbsScan::RandomScan : GibbsScan::AlternatingVH;
    } else {
      throw std::invalid_argument("unknown config key " + key);
    }
  }
}

json to_json(const TrainConfig& c) {
  return {{"estimator", to_string(c.estimator)},
          {"k", c.k},
          {"dynamic_k", c.dynamic_k},
          {"k_cap", c.k_dyn_cap},
          {"epochs", c.epochs},
          {"warmup", c.warmup_epochs},
          {"batch", c.batch_size},
          {"lr", c.lr0},
          {"tau", c.schedule.tau},
          {"m", c.m},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"hidden", c.n_hidden},
          {"threads", c.threads},
          {"normalize", c.normalize},
          {"scan", to_string(c.scan)}};
}

int cmd_train(const TrainArgs& args, const std::vector<std::string>& argv) {
  args.config.validate();
  const LoadedData data = load_data(args.data);
  const fs::path out = prepare_out(args.out);

  std::cout << "train " << data.train.size() << " examples (" << data.train.source_digest.substr(0, 12) << "), test "
            << data.test.size() << ", estimator " << to_string(args.config.estimator) << '\n';
  std::cout << std::fixed << std::setprecision(4);
  const TrainResult result = train(data.train.images, data.test.images, args.config, [](const TrainLogRow& r) {
    std::cout << "epoch " << r.epoch << "  lr " << r.lr << "  train " << r.train_log_likelihood << "  test "
              << r.test_log_likelihood << "  xi_hat " << r.xi_hat << "  completed " << r.completed_fraction
              << "  skipped " << r.skipped_updates << "  " << r.wall_time << "s\n";
  });
  if (result.skipped_updates > 0) {
    std::cerr << "warning: " << result.skipped_updates << " updates skipped because no tour completed\n";
  }

  const fs::path ckpt = out / "checkpoint.rbm";
  const fs::path log = out / "train_log.csv";
  const fs::path timing = out / "timing.csv";
  save_checkpoint(ckpt, result.params);
  {
    std::ofstream f(log);
    write_train_log_csv(f, result.log);
  }
  {
    std::ofstream f(timing);
    write_timing_csv(f, result.log);
  }
  json config = to_json(args.config);
  config["data"] = data_json(args.data, data);
  write_manifest(out, "train", argv, std::move(config), data.files, {ckpt, log});
  return kOk;
}

int cmd_tours(const ToursArgs& args, const std::vector<std::string>& argv) {
  const Rbm params = load_model(args.checkpoint);
  const LoadedData data = load_data(args.data);
  check_model_matches(params, data.train);
  const fs::path out = prepare_out(args.out);
  const TourConfig config = tour_config(args.tour);
  Rng rng(args.tour.seed);

  std::vector<fs::path> outputs;
  const fs::path fit_path = out / "tail_fit.csv";
  std::ofstream fit(fit_path);
  fit << "m,set_size,tours,completed,capped,p_xi_eq_1,alpha,slope,k_lo,k_hi\n";
  fit.precision(17);
  for (const std::size_t m : args.ms) {
    const StoppingSet stopping = StoppingSet::build(data.train.images, params, m, rng);
    BatchResult batch = run_batch(params, stopping, config, {}, args.tour.tours, rng, args.tour.threads);
    const TailSummary& tail = batch.tail;
    const double p1 = tail.tours && tail.completed_by_length.size() > 1
                          ? static_cast<double>(tail.completed_by_length[1]) / static_cast<double>(tail.tours)
                          : 0.0;
    const auto tail_fit = fit_geometric_tail(tail);

    const fs::path ccdf_path = out / ("ccdf_m" + std::to_string(m) + ".csv");
    {
      std::ofstream f(ccdf_path);
      write_ccdf_csv(f, tail);
    }
    outputs.push_back(ccdf_path);
    if (data.train.labels) {
      assign_start_labels(batch.records, stopping, *data.train.labels);
      const fs::path by_label = out / ("ccdf_by_label_m" + std::to_string(m) + ".csv");
      std::ofstream f(by_label);
      write_ccdf_by_label(f, batch.records);
      outputs.push_back(by_label);
    }
    fit << m << ',' << stopping.size() << ',' << tail.tours << ',' << tail.completed << ',' << tail.capped << ','
        << p1 << ',';
    if (tail_fit) {
      fit << tail_fit->alpha << ',' << tail_fit->slope << ',' << tail_fit->k_lo << ',' << tail_fit->k_hi << '\n';
    } else {
      fit << ",,,\n";
    }
    std::cout << "m " << m << "  |S| " << stopping.size() << "  completed " << tail.completed << '/' << tail.tours
              << "  p(xi=1) " << p1 << "  xi_hat " << tail.xi_hat;
    if (tail_fit) std::cout << "  alpha " << tail_fit->alpha;
    std::cout << '\n';
    if (tail.capped) std::cerr << "warning: " << tail.capped << " tours hit the cap of " << config.k_dyn_cap << '\n';
  }
  fit.close();
  outputs.push_back(fit_path);

  json config_json = tour_json(args.tour);
  config_json["m"] = args.ms;
  config_json["checkpoint"] = args.checkpoint;
  config_json["data"] = data_json(args.data, data);
  std::vector<fs::path> inputs = data.files;
  inputs.emplace_back(args.checkpoint);
  write_manifest(out, "tours", argv, std::move(config_json), inputs, outputs);
  return kOk;
}

int cmd_estimate_z(const EstimateZArgs& args, const std::vector<std::string>& argv) {
  const Rbm params = load_model(args.checkpoint);
  const fs::path out = prepare_out(args.out);
  Rng rng(args.tour.seed);

  std::optional<LoadedData> data;
  std::optional<StoppingSet> stopping;
  if (args.full_set) {
    const auto n_h = static_cast<std::size_t>(params.n_hidden());
    if (n_h > 20) throw std::invalid_argument("--full-set needs at most 20 hidden units");
    std::vector<BitVector> all;
    for (std::uint64_t c = 0; c < (std::uint64_t{1} << n_h); ++c) all.push_back(BitVector::from_code(c, n_h));
    stopping = StoppingSet::from_hidden_states(all, params);
  } else {
    data = load_data(args.data);
    check_model_matches(params, data->train);
    stopping = StoppingSet::build(data->train.images, params, args.m, rng);
  }

  const TourConfig config = tour_config(args.tour);
  const BatchResult batch =
      run_batch(params, *stopping, config, {StatisticSpec::unit()}, args.tour.tours, rng, args.tour.threads);
  if (batch.tail.capped) {
    std::cerr << "warning: " << batch.tail.capped << " tours hit the cap; reporting the completed subset\n";
  }
  const FHatResult z = f_hat(batch.records, *stopping, 0, 1.0);
  const double xi = z.mean_stat(0);
  const double se = z.std_error(0);
  const double log_z_hat = z.log_z_s + std::log(xi);

  json result;
  result["log_z_s"] = z.log_z_s;
  result["set_size"] = stopping->size();
  result["xi_hat"] = xi;
  result["xi_std_error"] = se;
  result["log_z_hat"] = log_z_hat;
  result["log_z_ci95"] = {z.log_z_s + std::log(std::max(xi - 1.96 * se, 1e-300)), z.log_z_s + std::log(xi + 1.96 * se)};
  result["completed_tours"] = z.completed_tours;
  result["tours"] = batch.tail.tours;
  if (args.tour.k && z.bias_bound) result["bias_bound"] = *z.bias_bound;

  std::cout << std::setprecision(10);
  std::cout << "log Z_S      " << z.log_z_s << "  (|S| = " << stopping->size() << ")\n";
  std::cout << "xi_hat       " << xi << " +- " << se << "  (" << z.completed_tours << " completed tours)\n";
  std::cout << "log Z_hat    " << log_z_hat << "  95% CI [" << result["log_z_ci95"][0].get<double>() << ", "
            << result["log_z_ci95"][1].get<double>() << "]\n";
  if (std::min(params.n_visible(), params.n_hidden()) <= kMaxEnumeratedUnits) {
    const double log_z = exact_log_partition(params);
    const double rel = std::abs(std::expm1(log_z_hat - log_z));
    result["log_z_exact"] = log_z;
    result["relative_error"] = rel;
    std::cout << "log Z exact  " << log_z << "\nrelative err " << rel << '\n';
  }
  const fs::path result_path = out / "estimate_z.json";
  std::ofstream(result_path) << result.dump(2) << '\n';

  json config_json = tour_json(args.tour);
  config_json["m"] = args.m;
  config_json["full_set"] = args.full_set;
  config_json["checkpoint"] = args.checkpoint;
  std::vector<fs::path> inputs;
  if (data) {
    config_json["data"] = data_json(args.data, *data);
    inputs = data->files;
  }
  inputs.emplace_back(args.checkpoint);
  write_manifest(out, "estimate-z", argv, std::move(config_json), inputs, {result_path});
  return kOk;
}

int cmd_verify(const VerifyArgs& args, const std::vector<std::string>& argv) {
  const fs::path out = prepare_out(args.out);
  const fs::path report = out / "verify_report.csv";
  std::ofstream csv(report);
  csv << "seed,property,value,tolerance,passed\n";
  csv.precision(6);
  csv << std::scientific;
  VerifyOptions options;
  options.inject_fault = args.inject_fault;
  std::vector<std::string> failures;
  for (const auto seed : args.seeds) {
    for (const auto& r : verify_model(seed, options)) {
      csv << r.seed << ',' << r.property << ',' << r.value << ',' << r.tolerance << ',' << (r.passed ? 1 : 0) << '\n';
      std::cout << "seed " << r.seed << "  " << std::left << std::setw(36) << r.property << std::right
                << std::scientific << std::setprecision(3) << r.value;
      if (!r.informational) std::cout << (r.passed ? "  ok" : "  FAILED");
      std::cout << '\n';
      if (!r.passed) failures.push_back(r.property + " (seed " + std::to_string(r.seed) + ")");
    }
  }
  csv.close();
  write_manifest(out, "verify", argv, {{"seeds", args.seeds}, {"inject_fault", args.inject_fault}}, {}, {report});
  if (!failures.empty()) {
    for (const auto& f : failures) std::cerr << "failed: " << f << '\n';
    return kVerifyFailed;
  }
  std::cout << "all properties hold\n";
  return kOk;
}

int cmd_report(const ReportArgs& args, const std::vector<std::string>& argv) {
  const Rbm params = load_model(args.checkpoint);
  const LoadedData data = load_data(args.data);
  check_model_matches(params, data.train);
  const fs::path out = prepare_out(args.out);
  Rng rng(args.tour.seed);
  const StoppingSet stopping = StoppingSet::build(data.train.images, params, args.m, rng);
  const InspectionParadoxReport rep =
      inspection_paradox_report(params, stopping, args.tour.tours, rng, tour_config(args.tour));

  const fs::path path = out / "inspection_paradox.csv";
  std::ofstream csv(path);
  csv << "k,plain,length_biased\n";
  csv.precision(17);
  for (std::size_t k = 1; k < rep.plain.size(); ++k) {
    if (rep.plain[k] > 0.0) csv << k << ',' << rep.plain[k] << ',' << rep.length_biased[k] << '\n';
  }
  csv.close();
  std::cout << "tours " << rep.tours << "  mean length " << rep.plain_mean << "  length-biased mean "
            << rep.length_biased_mean << '\n';

  json config_json = tour_json(args.tour);
  config_json["m"] = args.m;
  config_json["checkpoint"] = args.checkpoint;
  config_json["data"] = data_json(args.data, data);
  std::vector<fs::path> inputs = data.files;
  inputs.emplace_back(args.checkpoint);
  write_manifest(out, "report", argv, std::move(config_json), inputs, {path});
  return kOk;
}

}  // namespace mclv::cli
