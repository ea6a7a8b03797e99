#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mclv/rbm.hpp"
#include "mclv/trainer.hpp"

namespace mclv::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kVerifyFailed = 4 };

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataOptions {
  std::string data_dir;
  std::optional<std::size_t> split;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  std::string binarize = "threshold";
  std::uint64_t binarize_seed = 0;
};

struct TourOptions {
  std::optional<std::size_t> k;
  std::size_t k_cap = 1'000'000;
  GibbsScan scan = GibbsScan::AlternatingVH;
  std::size_t tours = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TrainArgs {
  TrainConfig config;
  DataOptions data;
  std::string out;
};

struct ToursArgs {
  std::string checkpoint;
  DataOptions data;
  TourOptions tour;
  std::vector<std::size_t> ms{1};
  std::string out;
};

struct EstimateZArgs {
  std::string checkpoint;
  DataOptions data;
  TourOptions tour;
  std::size_t m = 1;
  bool full_set = false;
  std::string out;
};

struct VerifyArgs {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool inject_fault = false;
  std::string out;
};

struct ReportArgs {
  std::string checkpoint;
  DataOptions data;
  TourOptions tour;
  std::size_t m = 1;
  std::string out;
};

/// Fields of `json` override the corresponding TrainConfig members.
void apply_config_json(TrainConfig& config, const nlohmann::json& json);
nlohmann::json to_json(const TrainConfig& config);

int cmd_train(const TrainArgs& args, const std::vector<std::string>& argv);
int cmd_tours(const ToursArgs& args, const std::vector<std::string>& argv);
int cmd_estimate_z(const EstimateZArgs& args, const std::vector<std::string>& argv);
int cmd_verify(const VerifyArgs& args, const std::vector<std::string>& argv);
int cmd_report(const ReportArgs& args, const std::vector<std::string>& argv);

}  // namespace mclv::cli
