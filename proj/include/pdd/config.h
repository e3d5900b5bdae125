#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdd/cloudsim.h"
#include "pdd/devicesim.h"
#include "pdd/planner.h"
#include "pdd/timing.h"

namespace pdd {

// Configuration files are JSON. The full key schema is documented in
// docs/config.md; every loader reports problems as ConfigError with the
// dotted key path of the offending value.

struct WorkloadConfig {
  std::size_t requests = 100;
  double arrival_rate_per_s = 2.0;
  std::vector<TokenCount> prompt_lengths{4096, 8192, 16384, 32768};
  TokenCount n_min = 100;  // natural output length, uniform in [n_min, n_max]
  TokenCount n_max = 400;
  std::string scene = "collab";
  std::string device_class = "phone";
  std::string model_version_label = "cloud-v1";
  TokenCount prefix_tokens = 8;
  TokenCount suffix_tokens = 8;
  TokenCount sentence_min = 6;
  TokenCount sentence_max = 18;
  // Probability that the device disagrees with the cloud at a given decoding
  // position of its synced history.
  double divergence_rate = 0.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::map<std::string, TimingModel> devices;
  std::map<std::string, PlanConstraints> scenes;
  std::vector<TokenCount> buckets = default_buckets();
  WorkloadConfig workload;
  CorrectionPolicy policy = CorrectionPolicy::kCloudWins;
  BatchModel batch;
  std::vector<TokenCount> sweep_L;  // each adds a variant with L overridden
  std::vector<double> sweep_r;      // each adds a variant with r overridden
  std::vector<ScrubRule> scrub_rules;

  void validate() const;
};

ExperimentConfig default_experiment_config();

TimingModel timing_model_from_json(const nlohmann::json& j, const std::string& path);
PlanConstraints constraints_from_json(const nlohmann::json& j, const std::string& path);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

nlohmann::json to_json(const TimingModel& model);
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace pdd
