#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdd/cloudsim.h"
#include "pdd/config.h"
#include "pdd/csv.h"
#include "pdd/planner.h"
#include "pdd/rng.h"

namespace pdd {

struct PromptText {
  std::string prefix;
  std::string content;
  std::string suffix;
};

// Synthetic prompt whose tokenize_prompt() size is exactly `total` tokens:
// prefix_tokens words, suffix_tokens words, and the rest as content made of
// sentences of sentence_min..sentence_max tokens each ending in '.'.
PromptText synthetic_prompt(TokenCount total, const WorkloadConfig& workload, Rng& rng);

// One row per request in trace_<variant>.csv.
struct TraceRow {
  std::string request_id;
  TokenCount l = 0;
  double r = 1.0;
  TokenCount L = 1;  // kGenerateAll is written as "*"
  Millis rtt = 0.0;
  Millis ttft_c = 0.0;
  Millis occupancy = 0.0;
  TokenCount tokens_emitted = 0;
  Millis ttft_d = 0.0;
  Millis user_ttft = 0.0;
  std::optional<Millis> tpot_smooth;
  Millis max_display_gap = 0.0;   // over display positions 1..L-1
  Millis mean_display_gap = 0.0;
  std::optional<Millis> catch_up_lag;
  std::size_t corrections = 0;
  std::size_t common_prefix_len = 0;
  std::size_t mask_bytes = 0;
  bool feasible = false;
  bool planning_miss = false;
  Millis tau = 0.0;
};

const std::vector<std::string>& trace_columns();
std::vector<std::string> trace_fields(const TraceRow& row);
// Throws ReportError when a required column is missing or a cell does not parse.
std::vector<TraceRow> trace_rows(const CsvTable& table);

struct ExperimentVariant {
  std::string name;
  PlanTable plans;
};

// "planned" (solved table), "cloud_only" (r = 1, L = *), then one variant per
// sweep.L entry (planned r, L overridden) and per sweep.r entry (r overridden,
// smallest L meeting tau for that r).
std::vector<ExperimentVariant> experiment_variants(const ExperimentConfig& config);

struct Distribution {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

// Nearest-rank percentile: the value at rank ceil(p/100 * n) of the sorted
// sample. Empty input gives 0.
double nearest_rank(std::vector<double> values, double p);
Distribution distribution(const std::vector<double>& values);

inline constexpr const char* kOverTauFlag = "slightly larger than tau";

struct VariantSummary {
  std::string variant;
  std::size_t requests = 0;
  std::size_t planning_misses = 0;
  std::size_t infeasible = 0;
  Distribution user_ttft;
  Distribution ttft_d;
  Distribution tpot_smooth;       // requests with L >= 2 only
  double max_display_tpot = 0.0;  // worst smoothed display gap
  double mean_display_tpot = 0.0;
  Distribution occupancy;
  std::size_t corrections = 0;
  Distribution mask_bytes;
  Millis tau = 0.0;
  std::size_t over_tau = 0;  // requests whose display gap exceeds tau + one tick
  std::optional<ThroughputResult> throughput;

  // kOverTauFlag when any request exceeds tau, else "ok".
  std::string tpot_flag() const;
};

struct MetricsReport {
  std::vector<VariantSummary> variants;
};

VariantSummary summarize(const std::string& variant, const std::vector<TraceRow>& rows);

struct ExperimentResult {
  MetricsReport report;
  std::vector<std::pair<std::string, std::vector<TraceRow>>> traces;  // variant order
};

// Deterministic for a given config: every variant replays the same prompts,
// output lengths, RTT draws and divergence schedules.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_summary_csv(std::ostream& out, const MetricsReport& report);
std::string summary_text(const MetricsReport& report);

// trace_<variant>.csv per variant, summary.csv and summary.txt.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir);

// Re-aggregates trace CSV files; the variant name is taken from the file stem
// with any "trace_" prefix removed. Throughput columns stay empty.
MetricsReport report(const std::vector<std::filesystem::path>& trace_files);

}  // namespace pdd
