#include "pdd/harness.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pdd/errors.h"
#include "support.h"

namespace pdd {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pdd_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_config(std::uint64_t seed, std::size_t requests = 12) {
  ExperimentConfig c = default_experiment_config();
  c.seed = seed;
  c.workload.requests = requests;
  c.workload.prompt_lengths = {1024, 4096, 8192};
  c.workload.n_min = 20;
  c.workload.n_max = 120;
  c.batch.completions = 300;
  c.batch.warmup = 30;
  return c;
}

TEST(SyntheticPrompt, ExactTokenCounts) {
  Rng rng(1);
  WorkloadConfig w;
  for (TokenCount l : {17u, 18u, 40u, 1000u, 4096u, 8192u}) {
    for (int t = 0; t < 5; ++t) {
      const auto text = synthetic_prompt(l, w, rng);
      const auto p = tokenize_prompt(text.prefix, text.content, text.suffix);
      ASSERT_EQ(p.size(), l);
      EXPECT_EQ(p.prefix.size(), w.prefix_tokens);
      EXPECT_EQ(p.suffix.size(), w.suffix_tokens);
      EXPECT_NO_THROW(p.validate());
    }
  }
  EXPECT_THROW(synthetic_prompt(16, w, rng), InvalidArgument);
}

TEST(Percentile, NearestRank) {
  const std::vector<double> v{15, 20, 35, 40, 50};
  EXPECT_EQ(nearest_rank(v, 30), 20);
  EXPECT_EQ(nearest_rank(v, 40), 20);
  EXPECT_EQ(nearest_rank(v, 50), 35);
  EXPECT_EQ(nearest_rank(v, 100), 50);
  EXPECT_EQ(nearest_rank(v, 1), 15);
  EXPECT_EQ(nearest_rank({}, 50), 0);
  EXPECT_THROW(nearest_rank(v, 0), InvalidArgument);
  const auto d = distribution(v);
  EXPECT_DOUBLE_EQ(d.mean, 32.0);
  EXPECT_DOUBLE_EQ(d.max, 50.0);
}

TEST(Experiment, DefaultVariants) {
  const auto v = experiment_variants(default_experiment_config());
  std::vector<std::string> names;
  for (const auto& x : v) names.push_back(x.name);
  EXPECT_EQ(names, (std::vector<std::string>{"planned", "cloud_only", "L2", "L5", "L10", "L20", "r0.25",
                                             "r0.5", "r0.75", "r1"}));
}

TEST(Experiment, TraceCountsAndCrossModuleTtft) {
  const auto c = small_config(3);
  const auto res = run_experiment(c);
  const TimingModel& m = c.devices.at("phone");
  ASSERT_EQ(res.traces.size(), res.report.variants.size());
  for (std::size_t v = 0; v < res.traces.size(); ++v) {
    const auto& rows = res.traces[v].second;
    EXPECT_EQ(rows.size(), 12u);
    EXPECT_EQ(res.report.variants[v].requests, rows.size());
    for (const auto& row : rows) {
      EXPECT_DOUBLE_EQ(row.ttft_c, ttft_cloud(m, row.l, row.r, row.rtt));
      EXPECT_DOUBLE_EQ(row.user_ttft, row.ttft_c);
      EXPECT_LE(row.tokens_emitted, row.L);
      EXPECT_DOUBLE_EQ(row.occupancy, request_occupancy(row.ttft_c, m.tpot_c, row.tokens_emitted));
    }
  }
}

TEST(Experiment, PlannedVariantMeetsTau) {
  auto c = small_config(5, 40);
  c.workload.prompt_lengths = {8192};
  const auto res = run_experiment(c);
  const auto& s = res.report.variants.front();
  EXPECT_EQ(s.variant, "planned");
  EXPECT_LE(s.max_display_tpot, 100.0 + kSchedulerTickMs);
  EXPECT_EQ(s.tpot_flag(), "ok");
}

TEST(Experiment, InfeasibleClampIsFlagged) {
  auto c = small_config(5, 10);
  c.scenes["collab"].tau = 33.0;
  c.workload.prompt_lengths = {8192};
  const auto res = run_experiment(c);
  const auto& s = res.report.variants.front();
  EXPECT_EQ(s.infeasible, 10u);
  EXPECT_EQ(s.tpot_flag(), kOverTauFlag);
  EXPECT_NE(summary_text(res.report).find("slightly larger than tau"), std::string::npos);
}

TEST(Experiment, LengthSweepLowersSmoothedTpot) {
  auto c = small_config(8, 6);
  c.workload.prompt_lengths = {4096};
  c.devices["phone"].rtt.jitter_ms = 0.0;
  const auto res = run_experiment(c);
  std::map<std::string, const std::vector<TraceRow>*> by_name;
  for (const auto& [name, rows] : res.traces) by_name[name] = &rows;
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> tpot;
    for (const char* v : {"L2", "L5", "L10", "L20"}) tpot.push_back(*(*by_name[v])[i].tpot_smooth);
    for (std::size_t k = 1; k < tpot.size(); ++k) EXPECT_LT(tpot[k], tpot[k - 1]);
    // The amortized part shrinks exactly 19x; with tpot_d included the
    // 20-token pace is roughly a tenth of the 2-token pace.
    EXPECT_NEAR((tpot[0] - 30.0) / (tpot[3] - 30.0), 19.0, 1e-9);
    EXPECT_GT(tpot[0] / tpot[3], 8.0);
    EXPECT_LT(tpot[0] / tpot[3], 13.0);
  }
}

TEST(Experiment, RatioSweepRaisesDeviceTtft) {
  auto c = small_config(9, 6);
  c.workload.prompt_lengths = {8192};
  const auto res = run_experiment(c);
  std::map<std::string, const std::vector<TraceRow>*> by_name;
  for (const auto& [name, rows] : res.traces) by_name[name] = &rows;
  for (std::size_t i = 0; i < 6; ++i) {
    double prev_ttft = 0.0;
    for (const char* v : {"r0.25", "r0.5", "r0.75", "r1"}) {
      const auto& row = (*by_name[v])[i];
      EXPECT_GT(row.ttft_d, prev_ttft) << v;
      prev_ttft = row.ttft_d;
    }
    // The all-ones mask compresses to almost nothing.
    EXPECT_LT((*by_name["r1"])[i].mask_bytes, (*by_name["r0.25"])[i].mask_bytes);
  }
}

TEST(Experiment, EmptyWorkload) {
  auto c = small_config(1, 0);
  const auto res = run_experiment(c);
  EXPECT_TRUE(res.report.variants.empty());
  EXPECT_TRUE(res.traces.empty());
  const auto dir = scratch("empty");
  write_experiment(res, dir);
  EXPECT_EQ(slurp(dir / "summary.txt"), "no requests\n");
}

TEST(Experiment, ByteIdenticalReplays) {
  const auto c = small_config(11);
  const auto a = scratch("replay_a");
  const auto b = scratch("replay_b");
  write_experiment(run_experiment(c), a);
  write_experiment(run_experiment(c), b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
  }
  EXPECT_EQ(files, 12u);
  auto other = c;
  other.seed = 12;
  const auto d = scratch("replay_c");
  write_experiment(run_experiment(other), d);
  EXPECT_NE(slurp(a / "trace_planned.csv"), slurp(d / "trace_planned.csv"));
}

TEST(Report, ReaggregatesTraceFiles) {
  const auto c = small_config(4);
  const auto res = run_experiment(c);
  const auto dir = scratch("report");
  write_experiment(res, dir);
  const auto back = report({dir / "trace_planned.csv", dir / "trace_L5.csv"});
  ASSERT_EQ(back.variants.size(), 2u);
  EXPECT_EQ(back.variants[0].variant, "planned");
  EXPECT_EQ(back.variants[1].variant, "L5");
  const auto& orig = res.report.variants[0];
  EXPECT_EQ(back.variants[0].requests, orig.requests);
  EXPECT_NEAR(back.variants[0].ttft_d.mean, orig.ttft_d.mean, 1e-3);
  EXPECT_NEAR(back.variants[0].max_display_tpot, orig.max_display_tpot, 1e-3);
  EXPECT_EQ(back.variants[0].corrections, orig.corrections);
  EXPECT_FALSE(back.variants[0].throughput.has_value());
}

TEST(Report, MissingColumnIsReportError) {
  const auto dir = scratch("bad_report");
  std::ofstream(dir / "trace_x.csv") << "request_id,l,r\nreq-0,10,0.5\n";
  EXPECT_THROW(report({dir / "trace_x.csv"}), ReportError);
  EXPECT_THROW(report({dir / "nope.csv"}), ReportError);
}

TEST(Report, BadCellIsReportError) {
  const auto c = small_config(4, 2);
  std::ostringstream csv;
  write_csv_row(csv, trace_columns());
  auto fields = trace_fields(run_experiment(c).traces[0].second[0]);
  fields[4] = "fast";
  write_csv_row(csv, fields);
  std::istringstream in(csv.str());
  EXPECT_THROW(trace_rows(read_csv(in)), ReportError);
}

TEST(Report, TraceRowRoundTrip) {
  const auto rows = run_experiment(small_config(6, 5)).traces[1].second;  // cloud_only has L = *
  std::ostringstream csv;
  write_csv_row(csv, trace_columns());
  for (const auto& r : rows) write_csv_row(csv, trace_fields(r));
  std::istringstream in(csv.str());
  const auto back = trace_rows(read_csv(in));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].L, rows[i].L);
    EXPECT_EQ(trace_fields(back[i]), trace_fields(rows[i]));
  }
}

// Golden files are written by the built system with PDD_UPDATE_GOLDEN=1 and
// then kept frozen.
void check_golden(const std::string& name, const ExperimentConfig& config) {
  const auto dir = scratch("golden_" + name);
  write_experiment(run_experiment(config), dir);
  const fs::path golden = fs::path(PDD_GOLDEN_DIR) / name;
  for (const char* file : {"trace_planned.csv", "summary.csv"}) {
    if (std::getenv("PDD_UPDATE_GOLDEN")) {
      fs::create_directories(golden);
      fs::copy_file(dir / file, golden / file, fs::copy_options::overwrite_existing);
    }
    ASSERT_TRUE(fs::exists(golden / file)) << golden / file;
    EXPECT_EQ(slurp(dir / file), slurp(golden / file)) << name << "/" << file;
  }
}

TEST(Golden, DefaultSeed) { check_golden("default_seed", small_config(42)); }

TEST(Golden, DivergenceOffPolicy) {
  auto c = small_config(7);
  c.workload.divergence_rate = 0.05;
  c.policy = CorrectionPolicy::kOff;
  check_golden("divergence_off", c);
}

TEST(Golden, LteCloudWins) {
  auto c = small_config(99);
  c.devices["phone"].rtt = lte_rtt();
  c.workload.divergence_rate = 0.02;
  c.batch.arrivals = BatchModel::Arrivals::kPoisson;
  c.batch.arrival_rate_per_s = 30.0;
  check_golden("lte_cloud_wins", c);
}

}  // namespace
}  // namespace pdd
