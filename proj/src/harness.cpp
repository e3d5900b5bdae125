#include "pdd/harness.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pdd/devicesim.h"
#include "pdd/errors.h"

namespace pdd {

namespace {

constexpr const char* kWords[] = {
    "river", "stone", "cloud", "signal", "orbit",  "lantern", "meadow", "copper",
    "engine", "harbor", "violet", "summit", "ledger", "canyon", "fabric", "needle",
    "garden", "marble", "thread", "beacon", "valley", "window", "anchor", "pebble",
    "market", "spiral", "forest", "candle", "bridge", "quartz", "saddle", "timber",
};
constexpr std::size_t kWordCount = sizeof(kWords) / sizeof(kWords[0]);

void append_words(std::string& out, TokenCount n, Rng& rng) {
  for (TokenCount i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += kWords[rng.uniform_int(0, kWordCount - 1)];
  }
}

std::string format_L(TokenCount L) { return L == kGenerateAll ? "*" : std::to_string(L); }

std::string format_optional(const std::optional<Millis>& v) {
  return v ? format_fixed(*v) : std::string();
}

double parse_double(const std::string& cell, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ReportError("column " + column + ": cannot parse '" + cell + "'");
  }
}

std::uint64_t parse_count(const std::string& cell, const std::string& column) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(cell, &used);
    if (used != cell.size() || cell.front() == '-') throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ReportError("column " + column + ": cannot parse '" + cell + "'");
  }
}

// Smallest L meeting tau for a fixed r, clamped to the occupancy ceiling when
// the interval is empty. Mirrors solve_plan's choice of L.
Plan plan_for_ratio(const TimingModel& model, const PlanConstraints& constraints, TokenCount l,
                    Millis rtt, double r) {
  const Millis ttft_c = ttft_cloud(model, l, r, rtt);
  const Millis ttft_d = ttft_device(model, l, r, ttft_c);
  const LengthInterval lb = l_bounds(model, constraints, l, r, ttft_c, ttft_d);
  const auto L = static_cast<TokenCount>(lb.empty() ? std::max<std::int64_t>(lb.hi, 1) : lb.lo);
  return evaluate_plan(model, constraints, l, rtt, r, L);
}

PlanTable map_table(const PlanTable& base, const ExperimentConfig& config,
                    const std::function<Plan(const Plan&, const TimingModel&,
                                             const PlanConstraints&, TokenCount)>& f) {
  std::map<PlanKey, Plan> plans;
  for (const auto& [key, plan] : base.plans()) {
    plans.emplace(key, f(plan, config.devices.at(key.device_class), config.scenes.at(key.scene),
                         key.bucket));
  }
  return PlanTable(base.buckets(), std::move(plans));
}

std::string variant_label(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

struct RequestPlan {
  std::size_t index;
  Millis start;
  TokenCount l;
  TokenCount n;
  Millis rtt;
  std::uint64_t seed;
  std::set<std::uint32_t> divergences;
  AssistRequest request;
};

std::vector<RequestPlan> draw_requests(const ExperimentConfig& config) {
  const auto& w = config.workload;
  const Scrubber scrub(config.scrub_rules);
  const TimingModel& model = config.devices.at(w.device_class);
  Rng arrivals(hash_combine(config.seed, 0x61727276));
  std::vector<RequestPlan> out;
  Millis clock = 0.0;
  for (std::size_t i = 0; i < w.requests; ++i) {
    Rng rng(hash_combine(config.seed, i + 1));
    RequestPlan p;
    p.index = i;
    clock += arrivals.exponential(w.arrival_rate_per_s) * 1000.0;
    p.start = clock;
    p.l = w.prompt_lengths[rng.uniform_int(0, w.prompt_lengths.size() - 1)];
    p.n = static_cast<TokenCount>(rng.uniform_int(w.n_min, w.n_max));
    p.rtt = sample_rtt(model.rtt, rng);
    p.seed = rng.next();
    for (std::uint32_t pos = 1; pos < p.n; ++pos) {
      if (w.divergence_rate > 0.0 && rng.uniform() < w.divergence_rate) p.divergences.insert(pos);
    }
    PromptText text = synthetic_prompt(p.l, w, rng);
    p.request = AssistRequest{w.scene,
                              w.model_version_label,
                              w.device_class,
                              scrub.empty() ? std::move(text.prefix) : scrub(text.prefix),
                              scrub.empty() ? std::move(text.content) : scrub(text.content),
                              scrub.empty() ? std::move(text.suffix) : scrub(text.suffix),
                              "req-" + std::to_string(i)};
    out.push_back(std::move(p));
  }
  return out;
}

TraceRow run_request(const RequestPlan& p, const ExperimentConfig& config, const PlanTable& plans) {
  const auto& w = config.workload;
  const TimingModel& model = config.devices.at(w.device_class);
  const TokenSource cloud_source{p.seed, p.n, {}};
  const TokenSource device_source{p.seed, p.n, p.divergences};

  ServeOptions options;
  options.start = p.start;
  options.rtt_sample = p.rtt;
  options.scorer = synthetic_scores(config.seed);
  const CloudSession s = serve_request(p.request, plans, model, cloud_source, options);
  const DeviceTrace t = run_session(s.prompt, s.wire, p.start, model, device_source, config.policy);

  TraceRow row;
  row.request_id = s.record.request_id;
  row.l = s.record.prompt_tokens;
  row.r = s.record.plan.r;
  row.L = s.record.plan.L;
  row.rtt = p.rtt;
  row.ttft_c = s.record.ttft_c;
  row.occupancy = s.record.occupancy;
  row.tokens_emitted = s.record.tokens_emitted;
  row.ttft_d = t.ttft_d;
  row.user_ttft = t.user_ttft;
  row.tpot_smooth = t.tpot_smooth;
  row.max_display_gap = t.max_smoothed_gap;
  row.mean_display_gap = t.mean_smoothed_gap;
  row.catch_up_lag = t.catch_up_lag;
  row.corrections = t.corrections;
  row.common_prefix_len = t.common_prefix_len;
  row.mask_bytes = t.mask_payload_bytes;
  row.feasible = s.record.plan.feasible;
  row.planning_miss = s.record.planning_miss;
  row.tau = config.scenes.at(w.scene).tau;
  return row;
}

PlanVariant throughput_variant(const ExperimentVariant& v, const WorkloadConfig& w) {
  return PlanVariant{v.name, [&v, &w](TokenCount l) {
                       if (auto plan = v.plans.lookup(w.scene, w.device_class, l)) return *plan;
                       return Plan{1.0, kGenerateAll, false, 0.0, 0.0};
                     }};
}

void write_distribution(std::vector<std::string>& fields, const Distribution& d) {
  for (double v : {d.mean, d.p50, d.p95, d.p99, d.max}) fields.push_back(format_fixed(v));
}

}  // namespace

PromptText synthetic_prompt(TokenCount total, const WorkloadConfig& w, Rng& rng) {
  if (total < w.prefix_tokens + w.suffix_tokens + 1) {
    throw InvalidArgument("prompt of " + std::to_string(total) + " tokens cannot hold prefix and suffix");
  }
  if (w.sentence_min < 2 || w.sentence_min > w.sentence_max) {
    throw InvalidArgument("need 2 <= sentence_min <= sentence_max");
  }
  PromptText out;
  append_words(out.prefix, w.prefix_tokens, rng);
  append_words(out.suffix, w.suffix_tokens, rng);

  TokenCount remaining = total - w.prefix_tokens - w.suffix_tokens;
  while (remaining > 0) {
    auto s = static_cast<TokenCount>(rng.uniform_int(w.sentence_min, w.sentence_max));
    if (s >= remaining || remaining - s < w.sentence_min) s = remaining;
    if (s == 1) {
      append_words(out.content, 1, rng);
    } else {
      append_words(out.content, s - 1, rng);
      out.content += '.';
    }
    remaining -= s;
  }
  return out;
}

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> kColumns{
      "request_id",  "l",          "r",          "L",
      "ttft_c",      "occupancy",  "tokens_emitted", "rtt",
      "ttft_d",      "user_ttft",  "tpot_smooth", "max_display_gap",
      "mean_display_gap", "catch_up_lag", "corrections", "common_prefix_len",
      "mask_bytes",  "feasible",   "planning_miss", "tau"};
  return kColumns;
}

std::vector<std::string> trace_fields(const TraceRow& row) {
  return {row.request_id,
          std::to_string(row.l),
          format_fixed(row.r),
          format_L(row.L),
          format_fixed(row.ttft_c),
          format_fixed(row.occupancy),
          std::to_string(row.tokens_emitted),
          format_fixed(row.rtt),
          format_fixed(row.ttft_d),
          format_fixed(row.user_ttft),
          format_optional(row.tpot_smooth),
          format_fixed(row.max_display_gap),
          format_fixed(row.mean_display_gap),
          format_optional(row.catch_up_lag),
          std::to_string(row.corrections),
          std::to_string(row.common_prefix_len),
          std::to_string(row.mask_bytes),
          row.feasible ? "1" : "0",
          row.planning_miss ? "1" : "0",
          format_fixed(row.tau)};
}

std::vector<TraceRow> trace_rows(const CsvTable& table) {
  std::map<std::string, std::size_t> col;
  for (const auto& name : trace_columns()) col[name] = table.column(name);

  std::vector<TraceRow> rows;
  rows.reserve(table.rows.size());
  for (const auto& cells : table.rows) {
    auto cell = [&](const char* name) -> const std::string& { return cells[col.at(name)]; };
    auto num = [&](const char* name) { return parse_double(cell(name), name); };
    auto count = [&](const char* name) { return parse_count(cell(name), name); };
    auto opt = [&](const char* name) -> std::optional<Millis> {
      if (cell(name).empty()) return std::nullopt;
      return num(name);
    };
    TraceRow r;
    r.request_id = cell("request_id");
    r.l = static_cast<TokenCount>(count("l"));
    r.r = num("r");
    r.L = cell("L") == "*" ? kGenerateAll : static_cast<TokenCount>(count("L"));
    r.ttft_c = num("ttft_c");
    r.occupancy = num("occupancy");
    r.tokens_emitted = static_cast<TokenCount>(count("tokens_emitted"));
    r.rtt = num("rtt");
    r.ttft_d = num("ttft_d");
    r.user_ttft = num("user_ttft");
    r.tpot_smooth = opt("tpot_smooth");
    r.max_display_gap = num("max_display_gap");
    r.mean_display_gap = num("mean_display_gap");
    r.catch_up_lag = opt("catch_up_lag");
    r.corrections = count("corrections");
    r.common_prefix_len = count("common_prefix_len");
    r.mask_bytes = count("mask_bytes");
    r.feasible = count("feasible") != 0;
    r.planning_miss = count("planning_miss") != 0;
    r.tau = num("tau");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ExperimentVariant> experiment_variants(const ExperimentConfig& config) {
  config.validate();
  const PlanTable planned = build_plan_table(config.devices, config.scenes, config.buckets);
  std::vector<ExperimentVariant> out;
  out.push_back({"planned", planned});
  out.push_back({"cloud_only", map_table(planned, config, [](const Plan&, const TimingModel& m,
                                                             const PlanConstraints&, TokenCount l) {
                   Plan p{1.0, kGenerateAll, false, 0.0, 0.0};
                   p.ttft_d_estimate = ttft_cloud(m, l, 1.0, m.rtt.mean_ms);
                   return p;
                 })});
  for (TokenCount L : config.sweep_L) {
    out.push_back({"L" + std::to_string(L),
                   map_table(planned, config, [L](const Plan& base, const TimingModel& m,
                                                  const PlanConstraints& c, TokenCount l) {
                     return evaluate_plan(m, c, l, m.rtt.mean_ms, base.r, L);
                   })});
  }
  for (double r : config.sweep_r) {
    out.push_back({"r" + variant_label(r),
                   map_table(planned, config, [r](const Plan&, const TimingModel& m,
                                                  const PlanConstraints& c, TokenCount l) {
                     return plan_for_ratio(m, c, l, m.rtt.mean_ms, r);
                   })});
  }
  return out;
}

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  if (!(p > 0.0 && p <= 100.0)) throw InvalidArgument("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

Distribution distribution(const std::vector<double>& values) {
  Distribution d;
  if (values.empty()) return d;
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  d.p50 = nearest_rank(values, 50);
  d.p95 = nearest_rank(values, 95);
  d.p99 = nearest_rank(values, 99);
  d.max = *std::max_element(values.begin(), values.end());
  return d;
}

std::string VariantSummary::tpot_flag() const { return over_tau > 0 ? kOverTauFlag : "ok"; }

VariantSummary summarize(const std::string& variant, const std::vector<TraceRow>& rows) {
  VariantSummary s;
  s.variant = variant;
  s.requests = rows.size();
  std::vector<double> user_ttft, ttft_d, tpot, occupancy, mask;
  double gap_sum = 0.0;
  std::size_t gap_rows = 0;
  for (const auto& r : rows) {
    s.planning_misses += r.planning_miss ? 1 : 0;
    s.infeasible += r.feasible ? 0 : 1;
    user_ttft.push_back(r.user_ttft);
    ttft_d.push_back(r.ttft_d);
    if (r.tpot_smooth) tpot.push_back(*r.tpot_smooth);
    occupancy.push_back(r.occupancy);
    mask.push_back(static_cast<double>(r.mask_bytes));
    s.corrections += r.corrections;
    s.max_display_tpot = std::max(s.max_display_tpot, r.max_display_gap);
    if (r.tokens_emitted >= 2) {
      gap_sum += r.mean_display_gap;
      ++gap_rows;
    }
    s.tau = std::max(s.tau, r.tau);
    if (r.max_display_gap > r.tau + kSchedulerTickMs) ++s.over_tau;
  }
  s.user_ttft = distribution(user_ttft);
  s.ttft_d = distribution(ttft_d);
  s.tpot_smooth = distribution(tpot);
  s.occupancy = distribution(occupancy);
  s.mask_bytes = distribution(mask);
  if (gap_rows > 0) s.mean_display_tpot = gap_sum / static_cast<double>(gap_rows);
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  if (config.workload.requests == 0) return result;

  const auto requests = draw_requests(config);
  const auto variants = experiment_variants(config);
  const auto& w = config.workload;

  ThroughputWorkload tw;
  tw.model = config.devices.at(w.device_class);
  tw.prompt_lengths = w.prompt_lengths;
  tw.n_min = w.n_min;
  tw.n_max = w.n_max;
  tw.seed = config.seed;

  for (const auto& v : variants) {
    std::vector<TraceRow> rows;
    rows.reserve(requests.size());
    for (const auto& p : requests) rows.push_back(run_request(p, config, v.plans));
    VariantSummary s = summarize(v.name, rows);
    s.throughput = run_throughput(config.batch, tw, throughput_variant(v, w));
    result.report.variants.push_back(std::move(s));
    result.traces.emplace_back(v.name, std::move(rows));
  }
  return result;
}

void write_summary_csv(std::ostream& out, const MetricsReport& report) {
  std::vector<std::string> header{"variant", "requests", "planning_misses", "infeasible"};
  for (const char* metric : {"user_ttft", "ttft_d", "tpot_smooth", "occupancy", "mask_bytes"}) {
    for (const char* stat : {"mean", "p50", "p95", "p99", "max"}) {
      header.push_back(std::string(metric) + "_" + stat);
    }
  }
  for (const char* c : {"max_display_tpot", "mean_display_tpot", "tau", "over_tau", "tpot_flag",
                        "corrections", "tps", "analytic_tps", "tps_mean_occupancy"}) {
    header.push_back(c);
  }
  write_csv_row(out, header);
  for (const auto& s : report.variants) {
    std::vector<std::string> f{s.variant, std::to_string(s.requests),
                               std::to_string(s.planning_misses), std::to_string(s.infeasible)};
    for (const auto* d : {&s.user_ttft, &s.ttft_d, &s.tpot_smooth, &s.occupancy, &s.mask_bytes}) {
      write_distribution(f, *d);
    }
    f.push_back(format_fixed(s.max_display_tpot));
    f.push_back(format_fixed(s.mean_display_tpot));
    f.push_back(format_fixed(s.tau));
    f.push_back(std::to_string(s.over_tau));
    f.push_back(s.tpot_flag());
    f.push_back(std::to_string(s.corrections));
    if (s.throughput) {
      f.push_back(format_fixed(s.throughput->tps));
      f.push_back(format_fixed(s.throughput->analytic_tps));
      f.push_back(format_fixed(s.throughput->mean_occupancy));
    } else {
      f.insert(f.end(), 3, std::string());
    }
    write_csv_row(out, f);
  }
}

std::string summary_text(const MetricsReport& report) {
  std::ostringstream os;
  if (report.variants.empty()) {
    os << "no requests\n";
    return os.str();
  }
  const VariantSummary* baseline = nullptr;
  for (const auto& s : report.variants) {
    if (s.variant == "cloud_only" && s.throughput) baseline = &s;
  }
  for (const auto& s : report.variants) {
    os << "variant " << s.variant << ": " << s.requests << " requests";
    if (s.planning_misses) os << ", " << s.planning_misses << " planning misses";
    if (s.infeasible) os << ", " << s.infeasible << " infeasible plans";
    os << '\n';
    os << "  user TTFT ms   mean " << format_fixed(s.user_ttft.mean, 1) << "  p50 "
       << format_fixed(s.user_ttft.p50, 1) << "  p95 " << format_fixed(s.user_ttft.p95, 1) << '\n';
    os << "  TTFT_d ms      mean " << format_fixed(s.ttft_d.mean, 1) << "  p95 "
       << format_fixed(s.ttft_d.p95, 1) << '\n';
    os << "  display TPOT   max " << format_fixed(s.max_display_tpot, 1) << "  mean "
       << format_fixed(s.mean_display_tpot, 1) << "  (tau " << format_fixed(s.tau, 1) << ")";
    if (s.over_tau) {
      os << "  TPOT " << kOverTauFlag << " on " << s.over_tau << " requests";
    }
    os << '\n';
    os << "  occupancy ms   mean " << format_fixed(s.occupancy.mean, 1) << '\n';
    os << "  mask bytes     mean " << format_fixed(s.mask_bytes.mean, 1) << "  max "
       << format_fixed(s.mask_bytes.max, 0) << '\n';
    os << "  corrections    " << s.corrections << '\n';
    if (s.throughput) {
      os << "  cloud TPS      " << format_fixed(s.throughput->tps, 3) << "  (analytic "
         << format_fixed(s.throughput->analytic_tps, 3) << ")";
      if (baseline && baseline->throughput->tps > 0.0) {
        os << "  x" << format_fixed(s.throughput->tps / baseline->throughput->tps, 2)
           << " vs cloud_only";
      }
      os << '\n';
    }
  }
  return os.str();
}

void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw ReportError("cannot write " + (out_dir / name).string());
    return out;
  };
  for (const auto& [variant, rows] : result.traces) {
    auto out = open("trace_" + variant + ".csv");
    write_csv_row(out, trace_columns());
    for (const auto& row : rows) write_csv_row(out, trace_fields(row));
  }
  {
    auto out = open("summary.csv");
    write_summary_csv(out, result.report);
  }
  auto out = open("summary.txt");
  out << summary_text(result.report);
}

MetricsReport report(const std::vector<std::filesystem::path>& trace_files) {
  MetricsReport out;
  for (const auto& file : trace_files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ReportError("cannot read " + file.string());
    const CsvTable table = read_csv(in);
    std::string name = file.stem().string();
    if (name.rfind("trace_", 0) == 0) name = name.substr(6);
    try {
      out.variants.push_back(summarize(name, trace_rows(table)));
    } catch (const ReportError& e) {
      throw ReportError(file.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pdd
