#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "pdd/attention_dump.h"
#include "pdd/config.h"
#include "pdd/csv.h"
#include "pdd/errors.h"
#include "pdd/harness.h"
#include "pdd/maskcodec.h"
#include "pdd/planner.h"
#include "pdd/refiner.h"

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pdd::InvalidArgument("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pdd::InvalidArgument("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

pdd::ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto config = path.empty() ? pdd::default_experiment_config() : pdd::load_experiment_config(path);
  if (seed) config.seed = *seed;
  return config;
}

int cmd_plan(const std::string& config_path, const std::optional<std::uint64_t>& seed,
             const std::string& out_dir) {
  const auto config = load_config(config_path, seed);
  const auto table = pdd::build_plan_table(config.devices, config.scenes, config.buckets);
  std::ostringstream csv;
  pdd::write_csv_row(csv, {"scene", "device_class", "bucket", "r", "L", "feasible",
                           "achieved_tpot_smooth"});
  for (const auto& [key, plan] : table.plans()) {
    pdd::write_csv_row(csv, {key.scene, key.device_class, std::to_string(key.bucket),
                             pdd::format_fixed(plan.r), std::to_string(plan.L),
                             plan.feasible ? "1" : "0",
                             pdd::format_fixed(plan.achieved_tpot_smooth)});
  }
  if (out_dir.empty()) {
    std::cout << csv.str();
  } else {
    write_file(fs::path(out_dir) / "plan_table.csv", csv.str());
  }
  return 0;
}

struct RefineArgs {
  std::string prompt;
  std::string prefix;
  std::string suffix;
  std::string attention;
  double r = 0.25;
  std::size_t window = 32;
  std::size_t kernel = 7;
  std::string aggregation = "sum";
};

int cmd_refine(const RefineArgs& a, const std::string& out_dir) {
  const std::string prefix = a.prefix.empty() ? "" : read_file(a.prefix);
  const std::string suffix = a.suffix.empty() ? "" : read_file(a.suffix);
  const auto prompt = pdd::tokenize_prompt(prefix, read_file(a.prompt), suffix);

  std::ifstream in(a.attention, std::ios::binary);
  if (!in) throw pdd::InvalidArgument("cannot read " + a.attention);
  const auto dump = pdd::read_attention_dump(in);
  if (dump.keys != prompt.size()) {
    throw pdd::DimensionMismatch("attention dump has " + std::to_string(dump.keys) +
                                 " keys, prompt has " + std::to_string(prompt.size()) + " tokens");
  }
  pdd::ScoreOptions options;
  options.window = a.window;
  options.kernel = a.kernel;
  if (a.aggregation == "votes") {
    options.aggregation = pdd::HeadAggregation::kHeadVotes;
  } else if (a.aggregation != "sum") {
    throw pdd::InvalidArgument("aggregation must be 'sum' or 'votes'");
  }
  const auto heads = dump.head_weights();
  const auto scores = pdd::score_tokens(heads, prompt.prefix.size(), prompt.content.size(), options);
  const auto mask = pdd::select_sentences(prompt, scores, a.r);
  const auto packed = pdd::pack(mask);

  const fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  write_file(out / "mask.bin",
             std::string_view(reinterpret_cast<const char*>(packed.payload.data()), packed.payload.size()));
  write_file(out / "refined.txt", pdd::detokenize(pdd::refined_text(prompt, mask)) + "\n");
  std::cout << "selected " << mask.popcount() << " of " << mask.size() << " tokens, mask "
            << packed.payload.size() << " bytes\n";
  return 0;
}

// Bit files are text: one '0' or '1' per prompt token, whitespace ignored.
int cmd_mask_pack(const std::string& in_path, const std::string& out_path) {
  std::vector<bool> bits;
  for (char c : read_file(in_path)) {
    if (c == '0' || c == '1') {
      bits.push_back(c == '1');
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      throw pdd::InvalidArgument(std::string("bit file contains '") + c + "'");
    }
  }
  const auto packed = pdd::pack(pdd::SelectionMask(std::move(bits)));
  write_file(out_path,
             std::string_view(reinterpret_cast<const char*>(packed.payload.data()), packed.payload.size()));
  return 0;
}

int cmd_mask_unpack(const std::string& in_path, const std::string& out_path) {
  const std::string bytes = read_file(in_path);
  auto container = pdd::compressed_mask_from_container(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
  const auto mask = pdd::unpack(container);
  std::string text;
  text.reserve(mask.size() + 1);
  for (std::size_t i = 0; i < mask.size(); ++i) text += mask[i] ? '1' : '0';
  text += '\n';
  write_file(out_path, text);
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                 const std::string& out_dir) {
  const auto config = load_config(config_path, seed);
  const auto result = pdd::run_experiment(config);
  pdd::write_experiment(result, out_dir.empty() ? fs::path("out") : fs::path(out_dir));
  std::cout << pdd::summary_text(result.report);
  return 0;
}

int cmd_report(const std::vector<std::string>& traces, const std::string& out_dir) {
  std::vector<fs::path> files(traces.begin(), traces.end());
  const auto report = pdd::report(files);
  const std::string text = pdd::summary_text(report);
  if (!out_dir.empty()) {
    std::ostringstream csv;
    pdd::write_summary_csv(csv, report);
    write_file(fs::path(out_dir) / "summary.csv", csv.str());
    write_file(fs::path(out_dir) / "summary.txt", text);
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cloud-device disaggregated serving simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* plan = app.add_subcommand("plan", "solve the (r, L) plan table");
  common(plan);

  RefineArgs refine_args;
  auto* refine = app.add_subcommand("refine", "select sentences from attention scores");
  common(refine);
  refine->add_option("--prompt", refine_args.prompt, "content text file")->required()->check(CLI::ExistingFile);
  refine->add_option("--prefix", refine_args.prefix, "prefix text file")->check(CLI::ExistingFile);
  refine->add_option("--suffix", refine_args.suffix, "suffix text file")->check(CLI::ExistingFile);
  refine->add_option("--attention", refine_args.attention, "attention dump")->required()->check(CLI::ExistingFile);
  refine->add_option("--ratio,-r", refine_args.r, "retained ratio")->check(CLI::Range(0.0, 1.0));
  refine->add_option("--window", refine_args.window, "observation window rows");
  refine->add_option("--kernel", refine_args.kernel, "max-pooling width (odd)");
  refine->add_option("--aggregation", refine_args.aggregation, "sum or votes");

  auto* mask = app.add_subcommand("mask", "mask codec");
  mask->require_subcommand(1);
  std::string mask_in, mask_out;
  auto* mask_pack = mask->add_subcommand("pack", "bit text file to container");
  auto* mask_unpack = mask->add_subcommand("unpack", "container to bit text file");
  for (auto* sub : {mask_pack, mask_unpack}) {
    sub->add_option("input", mask_in)->required()->check(CLI::ExistingFile);
    sub->add_option("output", mask_out)->required();
  }

  auto* simulate = app.add_subcommand("simulate", "run the discrete-event experiment");
  common(simulate);

  std::vector<std::string> trace_files;
  auto* report = app.add_subcommand("report", "aggregate trace CSV files");
  common(report);
  report->add_option("traces", trace_files, "trace CSV files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) return cmd_plan(config_path, seed, out_dir);
    if (refine->parsed()) return cmd_refine(refine_args, out_dir);
    if (mask_pack->parsed()) return cmd_mask_pack(mask_in, mask_out);
    if (mask_unpack->parsed()) return cmd_mask_unpack(mask_in, mask_out);
    if (simulate->parsed()) return cmd_simulate(config_path, seed, out_dir);
    if (report->parsed()) return cmd_report(trace_files, out_dir);
  } catch (const pdd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
