#include "pdd/config.h"

#include <fstream>

#include "pdd/errors.h"

namespace pdd {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(join(path, it.key()), "unknown key");
  }
}

double get_number(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  return v.get<double>();
}

std::uint64_t get_count(const json& j, const std::string& path, const char* key,
                        std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(join(path, key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

TokenCount get_tokens(const json& j, const std::string& path, const char* key, TokenCount fallback) {
  const auto v = get_count(j, path, key, fallback);
  if (v > std::numeric_limits<TokenCount>::max()) throw ConfigError(join(path, key), "too large");
  return static_cast<TokenCount>(v);
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

std::vector<TokenCount> get_token_list(const json& j, const std::string& path, const char* key,
                                       std::vector<TokenCount> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  const std::string p = join(path, key);
  if (!v.is_array()) throw ConfigError(p, "expected an array");
  std::vector<TokenCount> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_unsigned() || v[i].get<std::uint64_t>() > std::numeric_limits<TokenCount>::max()) {
      throw ConfigError(p + "[" + std::to_string(i) + "]", "expected a token count");
    }
    out.push_back(v[i].get<TokenCount>());
  }
  return out;
}

AffineCost cost_from_json(const json& j, const std::string& path, AffineCost fallback) {
  reject_unknown(j, path, {"base_ms", "per_token_ms"});
  return AffineCost{get_number(j, path, "base_ms", fallback.base_ms),
                    get_number(j, path, "per_token_ms", fallback.per_token_ms)};
}

RttClass rtt_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "WIFI") return wifi_rtt();
    if (name == "LTE") return lte_rtt();
    throw ConfigError(path, "unknown RTT class '" + name + "'");
  }
  reject_unknown(j, path, {"class", "mean_ms", "jitter_ms"});
  RttClass rtt = wifi_rtt();
  rtt.name = get_string(j, path, "class", rtt.name);
  rtt.mean_ms = get_number(j, path, "mean_ms", rtt.mean_ms);
  rtt.jitter_ms = get_number(j, path, "jitter_ms", rtt.jitter_ms);
  return rtt;
}

json cost_to_json(const AffineCost& c) { return {{"base_ms", c.base_ms}, {"per_token_ms", c.per_token_ms}}; }

}  // namespace

TimingModel timing_model_from_json(const json& j, const std::string& path) {
  reject_unknown(j, path, {"k_c", "k_d", "tpot_c", "tpot_d", "rtt", "compress", "decompress",
                           "delta", "max_tokens"});
  TimingModel m = calibrated_timing_model();
  m.k_c = get_number(j, path, "k_c", m.k_c);
  m.k_d = get_number(j, path, "k_d", m.k_d);
  m.tpot_c = get_number(j, path, "tpot_c", m.tpot_c);
  m.tpot_d = get_number(j, path, "tpot_d", m.tpot_d);
  if (j.contains("rtt")) m.rtt = rtt_from_json(j.at("rtt"), join(path, "rtt"));
  if (j.contains("compress")) m.compress = cost_from_json(j.at("compress"), join(path, "compress"), m.compress);
  if (j.contains("decompress")) {
    m.decompress = cost_from_json(j.at("decompress"), join(path, "decompress"), m.decompress);
  }
  if (j.contains("delta")) m.delta_override = cost_from_json(j.at("delta"), join(path, "delta"), {});
  m.max_tokens = get_tokens(j, path, "max_tokens", m.max_tokens);
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.empty() ? "<root>" : path, e.what());
  }
  return m;
}

PlanConstraints constraints_from_json(const json& j, const std::string& path) {
  reject_unknown(j, path, {"xi_scene", "tau"});
  PlanConstraints c;
  c.xi_scene = get_number(j, path, "xi_scene", c.xi_scene);
  c.tau = get_number(j, path, "tau", c.tau);
  if (!(c.xi_scene >= 0.0 && c.xi_scene <= 1.0)) {
    throw ConfigError(join(path, "xi_scene"), "must lie in [0, 1]");
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (devices.empty()) throw ConfigError("devices", "at least one device class required");
  if (scenes.empty()) throw ConfigError("scenes", "at least one scene required");
  if (buckets.empty()) throw ConfigError("buckets", "must be nonempty");
  for (const auto& [name, c] : scenes) {
    for (const auto& [device, m] : devices) {
      if (!(c.tau > m.tpot_d)) {
        throw ConfigError("scenes." + name + ".tau", "must exceed tpot_d of device '" + device + "'");
      }
    }
  }
  const auto& w = workload;
  if (!devices.count(w.device_class)) {
    throw ConfigError("workload.device_class", "no device class '" + w.device_class + "'");
  }
  if (!scenes.count(w.scene)) throw ConfigError("workload.scene", "no scene '" + w.scene + "'");
  if (w.prompt_lengths.empty()) throw ConfigError("workload.prompt_lengths", "must be nonempty");
  for (std::size_t i = 0; i < w.prompt_lengths.size(); ++i) {
    if (w.prompt_lengths[i] < w.prefix_tokens + w.suffix_tokens + 1) {
      throw ConfigError("workload.prompt_lengths[" + std::to_string(i) + "]",
                        "shorter than prefix + suffix + 1");
    }
  }
  if (w.n_min < 1 || w.n_min > w.n_max) throw ConfigError("workload.n_min", "need 1 <= n_min <= n_max");
  if (w.sentence_min < 2 || w.sentence_min > w.sentence_max) {
    throw ConfigError("workload.sentence_min", "need 2 <= sentence_min <= sentence_max");
  }
  if (!(w.arrival_rate_per_s > 0.0)) throw ConfigError("workload.arrival_rate_per_s", "must be positive");
  if (!(w.divergence_rate >= 0.0 && w.divergence_rate <= 1.0)) {
    throw ConfigError("workload.divergence_rate", "must lie in [0, 1]");
  }
  if (batch.slots == 0) throw ConfigError("batch.slots", "must be positive");
  if (batch.completions == 0) throw ConfigError("batch.completions", "must be positive");
  for (std::size_t i = 0; i < sweep_L.size(); ++i) {
    if (sweep_L[i] < 1) throw ConfigError("sweep.L[" + std::to_string(i) + "]", "must be >= 1");
  }
  for (std::size_t i = 0; i < sweep_r.size(); ++i) {
    if (!(sweep_r[i] > 0.0 && sweep_r[i] <= 1.0)) {
      throw ConfigError("sweep.r[" + std::to_string(i) + "]", "must lie in (0, 1]");
    }
  }
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.devices.emplace("phone", calibrated_timing_model());
  c.scenes.emplace("collab", PlanConstraints{0.25, 100.0});
  c.sweep_L = {2, 5, 10, 20};
  c.sweep_r = {0.25, 0.5, 0.75, 1.0};
  return c;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  reject_unknown(j, "", {"seed", "devices", "scenes", "buckets", "workload", "policy", "batch",
                         "sweep", "scrub_rules"});
  ExperimentConfig c;
  c.seed = get_count(j, "", "seed", c.seed);

  if (j.contains("devices")) {
    const auto& d = j.at("devices");
    if (!d.is_object()) throw ConfigError("devices", "expected an object");
    for (auto it = d.begin(); it != d.end(); ++it) {
      c.devices.emplace(it.key(), timing_model_from_json(it.value(), "devices." + it.key()));
    }
  } else {
    c.devices.emplace("phone", calibrated_timing_model());
  }
  if (j.contains("scenes")) {
    const auto& s = j.at("scenes");
    if (!s.is_object()) throw ConfigError("scenes", "expected an object");
    for (auto it = s.begin(); it != s.end(); ++it) {
      c.scenes.emplace(it.key(), constraints_from_json(it.value(), "scenes." + it.key()));
    }
  } else {
    c.scenes.emplace("collab", PlanConstraints{0.25, 100.0});
  }
  c.buckets = get_token_list(j, "", "buckets", c.buckets);

  if (j.contains("workload")) {
    const auto& w = j.at("workload");
    const std::string p = "workload";
    reject_unknown(w, p, {"requests", "arrival_rate_per_s", "prompt_lengths", "n_min", "n_max",
                          "scene", "device_class", "model_version_label", "prefix_tokens",
                          "suffix_tokens", "sentence_min", "sentence_max", "divergence_rate"});
    auto& o = c.workload;
    o.requests = get_count(w, p, "requests", o.requests);
    o.arrival_rate_per_s = get_number(w, p, "arrival_rate_per_s", o.arrival_rate_per_s);
    o.prompt_lengths = get_token_list(w, p, "prompt_lengths", o.prompt_lengths);
    o.n_min = get_tokens(w, p, "n_min", o.n_min);
    o.n_max = get_tokens(w, p, "n_max", o.n_max);
    o.scene = get_string(w, p, "scene", o.scene);
    o.device_class = get_string(w, p, "device_class", o.device_class);
    o.model_version_label = get_string(w, p, "model_version_label", o.model_version_label);
    o.prefix_tokens = get_tokens(w, p, "prefix_tokens", o.prefix_tokens);
    o.suffix_tokens = get_tokens(w, p, "suffix_tokens", o.suffix_tokens);
    o.sentence_min = get_tokens(w, p, "sentence_min", o.sentence_min);
    o.sentence_max = get_tokens(w, p, "sentence_max", o.sentence_max);
    o.divergence_rate = get_number(w, p, "divergence_rate", o.divergence_rate);
  }

  if (j.contains("policy")) {
    if (!j.at("policy").is_string()) throw ConfigError("policy", "expected a string");
    try {
      c.policy = correction_policy_from_string(j.at("policy").get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigError("policy", e.what());
    }
  }

  if (j.contains("batch")) {
    const auto& b = j.at("batch");
    reject_unknown(b, "batch", {"slots", "arrivals", "arrival_rate_per_s", "completions", "warmup"});
    const auto slots = get_count(b, "batch", "slots", c.batch.slots);
    if (slots > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("batch.slots", "too large");
    c.batch.slots = static_cast<std::uint32_t>(slots);
    const auto arrivals = get_string(b, "batch", "arrivals", "closed");
    if (arrivals == "closed") {
      c.batch.arrivals = BatchModel::Arrivals::kClosedLoop;
    } else if (arrivals == "poisson") {
      c.batch.arrivals = BatchModel::Arrivals::kPoisson;
    } else {
      throw ConfigError("batch.arrivals", "expected 'closed' or 'poisson'");
    }
    c.batch.arrival_rate_per_s = get_number(b, "batch", "arrival_rate_per_s", c.batch.arrival_rate_per_s);
    c.batch.completions = get_count(b, "batch", "completions", c.batch.completions);
    c.batch.warmup = get_count(b, "batch", "warmup", c.batch.warmup);
  }

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    reject_unknown(s, "sweep", {"L", "r"});
    if (s.contains("L")) {
      c.sweep_L = get_token_list(s, "sweep", "L", {});
      if (c.sweep_L.empty()) throw ConfigError("sweep.L", "must be nonempty when given");
    }
    if (s.contains("r")) {
      const auto& r = s.at("r");
      if (!r.is_array() || r.empty()) throw ConfigError("sweep.r", "expected a nonempty array");
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (!r[i].is_number()) throw ConfigError("sweep.r[" + std::to_string(i) + "]", "expected a number");
        c.sweep_r.push_back(r[i].get<double>());
      }
    }
  }

  if (j.contains("scrub_rules")) {
    const auto& rules = j.at("scrub_rules");
    if (!rules.is_array()) throw ConfigError("scrub_rules", "expected an array");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const std::string p = "scrub_rules[" + std::to_string(i) + "]";
      reject_unknown(rules[i], p, {"pattern", "replacement"});
      if (!rules[i].contains("pattern")) throw ConfigError(p + ".pattern", "missing");
      c.scrub_rules.push_back(ScrubRule{get_string(rules[i], p, "pattern", ""),
                                        get_string(rules[i], p, "replacement", "")});
    }
  }

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string(), std::string("invalid JSON: ") + e.what());
  }
  return experiment_config_from_json(j);
}

json to_json(const TimingModel& m) {
  json j{{"k_c", m.k_c},
         {"k_d", m.k_d},
         {"tpot_c", m.tpot_c},
         {"tpot_d", m.tpot_d},
         {"rtt", {{"class", m.rtt.name}, {"mean_ms", m.rtt.mean_ms}, {"jitter_ms", m.rtt.jitter_ms}}},
         {"compress", cost_to_json(m.compress)},
         {"decompress", cost_to_json(m.decompress)},
         {"max_tokens", m.max_tokens}};
  if (m.delta_override) j["delta"] = cost_to_json(*m.delta_override);
  return j;
}

json to_json(const ExperimentConfig& c) {
  json devices = json::object();
  for (const auto& [name, m] : c.devices) devices[name] = to_json(m);
  json scenes = json::object();
  for (const auto& [name, s] : c.scenes) scenes[name] = {{"xi_scene", s.xi_scene}, {"tau", s.tau}};
  const auto& w = c.workload;
  json rules = json::array();
  for (const auto& r : c.scrub_rules) rules.push_back({{"pattern", r.pattern}, {"replacement", r.replacement}});
  return json{
      {"seed", c.seed},
      {"devices", devices},
      {"scenes", scenes},
      {"buckets", c.buckets},
      {"workload",
       {{"requests", w.requests},
        {"arrival_rate_per_s", w.arrival_rate_per_s},
        {"prompt_lengths", w.prompt_lengths},
        {"n_min", w.n_min},
        {"n_max", w.n_max},
        {"scene", w.scene},
        {"device_class", w.device_class},
        {"model_version_label", w.model_version_label},
        {"prefix_tokens", w.prefix_tokens},
        {"suffix_tokens", w.suffix_tokens},
        {"sentence_min", w.sentence_min},
        {"sentence_max", w.sentence_max},
        {"divergence_rate", w.divergence_rate}}},
      {"policy", to_string(c.policy)},
      {"batch",
       {{"slots", c.batch.slots},
        {"arrivals", c.batch.arrivals == BatchModel::Arrivals::kClosedLoop ? "closed" : "poisson"},
        {"arrival_rate_per_s", c.batch.arrival_rate_per_s},
        {"completions", c.batch.completions},
        {"warmup", c.batch.warmup}}},
      {"sweep", {{"L", c.sweep_L}, {"r", c.sweep_r}}},
      {"scrub_rules", rules}};
}

}  // namespace pdd
