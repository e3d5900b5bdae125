#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pdd/planner.h"
#include "pdd/protocol.h"
#include "pdd/refiner.h"
#include "pdd/rng.h"
#include "pdd/timing.h"
#include "pdd/token_source.h"

namespace pdd {

// L value meaning "decode until EOT" (plain cloud serving). Sent verbatim in
// the first frame's L field.
inline constexpr TokenCount kGenerateAll = std::numeric_limits<TokenCount>::max();

// Bytes that reach the device at a simulated instant.
struct TimedChunk {
  Millis at = 0.0;
  std::string bytes;
};

struct SessionRecord {
  std::string request_id;
  Plan plan;
  bool planning_miss = false;
  TokenCount prompt_tokens = 0;
  TokenCount tokens_emitted = 0;
  Millis ttft_c = 0.0;
  Millis occupancy = 0.0;
  Millis slot_released_at = 0.0;
};

struct CloudSession {
  TokenizedPrompt prompt;
  SelectionMask mask;
  FirstTokenFrame first_frame;
  std::vector<StreamEvent> events;
  std::vector<TimedChunk> wire;  // first frame, events, end marker
  SessionRecord record;
};

// Importance scores for the content tokens of a prompt. The simulator has no
// model, so the default provider derives sentence-clustered pseudo-attention
// scores from a hash of the content.
using ScoreProvider = std::function<TokenScores(const TokenizedPrompt&)>;
ScoreProvider synthetic_scores(std::uint64_t seed);

struct ServeOptions {
  Millis start = 0.0;       // request arrival at the cloud
  Millis rtt_sample = 0.0;  // network round trip charged to this request
  ScoreProvider scorer;     // defaults to synthetic_scores(0)
};

// Cloud control for one request: prefill, refinement at plan.r, first frame
// carrying token#mask#L, then one event per tpot_c until L-1 events or EOT.
// A missing plan falls back to r = 1, L = kGenerateAll with planning_miss set.
CloudSession serve_request(const AssistRequest& request, const PlanTable& plans,
                           const TimingModel& model, const TokenSource& source,
                           const ServeOptions& options);

// ---------------------------------------------------------------------------
// Throughput harness

struct BatchModel {
  enum class Arrivals { kClosedLoop, kPoisson };

  std::uint32_t slots = 64;
  Arrivals arrivals = Arrivals::kClosedLoop;
  double arrival_rate_per_s = 10.0;  // kPoisson only
  std::size_t completions = 2000;    // measured completions after warmup
  std::size_t warmup = 200;
};

struct ThroughputWorkload {
  TimingModel model;
  std::vector<TokenCount> prompt_lengths{8192};  // sampled uniformly
  TokenCount n_min = 200;                        // natural output length range
  TokenCount n_max = 200;
  std::uint64_t seed = 1;
};

// How a variant picks (r, L) for a prompt of length l.
struct PlanVariant {
  std::string name;
  std::function<Plan(TokenCount l)> plan_for;
};

PlanVariant fixed_variant(std::string name, double r, TokenCount L);

struct ThroughputResult {
  std::string variant;
  std::size_t completed = 0;
  Millis window_ms = 0.0;
  double tps = 0.0;           // measured completions per second
  double analytic_tps = 0.0;  // slots / mean occupancy (saturated capacity)
  Millis mean_occupancy = 0.0;
  std::uint32_t peak_active = 0;
  bool conservation_held = true;
};

ThroughputResult run_throughput(const BatchModel& batch, const ThroughputWorkload& workload,
                                const PlanVariant& variant);
std::vector<ThroughputResult> run_throughput(const BatchModel& batch,
                                             const ThroughputWorkload& workload,
                                             const std::vector<PlanVariant>& variants);

// RTT draw: normal around the class mean, truncated at zero.
Millis sample_rtt(const RttClass& rtt, Rng& rng);

}  // namespace pdd
