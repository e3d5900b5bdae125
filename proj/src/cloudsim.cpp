#include "pdd/cloudsim.h"

#include <algorithm>
#include <deque>

#include "pdd/errors.h"
#include "pdd/event_loop.h"
#include "pdd/maskcodec.h"

namespace pdd {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

}  // namespace

ScoreProvider synthetic_scores(std::uint64_t seed) {
  return [seed](const TokenizedPrompt& prompt) {
    // A per-sentence level plus small per-token noise, then normalised the
    // way a softmax row would be. Keyed on token text so cloud and device runs
    // over the same prompt agree.
    TokenScores out{std::vector<double>(prompt.content.size()), 1};
    double total = 0.0;
    for (std::size_t i = 0; i < prompt.content.size(); ++i) {
      const std::uint64_t sentence = hash_combine(seed, prompt.sentence_ids[i]);
      const std::uint64_t tok = hash_combine(sentence, fnv1a(prompt.content[i]));
      const double level = static_cast<double>(sentence >> 11) * 0x1.0p-53;
      const double noise = static_cast<double>(tok >> 11) * 0x1.0p-53;
      out.scores[i] = level * level + 0.05 * noise;
      total += out.scores[i];
    }
    if (total > 0.0) {
      for (double& s : out.scores) s /= total;
    }
    return out;
  };
}

Millis sample_rtt(const RttClass& rtt, Rng& rng) {
  return std::max(0.0, rng.normal(rtt.mean_ms, rtt.jitter_ms));
}

CloudSession serve_request(const AssistRequest& request, const PlanTable& plans,
                           const TimingModel& model, const TokenSource& source,
                           const ServeOptions& options) {
  CloudSession s;
  s.prompt = tokenize_prompt(request.prefix, request.content, request.suffix);
  const auto l = static_cast<TokenCount>(s.prompt.size());
  if (l == 0) throw InvalidArgument("request " + request.request_id + " has an empty prompt");
  if (source.length < 1) throw InvalidArgument("token source length must be at least 1");

  SessionRecord& rec = s.record;
  rec.request_id = request.request_id;
  rec.prompt_tokens = l;
  if (auto plan = plans.lookup(request.scene, request.device_class, l)) {
    rec.plan = *plan;
  } else {
    rec.planning_miss = true;
    rec.plan = Plan{1.0, kGenerateAll, false, 0.0, 0.0};
  }

  const double r = rec.plan.r;
  if (r >= 1.0) {
    s.mask = SelectionMask::all_ones(l);
  } else {
    const auto scorer = options.scorer ? options.scorer : synthetic_scores(0);
    s.mask = select_sentences(s.prompt, scorer(s.prompt), r);
  }

  rec.ttft_c = ttft_cloud(model, l, r, options.rtt_sample);
  const TokenCount L = rec.plan.L;
  rec.tokens_emitted = std::min(L, source.length);
  rec.occupancy = request_occupancy(rec.ttft_c, model.tpot_c, rec.tokens_emitted);
  rec.slot_released_at = options.start + rec.occupancy;

  s.first_frame = FirstTokenFrame{source.token(0), pack(s.mask), L};
  const Millis first_at = options.start + rec.ttft_c;
  s.wire.push_back(TimedChunk{first_at, encode_first_frame(s.first_frame)});

  const TokenCount last = rec.tokens_emitted - 1;
  for (TokenCount i = 1; i <= last; ++i) {
    StreamEvent e{i, source.token(i), i == last};
    s.wire.push_back(
        TimedChunk{first_at + model.tpot_c * static_cast<double>(i), encode_stream_event(e)});
    s.events.push_back(std::move(e));
  }
  if (last == 0) s.wire.push_back(TimedChunk{first_at, std::string(kDoneFrame)});
  return s;
}

namespace {

struct RequestDraw {
  Millis occupancy;
};

class ThroughputRun {
 public:
  ThroughputRun(const BatchModel& batch, const ThroughputWorkload& w, const PlanVariant& v)
      : batch_(batch), workload_(w), variant_(v), rng_(hash_combine(w.seed, 0x7470)) {}

  ThroughputResult run() {
    result_.variant = variant_.name;
    const std::size_t target = batch_.warmup + batch_.completions;
    if (batch_.slots == 0) throw InvalidArgument("batch needs at least one slot");
    if (workload_.prompt_lengths.empty()) throw InvalidArgument("workload has no prompt lengths");
    if (!variant_.plan_for) throw InvalidArgument("variant '" + variant_.name + "' has no plan");
    if (workload_.n_min < 1 || workload_.n_min > workload_.n_max) {
      throw InvalidArgument("workload output lengths need 1 <= n_min <= n_max");
    }

    if (batch_.arrivals == BatchModel::Arrivals::kClosedLoop) {
      // Stagger the initial fill so completions are spread over a period
      // rather than arriving in slot-sized bursts.
      const Millis pilot = draw().occupancy;
      for (std::uint32_t k = 0; k < batch_.slots; ++k) {
        loop_.schedule_at(pilot * k / batch_.slots, [this] { arrive(); });
      }
    } else {
      schedule_next_arrival();
    }

    while (completed_ < target && !loop_.empty()) {
      loop_.run();
    }
    result_.completed = completed_ >= batch_.warmup ? completed_ - batch_.warmup : 0;
    result_.window_ms = last_completion_at_ - warmup_done_at_;
    if (result_.window_ms > 0.0) {
      result_.tps = static_cast<double>(result_.completed) * 1000.0 / result_.window_ms;
    }
    if (measured_ > 0) {
      result_.mean_occupancy = occupancy_sum_ / static_cast<double>(measured_);
      result_.analytic_tps = batch_.slots * 1000.0 / result_.mean_occupancy;
    }
    return result_;
  }

 private:
  RequestDraw draw() {
    const auto idx = rng_.uniform_int(0, workload_.prompt_lengths.size() - 1);
    const TokenCount l = workload_.prompt_lengths[idx];
    const auto n = static_cast<TokenCount>(rng_.uniform_int(workload_.n_min, workload_.n_max));
    const Millis rtt = sample_rtt(workload_.model.rtt, rng_);
    const Plan plan = variant_.plan_for(l);
    const Millis ttft = ttft_cloud(workload_.model, l, plan.r, rtt);
    return RequestDraw{request_occupancy(ttft, workload_.model.tpot_c, std::min(plan.L, n))};
  }

  void schedule_next_arrival() {
    loop_.schedule_in(rng_.exponential(batch_.arrival_rate_per_s) * 1000.0, [this] {
      arrive();
      if (completed_ < batch_.warmup + batch_.completions) schedule_next_arrival();
    });
  }

  void arrive() {
    ++admitted_;
    waiting_.push_back(draw());
    dispatch();
    check();
  }

  void dispatch() {
    while (active_ < batch_.slots && !waiting_.empty()) {
      const RequestDraw d = waiting_.front();
      waiting_.pop_front();
      ++active_;
      result_.peak_active = std::max(result_.peak_active, active_);
      const bool measured = completed_ >= batch_.warmup;
      loop_.schedule_in(d.occupancy, [this, d, measured] { complete(d, measured); });
    }
  }

  void complete(const RequestDraw& d, bool started_in_window) {
    --active_;
    ++completed_;
    if (started_in_window) {
      occupancy_sum_ += d.occupancy;
      ++measured_;
    }
    if (completed_ == batch_.warmup) warmup_done_at_ = loop_.now();
    last_completion_at_ = loop_.now();
    if (completed_ >= batch_.warmup + batch_.completions) {
      loop_.stop();
      return;
    }
    if (batch_.arrivals == BatchModel::Arrivals::kClosedLoop) {
      arrive();
    } else {
      dispatch();
      check();
    }
  }

  void check() {
    if (admitted_ != completed_ + active_ + waiting_.size()) result_.conservation_held = false;
    if (active_ > batch_.slots) result_.conservation_held = false;
  }

  const BatchModel& batch_;
  const ThroughputWorkload& workload_;
  const PlanVariant& variant_;
  Rng rng_;
  EventLoop loop_;
  ThroughputResult result_;
  std::deque<RequestDraw> waiting_;
  std::uint32_t active_ = 0;
  std::size_t admitted_ = 0;
  std::size_t completed_ = 0;
  std::size_t measured_ = 0;
  double occupancy_sum_ = 0.0;
  Millis warmup_done_at_ = 0.0;
  Millis last_completion_at_ = 0.0;
};

}  // namespace

PlanVariant fixed_variant(std::string name, double r, TokenCount L) {
  return PlanVariant{std::move(name), [r, L](TokenCount) { return Plan{r, L, true, 0.0, 0.0}; }};
}

ThroughputResult run_throughput(const BatchModel& batch, const ThroughputWorkload& workload,
                                const PlanVariant& variant) {
  return ThroughputRun(batch, workload, variant).run();
}

std::vector<ThroughputResult> run_throughput(const BatchModel& batch,
                                             const ThroughputWorkload& workload,
                                             const std::vector<PlanVariant>& variants) {
  std::vector<ThroughputResult> out;
  out.reserve(variants.size());
  for (const auto& v : variants) out.push_back(run_throughput(batch, workload, v));
  return out;
}

}  // namespace pdd
