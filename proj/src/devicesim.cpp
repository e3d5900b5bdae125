#include "pdd/devicesim.h"

#include <algorithm>

#include "pdd/errors.h"
#include "pdd/maskcodec.h"
#include "pdd/protocol.h"

namespace pdd {

namespace {

struct ReceivedStream {
  FirstTokenFrame frame;
  Millis first_at = 0.0;
  std::vector<std::string> tokens;  // decoding tokens 1..k
  std::vector<Millis> arrivals;     // parallel to tokens
  bool ended = false;
};

ReceivedStream receive(std::span<const TimedChunk> stream) {
  ReceivedStream rx;
  StreamDecoder decoder;
  bool have_first = false;
  for (const auto& chunk : stream) {
    for (auto& item : decoder.feed(chunk.bytes)) {
      if (auto* fault = std::get_if<StreamFault>(&item)) {
        throw ProtocolError(fault->field, fault->message);
      }
      if (rx.ended) throw ProtocolError("frame", "data after end marker");
      if (auto* f = std::get_if<FirstTokenFrame>(&item)) {
        rx.frame = std::move(*f);
        rx.first_at = chunk.at;
        have_first = true;
      } else if (auto* e = std::get_if<StreamEvent>(&item)) {
        rx.tokens.push_back(std::move(e->token));
        rx.arrivals.push_back(chunk.at);
      } else {
        rx.ended = true;
      }
    }
  }
  if (!have_first) throw ProtocolError("first_token", "stream carried no first frame");
  if (decoder.buffered() != 0) throw ProtocolError("frame", "stream ends inside a frame");
  return rx;
}

}  // namespace

const char* to_string(CorrectionPolicy policy) {
  switch (policy) {
    case CorrectionPolicy::kOff:
      return "OFF";
    case CorrectionPolicy::kCloudWins:
      return "CLOUD_WINS";
    case CorrectionPolicy::kDeviceDisplay:
      return "DEVICE_DISPLAY";
  }
  return "?";
}

CorrectionPolicy correction_policy_from_string(const std::string& name) {
  if (name == "OFF") return CorrectionPolicy::kOff;
  if (name == "CLOUD_WINS") return CorrectionPolicy::kCloudWins;
  if (name == "DEVICE_DISPLAY") return CorrectionPolicy::kDeviceDisplay;
  throw InvalidArgument("unknown correction policy '" + name + "'");
}

Millis estimate_device_prefill(const SelectionMask& mask, double k_d) {
  return k_d * static_cast<double>(mask.popcount());
}

DeviceTrace run_session(const TokenizedPrompt& prompt, std::span<const TimedChunk> stream,
                        Millis request_start, const TimingModel& model,
                        const TokenSource& device_source, CorrectionPolicy policy) {
  ReceivedStream rx = receive(stream);
  const TokenCount L = rx.frame.L;
  const std::size_t k = rx.tokens.size();
  const bool unbounded = L == kGenerateAll;

  if (!rx.ended && (unbounded || k < L - 1)) {
    const Millis last = rx.arrivals.empty() ? rx.first_at : rx.arrivals.back();
    throw StallError("stream stopped after " + std::to_string(k) + " of " +
                     (unbounded ? std::string("unbounded") : std::to_string(L - 1)) +
                     " events without an end marker (last data at " + std::to_string(last) +
                     " ms)");
  }
  if (!unbounded && k > L - 1) {
    throw ProtocolError("i", "cloud sent more than L-1 events");
  }
  // An end marker before L-1 events means the cloud reached EOT at token k.
  const bool cloud_finished = rx.ended && (unbounded || k < L - 1);

  const SelectionMask mask = unpack(rx.frame.mask);
  if (mask.size() != prompt.size()) {
    throw ProtocolError("mask_b64", "mask covers " + std::to_string(mask.size()) +
                                        " tokens, prompt has " + std::to_string(prompt.size()));
  }

  DeviceTrace t;
  t.L = L;
  t.mask_bits = mask.size();
  t.mask_popcount = mask.popcount();
  t.mask_payload_bytes = rx.frame.mask.payload.size();
  t.cloud_tokens_received = 1 + k;

  const auto l = static_cast<TokenCount>(prompt.size());
  const Millis observed_ttft_c = rx.first_at - request_start;
  const Millis prefill_est = estimate_device_prefill(mask, model.k_d);
  const Millis device_ready = rx.first_at + model.decompress_cost(l) + prefill_est;
  t.user_ttft = observed_ttft_c;
  t.ttft_d = device_ready - request_start;
  if (L >= 2) t.tpot_smooth = smoothed_tpot(model, prefill_est, observed_ttft_c, L);

  auto gen_time = [&](std::size_t i) { return device_ready + model.tpot_d * static_cast<double>(i); };

  t.display_times.push_back(rx.first_at);
  t.output.push_back(rx.frame.token);
  if (cloud_finished && k == 0) return t;

  std::uint64_t branch = 0;  // device history fork point; 0 = matches cloud
  bool prefix_run = true;
  double smoothed_gap_sum = 0.0;
  std::size_t smoothed_count = 0;

  for (std::size_t i = 1;; ++i) {
    const bool assisted = i <= k;
    std::string own;
    if (branch == 0) {
      own = device_source.diverges_at(static_cast<std::uint32_t>(i))
                ? device_source.diverged_token(static_cast<std::uint32_t>(i))
                : device_source.token(static_cast<std::uint32_t>(i), 0);
    } else {
      own = device_source.token(static_cast<std::uint32_t>(i), branch);
    }
    const bool own_eot = device_source.is_eot(static_cast<std::uint32_t>(i));
    const bool own_matches_cloud_path =
        branch == 0 && !device_source.diverges_at(static_cast<std::uint32_t>(i));

    std::string shown;
    bool done = false;
    Millis at = 0.0;
    const Millis prev_at = t.display_times.back();

    if (assisted) {
      const std::string& cloud = rx.tokens[i - 1];
      const bool agree = own == cloud;
      if (agree && prefix_run) {
        ++t.common_prefix_len;
      } else {
        prefix_run = false;
      }
      if (!agree && policy != CorrectionPolicy::kOff) ++t.corrections;

      const Millis pace = t.tpot_smooth.value_or(model.tpot_d);
      at = std::max(prev_at + pace, rx.arrivals[i - 1]);
      if (rx.arrivals[i - 1] > prev_at + kStallFactor * pace) ++t.stalls;

      const bool show_own = policy == CorrectionPolicy::kDeviceDisplay && gen_time(i) <= at;
      shown = show_own ? own : cloud;
      if (policy != CorrectionPolicy::kCloudWins && branch == 0 && !own_matches_cloud_path) {
        branch = i;
      }
      done = (cloud_finished && i == k) || (show_own && own_eot);

      const Millis gap = at - prev_at;
      t.max_smoothed_gap = std::max(t.max_smoothed_gap, gap);
      smoothed_gap_sum += gap;
      ++smoothed_count;
      if (!unbounded && i == L - 1) t.catch_up_lag = gen_time(i) - at;
    } else {
      if (cloud_finished) break;
      at = std::max(prev_at + model.tpot_d, gen_time(i));
      shown = own;
      if (!own_matches_cloud_path && branch == 0) branch = i;
      done = own_eot;
    }

    t.max_gap = std::max(t.max_gap, at - prev_at);
    t.display_times.push_back(at);
    t.output.push_back(std::move(shown));
    if (done) break;
  }
  if (smoothed_count > 0) t.mean_smoothed_gap = smoothed_gap_sum / static_cast<double>(smoothed_count);
  return t;
}

Scrubber::Scrubber(std::vector<ScrubRule> rules) {
  for (auto& r : rules) {
    try {
      rules_.emplace_back(std::regex(r.pattern), std::move(r.replacement));
    } catch (const std::regex_error& e) {
      throw InvalidArgument("bad scrub pattern '" + r.pattern + "': " + e.what());
    }
  }
}

std::string Scrubber::operator()(const std::string& text) const {
  // Fixed point of the rule set; rules whose replacement re-matches would
  // loop, so the pass count is capped.
  constexpr int kMaxPasses = 16;
  std::string current = text;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    std::string next = current;
    for (const auto& [re, replacement] : rules_) next = std::regex_replace(next, re, replacement);
    if (next == current) return current;
    current = std::move(next);
  }
  throw InvalidArgument("scrub rules do not reach a fixed point");
}

}  // namespace pdd
