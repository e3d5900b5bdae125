#pragma once

#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "pdd/cloudsim.h"
#include "pdd/refiner.h"
#include "pdd/timing.h"
#include "pdd/token_source.h"

namespace pdd {

enum class CorrectionPolicy {
  kOff,            // device keeps its own history; display still shows cloud tokens
  kCloudWins,      // device adopts cloud token i as its history for i < L
  kDeviceDisplay,  // device shows its own token when it has one in time
};

const char* to_string(CorrectionPolicy policy);
CorrectionPolicy correction_policy_from_string(const std::string& name);

// Display timestamps are compared against tau with this tolerance.
inline constexpr Millis kSchedulerTickMs = 1.0;

// The display branch pauses (rather than extrapolating) once the stream is
// this many smoothed intervals late.
inline constexpr double kStallFactor = 5.0;

struct DisplaySchedule {
  Millis start = 0.0;        // first-frame arrival
  Millis tpot_smooth = 0.0;  // display pace for cloud tokens 1..L-1
  TokenCount count = 0;      // L - 1
};

struct DeviceTrace {
  Millis user_ttft = 0.0;  // first-frame arrival minus request start
  Millis ttft_d = 0.0;     // device prefill done, relative to request start
  std::optional<Millis> tpot_smooth;  // unset when L == 1
  TokenCount L = 1;
  std::size_t mask_bits = 0;
  std::size_t mask_popcount = 0;
  std::size_t mask_payload_bytes = 0;

  std::vector<Millis> display_times;  // absolute; index 0 is the first token
  std::vector<std::string> output;    // displayed tokens, same indexing
  std::size_t cloud_tokens_received = 0;  // first token included
  std::size_t corrections = 0;
  std::size_t common_prefix_len = 0;
  std::size_t stalls = 0;  // display pauses longer than kStallFactor * tpot_smooth

  Millis max_smoothed_gap = 0.0;   // over display positions 1..L-1
  Millis mean_smoothed_gap = 0.0;
  Millis max_gap = 0.0;            // over the whole output
  // Device generation time of token L-1 minus its display time; positive
  // when the device is still behind at the hand-over.
  std::optional<Millis> catch_up_lag;
};

// prefill_d of the refined prompt as the device estimates it from the mask.
Millis estimate_device_prefill(const SelectionMask& mask, double k_d);

// Device control for one request: decodes the cloud stream, displays cloud
// tokens 1..L-1 at the smoothed pace, runs its own prefill over the selected
// tokens and decodes at tpot_d with the given correction policy, then shows
// its own tokens until EOT.
//
// Throws ProtocolError on malformed frames or a mask whose length differs from
// the prompt, StallError when the stream stops short of L-1 events without an
// end marker.
DeviceTrace run_session(const TokenizedPrompt& prompt, std::span<const TimedChunk> stream,
                        Millis request_start, const TimingModel& model,
                        const TokenSource& device_source, CorrectionPolicy policy);

struct ScrubRule {
  std::string pattern;
  std::string replacement;
};

// Pattern-substitution privacy hook applied before a prompt leaves the
// device. Rules are applied in order, repeatedly, until the text stops
// changing, so scrub(scrub(x)) == scrub(x).
class Scrubber {
 public:
  Scrubber() = default;
  explicit Scrubber(std::vector<ScrubRule> rules);

  std::string operator()(const std::string& text) const;
  bool empty() const { return rules_.empty(); }

 private:
  std::vector<std::pair<std::regex, std::string>> rules_;
};

}  // namespace pdd
