#pragma once

#include <string>
#include <vector>

#include "pdd/refiner.h"
#include "pdd/rng.h"
#include "pdd/timing.h"

namespace pdd::test {

// Prompt with `prefix` and `suffix` filler tokens and one content sentence per
// entry of `sentence_lengths`.
inline TokenizedPrompt make_prompt(std::size_t prefix, const std::vector<std::size_t>& sentence_lengths,
                                   std::size_t suffix) {
  TokenizedPrompt p;
  for (std::size_t i = 0; i < prefix; ++i) p.prefix.push_back("p" + std::to_string(i));
  for (std::size_t s = 0; s < sentence_lengths.size(); ++s) {
    for (std::size_t i = 0; i < sentence_lengths[s]; ++i) {
      p.content.push_back("c" + std::to_string(s) + "_" + std::to_string(i));
      p.sentence_ids.push_back(static_cast<std::uint32_t>(s));
    }
  }
  for (std::size_t i = 0; i < suffix; ++i) p.suffix.push_back("s" + std::to_string(i));
  return p;
}

inline TokenizedPrompt random_prompt(Rng& rng, std::size_t max_sentences = 40) {
  std::vector<std::size_t> lengths(rng.uniform_int(1, max_sentences));
  for (auto& n : lengths) n = rng.uniform_int(1, 20);
  return make_prompt(rng.uniform_int(0, 10), lengths, rng.uniform_int(0, 10));
}

// Calibrated model with no RTT jitter, so simulated and predicted times agree.
inline TimingModel steady_model() {
  TimingModel m = calibrated_timing_model();
  m.rtt.jitter_ms = 0.0;
  return m;
}

}  // namespace pdd::test
