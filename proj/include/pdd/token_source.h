#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "pdd/timing.h"

namespace pdd {

// Deterministic stand-in for a model's output stream.
//
// Index 0 is the first token (produced by prefill); decoding tokens follow at
// 1, 2, ... The stream has `length` tokens in total and the last one (index
// length-1) carries EOT.
//
// A device source paired with a cloud source shares its seed. While the device
// history matches the cloud's ("branch 0"), the device reproduces the cloud
// token except at `divergences`, where it picks a different token. Once the
// device keeps a diverged token, its history forks and later tokens come from
// a branch keyed by the fork position.
struct TokenSource {
  std::uint64_t seed = 0;
  TokenCount length = 1;
  std::set<std::uint32_t> divergences;

  std::string token(std::uint32_t index, std::uint64_t branch = 0) const;
  // Always differs from token(index, 0).
  std::string diverged_token(std::uint32_t index) const;
  bool is_eot(std::uint32_t index) const { return index + 1 >= length; }
  bool diverges_at(std::uint32_t index) const { return divergences.count(index) != 0; }
};

}  // namespace pdd
