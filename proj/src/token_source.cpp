#include "pdd/token_source.h"

#include <array>
#include <string_view>

#include "pdd/rng.h"

namespace pdd {

namespace {

constexpr std::array<std::string_view, 48> kVocab{
    "the",    "a",      "model",   "cloud",   "device", "token",  "prompt",  "answer",
    "quick",  "brown",  "fox",     "jumps",   "over",   "lazy",   "dog",     "and",
    "then",   "with",   "without", "latency", "first",  "second", "summary", "result",
    "is",     "are",    "was",     "will",    "can",    "should", "it",      "they",
    "reads",  "writes", "serves",  "decodes", "fills",  "short",  "long",    "fast",
    "slow",   "of",     "to",      "in",      "on",     "for",    "by",      "context"};

}  // namespace

std::string TokenSource::token(std::uint32_t index, std::uint64_t branch) const {
  const std::uint64_t h = hash_combine(hash_combine(seed, branch), index);
  return std::string(kVocab[h % kVocab.size()]);
}

std::string TokenSource::diverged_token(std::uint32_t index) const {
  const std::uint64_t base = hash_combine(hash_combine(seed, 0), index) % kVocab.size();
  const std::uint64_t shift = 1 + hash_combine(seed ^ 0x5bd1e995ULL, index) % (kVocab.size() - 1);
  return std::string(kVocab[(base + shift) % kVocab.size()]);
}

}  // namespace pdd
