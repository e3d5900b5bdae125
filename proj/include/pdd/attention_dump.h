#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pdd/refiner.h"

namespace pdd {

// Binary attention dump consumed by `pd refine`. All integers are little-endian
// uint32, all matrix entries little-endian IEEE-754 float32, row-major.
//
//   offset  field
//   0       magic "PDAW"
//   4       version (1)
//   8       kind: 0 = weights, 1 = raw Q/K
//   12      heads
//   16      w      (observation-window rows)
//   20      l_k    (key count, equals the prompt token count)
//   24      h      (hidden size per head; 0 allowed for kind 0)
//   28      payload
//
// kind 0 payload: per head one w x l_k weight matrix.
// kind 1 payload: per head Q (w x h) followed by K (l_k x h).
struct AttentionDump {
  enum class Kind : std::uint32_t { kWeights = 0, kQueryKey = 1 };

  Kind kind = Kind::kWeights;
  std::uint32_t window = 0;
  std::uint32_t keys = 0;
  std::uint32_t hidden = 0;
  std::vector<Matrix> weights;     // kind 0
  std::vector<AttentionInputs> qk;  // kind 1

  // Weight matrices per head, computing softmax(QK^T/sqrt(h)) for kind 1.
  std::vector<Matrix> head_weights() const;
};

AttentionDump read_attention_dump(std::istream& in);
void write_attention_dump(std::ostream& out, const AttentionDump& dump);

}  // namespace pdd
