#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace pdd {

// All durations are milliseconds.
using Millis = double;
using TokenCount = std::uint32_t;

// Network class used for planning (mean) and simulation (mean + jitter).
struct RttClass {
  std::string name = "WIFI";
  Millis mean_ms = 50.0;
  Millis jitter_ms = 10.0;  // std-dev of the truncated normal used by the simulator

  // Conservative upper estimate used by the default delta bound.
  Millis p95_ms() const { return mean_ms + 1.6448536269514722 * jitter_ms; }
};

RttClass wifi_rtt();
RttClass lte_rtt();

// base + per_token * l. Cost models are linear in length by default.
struct AffineCost {
  Millis base_ms = 0.0;
  Millis per_token_ms = 0.0;

  Millis at(TokenCount l) const { return base_ms + per_token_ms * static_cast<double>(l); }
};

struct TimingModel {
  double k_c = 0.1;     // cloud prefill, ms per token
  double k_d = 1.25;    // device prefill, ms per token
  Millis tpot_c = 30.0;
  Millis tpot_d = 30.0;
  RttClass rtt = wifi_rtt();
  AffineCost compress{0.0, 0.0125};     // cloud mask build + deflate; ignores r
  AffineCost decompress{0.0, 0.00625};  // device inflate + text recovery
  // When unset, delta(l) = compress(l) + decompress(l) + p95 RTT.
  std::optional<AffineCost> delta_override;
  // Upper end of the prompt lengths the model is calibrated for.
  TokenCount max_tokens = 32768;

  Millis compress_cost(TokenCount l, double r) const;
  Millis decompress_cost(TokenCount l) const;
  Millis delta(TokenCount l) const;

  // Throws InvalidArgument when a coefficient is non-positive, k_d <= k_c, or
  // an explicit delta fails to dominate compress + decompress + mean RTT.
  void validate() const;
};

// Coefficients matching the cloud/device orders of magnitude used throughout
// the tests: 8k tokens take 10 s on device and 0.8 s in the cloud.
TimingModel calibrated_timing_model();

struct LatencyBreakdown {
  Millis ttft_c = 0;
  Millis ttft_d = 0;
  Millis prefill_c = 0;
  Millis prefill_d = 0;
  Millis rtt_sample = 0;
  Millis compress = 0;
  Millis decompress = 0;
};

Millis prefill_cloud(const TimingModel& model, TokenCount tokens);
Millis prefill_device(const TimingModel& model, TokenCount tokens);

// prefill_c(l) + compress(l, r) + rtt
Millis ttft_cloud(const TimingModel& model, TokenCount l, double r, Millis rtt_sample);

// ttft_c + decompress(l) + prefill_d(r * l)
Millis ttft_device(const TimingModel& model, TokenCount l, double r, Millis ttft_c);

LatencyBreakdown latency_breakdown(const TimingModel& model, TokenCount l, double r,
                                   Millis rtt_sample);

// Display pace that spreads the device-prefill surplus over the L-1 cloud
// decoding tokens. Throws AmortizationUndefined for L < 2.
Millis smoothed_tpot(const TimingModel& model, Millis prefill_d_refined, Millis ttft_c,
                     TokenCount L);

// Device-only timeline minus assisted timeline over the first L tokens; zero
// when tpot_smooth came from smoothed_tpot.
Millis amortization_residual(const TimingModel& model, Millis prefill_d_refined, Millis ttft_c,
                             TokenCount L, Millis tpot_smooth);

// Time a request holds its batch slot when it emits L tokens.
Millis request_occupancy(Millis ttft, Millis tpot, TokenCount L);

}  // namespace pdd
