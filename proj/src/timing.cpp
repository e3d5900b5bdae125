#include "pdd/timing.h"

#include <cmath>

#include "pdd/errors.h"

namespace pdd {

namespace {

void require_ratio(double r) {
  if (!(r > 0.0 && r <= 1.0)) {
    throw InvalidArgument("ratio r must lie in (0, 1], got " + std::to_string(r));
  }
}

void require_length(TokenCount l) {
  if (l == 0) throw InvalidArgument("prompt length must be positive");
}

void require_nonnegative(Millis v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(what) + " must be a finite non-negative time");
  }
}

}  // namespace

RttClass wifi_rtt() { return RttClass{"WIFI", 50.0, 10.0}; }

RttClass lte_rtt() { return RttClass{"LTE", 120.0, 40.0}; }

Millis TimingModel::compress_cost(TokenCount l, double /*r*/) const { return compress.at(l); }

Millis TimingModel::decompress_cost(TokenCount l) const { return decompress.at(l); }

Millis TimingModel::delta(TokenCount l) const {
  if (delta_override) return delta_override->at(l);
  return compress_cost(l, 0.0) + decompress_cost(l) + rtt.p95_ms();
}

void TimingModel::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string(name) + " must be strictly positive");
    }
  };
  positive(k_c, "k_c");
  positive(k_d, "k_d");
  positive(tpot_c, "tpot_c");
  positive(tpot_d, "tpot_d");
  if (!(k_d > k_c)) throw InvalidArgument("k_d must exceed k_c");
  require_nonnegative(rtt.mean_ms, "rtt mean");
  require_nonnegative(rtt.jitter_ms, "rtt jitter");
  for (const AffineCost* c : {&compress, &decompress}) {
    require_nonnegative(c->base_ms, "cost base");
    require_nonnegative(c->per_token_ms, "cost slope");
  }
  if (max_tokens == 0) throw InvalidArgument("max_tokens must be positive");
  // Both sides are affine in l, so checking the two ends of the range covers it.
  for (TokenCount l : {TokenCount{1}, max_tokens}) {
    const Millis need = compress_cost(l, 1.0) + decompress_cost(l) + rtt.mean_ms;
    if (delta(l) < need) {
      throw InvalidArgument("delta(" + std::to_string(l) +
                            ") does not bound compress + decompress + mean RTT");
    }
  }
}

TimingModel calibrated_timing_model() { return TimingModel{}; }

Millis prefill_cloud(const TimingModel& model, TokenCount tokens) {
  return model.k_c * static_cast<double>(tokens);
}

Millis prefill_device(const TimingModel& model, TokenCount tokens) {
  return model.k_d * static_cast<double>(tokens);
}

Millis ttft_cloud(const TimingModel& model, TokenCount l, double r, Millis rtt_sample) {
  require_ratio(r);
  require_length(l);
  require_nonnegative(rtt_sample, "rtt sample");
  return prefill_cloud(model, l) + model.compress_cost(l, r) + rtt_sample;
}

Millis ttft_device(const TimingModel& model, TokenCount l, double r, Millis ttft_c) {
  require_ratio(r);
  require_length(l);
  require_nonnegative(ttft_c, "ttft_c");
  return ttft_c + model.decompress_cost(l) + model.k_d * r * static_cast<double>(l);
}

LatencyBreakdown latency_breakdown(const TimingModel& model, TokenCount l, double r,
                                   Millis rtt_sample) {
  LatencyBreakdown b;
  b.prefill_c = prefill_cloud(model, l);
  b.compress = model.compress_cost(l, r);
  b.rtt_sample = rtt_sample;
  b.ttft_c = ttft_cloud(model, l, r, rtt_sample);
  b.decompress = model.decompress_cost(l);
  b.prefill_d = model.k_d * r * static_cast<double>(l);
  b.ttft_d = ttft_device(model, l, r, b.ttft_c);
  return b;
}

Millis smoothed_tpot(const TimingModel& model, Millis prefill_d_refined, Millis ttft_c,
                     TokenCount L) {
  if (L < 2) {
    throw AmortizationUndefined("smoothed TPOT needs L >= 2, got " + std::to_string(L));
  }
  require_nonnegative(prefill_d_refined, "refined device prefill");
  require_nonnegative(ttft_c, "ttft_c");
  return model.tpot_d + (prefill_d_refined - ttft_c) / static_cast<double>(L - 1);
}

Millis amortization_residual(const TimingModel& model, Millis prefill_d_refined, Millis ttft_c,
                             TokenCount L, Millis tpot_smooth) {
  const double steps = static_cast<double>(L) - 1.0;
  return (prefill_d_refined + model.tpot_d * steps) - (ttft_c + tpot_smooth * steps);
}

Millis request_occupancy(Millis ttft, Millis tpot, TokenCount L) {
  if (L < 1) throw InvalidArgument("L must be at least 1");
  return ttft + tpot * static_cast<double>(L - 1);
}

}  // namespace pdd
