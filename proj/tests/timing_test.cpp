#include "pdd/timing.h"

#include <gtest/gtest.h>

#include "pdd/errors.h"
#include "support.h"

namespace pdd {
namespace {

TEST(Timing, CalibratedEightThousandTokenExample) {
  const TimingModel m = calibrated_timing_model();
  EXPECT_DOUBLE_EQ(prefill_device(m, 8000), 10000.0);
  EXPECT_DOUBLE_EQ(prefill_cloud(m, 8000), 800.0);
  EXPECT_DOUBLE_EQ(m.compress_cost(8000, 0.25), 100.0);
  EXPECT_DOUBLE_EQ(m.decompress_cost(8000), 50.0);

  const Millis ttft_c = ttft_cloud(m, 8000, 0.25, 50.0);
  EXPECT_DOUBLE_EQ(ttft_c, 950.0);
  EXPECT_DOUBLE_EQ(ttft_device(m, 8000, 0.25, ttft_c), 3500.0);
}

TEST(Timing, BreakdownAddsUp) {
  const TimingModel m = calibrated_timing_model();
  const auto b = latency_breakdown(m, 4096, 0.5, 42.0);
  EXPECT_DOUBLE_EQ(b.ttft_c, b.prefill_c + b.compress + b.rtt_sample);
  EXPECT_DOUBLE_EQ(b.ttft_d, b.ttft_c + b.decompress + b.prefill_d);
  EXPECT_DOUBLE_EQ(b.prefill_d, 1.25 * 0.5 * 4096);
}

TEST(Timing, DeviceMinusCloudIsDecompressPlusRefinedPrefill) {
  Rng rng(3);
  const TimingModel m = calibrated_timing_model();
  for (int i = 0; i < 1000; ++i) {
    const auto l = static_cast<TokenCount>(rng.uniform_int(1, 32768));
    const double r = static_cast<double>(rng.uniform_int(1, 100)) / 100.0;
    const Millis c = ttft_cloud(m, l, r, rng.uniform() * 200);
    EXPECT_NEAR(ttft_device(m, l, r, c) - c, m.decompress_cost(l) + m.k_d * r * static_cast<double>(l), 1e-9);
  }
}

TEST(Timing, SmoothedTpotExample) {
  const TimingModel m = calibrated_timing_model();
  EXPECT_NEAR(smoothed_tpot(m, 6000.0, 950.0, 74), 30.0 + 5050.0 / 73.0, 1e-12);
  EXPECT_NEAR(smoothed_tpot(m, 6000.0, 950.0, 74), 99.18, 0.005);
}

TEST(Timing, SmoothedTpotNeedsTwoTokens) {
  const TimingModel m = calibrated_timing_model();
  EXPECT_THROW(smoothed_tpot(m, 1000.0, 500.0, 1), AmortizationUndefined);
  EXPECT_THROW(smoothed_tpot(m, 1000.0, 500.0, 0), AmortizationUndefined);
}

TEST(Timing, SmoothedTpotDecreasesTowardDeviceTpot) {
  const TimingModel m = calibrated_timing_model();
  Millis prev = smoothed_tpot(m, 5000.0, 900.0, 2);
  for (TokenCount L = 3; L < 5000; ++L) {
    const Millis cur = smoothed_tpot(m, 5000.0, 900.0, L);
    ASSERT_LT(cur, prev);
    ASSERT_GT(cur, m.tpot_d);
    prev = cur;
  }
  EXPECT_LT(smoothed_tpot(m, 5000.0, 900.0, 1000000) - m.tpot_d, 0.01);
}

TEST(Timing, ResidualVanishesForSmoothedTpot) {
  Rng rng(11);
  TimingModel m = calibrated_timing_model();
  for (int i = 0; i < 10000; ++i) {
    m.tpot_d = 1.0 + rng.uniform() * 100.0;
    const Millis prefill = rng.uniform() * 40000.0;
    const Millis ttft_c = rng.uniform() * 5000.0;
    const auto L = static_cast<TokenCount>(rng.uniform_int(2, 4096));
    const Millis t = smoothed_tpot(m, prefill, ttft_c, L);
    ASSERT_NEAR(amortization_residual(m, prefill, ttft_c, L, t), 0.0, 1e-9);
  }
}

TEST(Timing, OccupancyExample) {
  EXPECT_DOUBLE_EQ(request_occupancy(500.0, 30.0, 21), 1100.0);
  EXPECT_DOUBLE_EQ(request_occupancy(500.0, 30.0, 201), 6500.0);
  EXPECT_DOUBLE_EQ(request_occupancy(500.0, 30.0, 1), 500.0);
  EXPECT_THROW(request_occupancy(500.0, 30.0, 0), InvalidArgument);
}

TEST(Timing, DefaultDeltaIsConservative) {
  const TimingModel m = calibrated_timing_model();
  EXPECT_DOUBLE_EQ(m.delta(8000), 100.0 + 50.0 + 50.0 + 1.6448536269514722 * 10.0);
  TimingModel o = m;
  o.delta_override = AffineCost{0.0, 0.05};
  EXPECT_DOUBLE_EQ(o.delta(8000), 400.0);
}

TEST(Timing, RejectsBadInputs) {
  const TimingModel m = calibrated_timing_model();
  EXPECT_THROW(ttft_cloud(m, 100, 0.0, 10.0), InvalidArgument);
  EXPECT_THROW(ttft_cloud(m, 100, 1.5, 10.0), InvalidArgument);
  EXPECT_THROW(ttft_cloud(m, 0, 0.5, 10.0), InvalidArgument);
  EXPECT_THROW(ttft_cloud(m, 100, 0.5, -1.0), InvalidArgument);
  EXPECT_NO_THROW(ttft_cloud(m, 100, 1.0, 0.0));
}

TEST(Timing, Validate) {
  EXPECT_NO_THROW(calibrated_timing_model().validate());
  TimingModel m = calibrated_timing_model();
  m.k_c = 0.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = calibrated_timing_model();
  m.k_d = 0.05;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = calibrated_timing_model();
  m.tpot_d = -1.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = calibrated_timing_model();
  m.delta_override = AffineCost{10.0, 0.0};  // below compress + decompress + rtt
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Timing, RttClasses) {
  EXPECT_EQ(wifi_rtt().name, "WIFI");
  EXPECT_LT(wifi_rtt().mean_ms, lte_rtt().mean_ms);
  EXPECT_NEAR(wifi_rtt().p95_ms(), 66.45, 0.01);
}

}  // namespace
}  // namespace pdd
