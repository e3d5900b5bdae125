#include "pdd/cloudsim.h"

#include <gtest/gtest.h>

#include "pdd/errors.h"
#include "pdd/maskcodec.h"
#include "sim_support.h"

namespace pdd {
namespace {

using test::serve_with;
using test::steady_model;
using test::synthetic_request;

TEST(ServeRequest, EarlyTerminationAtL) {
  const TimingModel m = steady_model();
  const auto req = synthetic_request(4000, 1);
  const TokenSource src{9, 500, {}};
  const auto s = serve_with(req, m, 0.25, 21, src, 50.0, 1000.0);
  ASSERT_EQ(s.events.size(), 20u);
  ASSERT_EQ(s.wire.size(), 21u);
  EXPECT_EQ(s.record.tokens_emitted, 21u);
  EXPECT_DOUBLE_EQ(s.record.ttft_c, 500.0);
  EXPECT_DOUBLE_EQ(s.record.occupancy, 500.0 + 20 * 30.0);
  EXPECT_DOUBLE_EQ(s.record.slot_released_at, 1000.0 + 1100.0);
  EXPECT_DOUBLE_EQ(s.wire.front().at, 1500.0);
  EXPECT_DOUBLE_EQ(s.wire.back().at, 1500.0 + 20 * 30.0);
  EXPECT_EQ(s.first_frame.L, 21u);
  EXPECT_EQ(s.first_frame.token, src.token(0));
  for (std::uint32_t i = 1; i <= 20; ++i) {
    EXPECT_EQ(s.events[i - 1].index, i);
    EXPECT_EQ(s.events[i - 1].token, src.token(i));
    EXPECT_EQ(s.events[i - 1].terminal, i == 20);
  }
  EXPECT_NE(s.wire.back().bytes.find("[DONE]"), std::string::npos);
}

TEST(ServeRequest, NaturalFinishBeforeL) {
  const auto s = serve_with(synthetic_request(1000, 2), steady_model(), 0.25, 21, TokenSource{3, 3, {}});
  EXPECT_EQ(s.events.size(), 2u);
  EXPECT_TRUE(s.events.back().terminal);
  EXPECT_EQ(s.record.tokens_emitted, 3u);
}

TEST(ServeRequest, GenerateAll) {
  const auto s = serve_with(synthetic_request(1000, 2), steady_model(), 1.0, kGenerateAll,
                            TokenSource{3, 57, {}});
  EXPECT_EQ(s.events.size(), 56u);
  EXPECT_EQ(s.first_frame.L, kGenerateAll);
  EXPECT_NE(s.wire.front().bytes.find("\"L\":4294967295"), std::string::npos);
}

TEST(ServeRequest, SingleTokenPlanSendsNoEvents) {
  const auto s = serve_with(synthetic_request(1000, 2), steady_model(), 0.25, 1, TokenSource{3, 50, {}});
  EXPECT_TRUE(s.events.empty());
  ASSERT_EQ(s.wire.size(), 2u);
  EXPECT_EQ(s.wire[1].bytes, kDoneFrame);
  EXPECT_DOUBLE_EQ(s.record.occupancy, s.record.ttft_c);
}

TEST(ServeRequest, MaskFollowsPlanRatio) {
  const auto req = synthetic_request(8192, 4);
  const auto s = serve_with(req, steady_model(), 0.25, 25, TokenSource{1, 100, {}});
  EXPECT_EQ(s.mask.size(), 8192u);
  EXPECT_EQ(unpack(s.first_frame.mask), s.mask);
  const std::size_t content = s.prompt.content.size();
  const std::size_t kept = s.mask.popcount() - s.prompt.prefix.size() - s.prompt.suffix.size();
  EXPECT_GE(kept, content_budget(0.25, content));
  EXPECT_LT(kept, content_budget(0.25, content) + 40);
  const auto full = serve_with(req, steady_model(), 1.0, 25, TokenSource{1, 100, {}});
  EXPECT_EQ(full.mask, SelectionMask::all_ones(8192));
}

TEST(ServeRequest, MissingPlanFallsBack) {
  const auto req = synthetic_request(1000, 5);
  ServeOptions opt;
  opt.rtt_sample = 40.0;
  const auto s = serve_request(req, PlanTable({512}, {}), steady_model(), TokenSource{1, 30, {}}, opt);
  EXPECT_TRUE(s.record.planning_miss);
  EXPECT_DOUBLE_EQ(s.record.plan.r, 1.0);
  EXPECT_EQ(s.record.plan.L, kGenerateAll);
  EXPECT_EQ(s.events.size(), 29u);
}

TEST(ServeRequest, TtftMatchesTimingModel) {
  const TimingModel m = calibrated_timing_model();
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto l = static_cast<TokenCount>(rng.uniform_int(100, 9000));
    const Millis rtt = sample_rtt(m.rtt, rng);
    const auto s = serve_with(synthetic_request(l, t), m, 0.25, 10, TokenSource{1, 40, {}}, rtt);
    EXPECT_DOUBLE_EQ(s.record.ttft_c, ttft_cloud(m, l, 0.25, rtt));
    EXPECT_LE(s.record.tokens_emitted, 10u);
  }
}

TEST(Rtt, ClippedAtZero) {
  Rng rng(5);
  const RttClass wild{"X", 5.0, 50.0};
  for (int i = 0; i < 10000; ++i) ASSERT_GE(sample_rtt(wild, rng), 0.0);
}

ThroughputWorkload half_second_workload() {
  ThroughputWorkload w;
  w.model = steady_model();
  w.prompt_lengths = {4000};  // ttft_c = 400 + 50 + 50 = 500 ms
  w.n_min = w.n_max = 1000;
  return w;
}

TEST(Throughput, SingleSlotIsInverseOccupancy) {
  BatchModel b;
  b.slots = 1;
  b.completions = 50;
  b.warmup = 5;
  const auto r = run_throughput(b, half_second_workload(), fixed_variant("L21", 0.25, 21));
  EXPECT_EQ(r.completed, 50u);
  EXPECT_NEAR(r.tps, 1000.0 / 1100.0, 1e-9);
  EXPECT_NEAR(r.analytic_tps, 1000.0 / 1100.0, 1e-9);
  EXPECT_EQ(r.peak_active, 1u);
}

TEST(Throughput, RatioFollowsOccupancy) {
  BatchModel b;
  b.slots = 64;
  b.completions = 3000;
  b.warmup = 300;
  const auto w = half_second_workload();
  const auto res = run_throughput(b, w, {fixed_variant("L21", 0.25, 21), fixed_variant("L201", 0.25, 201)});
  EXPECT_NEAR(res[0].tps / res[1].tps, 6500.0 / 1100.0, 0.02 * 6500.0 / 1100.0);
  for (const auto& r : res) {
    EXPECT_NEAR(r.tps / r.analytic_tps, 1.0, 0.02);
    EXPECT_TRUE(r.conservation_held);
    EXPECT_LE(r.peak_active, 64u);
  }
  const auto wide = run_throughput(b, w, {fixed_variant("L11", 0.25, 11), fixed_variant("L501", 0.25, 501)});
  EXPECT_NEAR(wide[0].tps / wide[1].tps, 19.375, 0.02 * 19.375);
}

TEST(Throughput, PoissonConservation) {
  BatchModel b;
  b.slots = 8;
  b.arrivals = BatchModel::Arrivals::kPoisson;
  b.arrival_rate_per_s = 20.0;  // above capacity, so a queue builds
  b.completions = 500;
  b.warmup = 50;
  auto w = half_second_workload();
  w.model = calibrated_timing_model();
  w.n_min = 5;
  w.n_max = 60;
  const auto r = run_throughput(b, w, fixed_variant("L21", 0.25, 21));
  EXPECT_TRUE(r.conservation_held);
  EXPECT_EQ(r.peak_active, 8u);
  EXPECT_EQ(r.completed, 500u);
  EXPECT_NEAR(r.tps, r.analytic_tps, 0.1 * r.analytic_tps);
}

TEST(Throughput, Deterministic) {
  BatchModel b;
  b.completions = 400;
  auto w = half_second_workload();
  w.model = calibrated_timing_model();
  w.n_min = 1;
  w.n_max = 300;
  const auto a = run_throughput(b, w, fixed_variant("x", 0.25, 40));
  const auto c = run_throughput(b, w, fixed_variant("x", 0.25, 40));
  EXPECT_EQ(a.tps, c.tps);
  EXPECT_EQ(a.window_ms, c.window_ms);
  EXPECT_EQ(a.mean_occupancy, c.mean_occupancy);
}

TEST(Throughput, RejectsBadInputs) {
  BatchModel b;
  b.slots = 0;
  EXPECT_THROW(run_throughput(b, half_second_workload(), fixed_variant("x", 0.25, 2)), InvalidArgument);
  b.slots = 4;
  EXPECT_THROW(run_throughput(b, half_second_workload(), PlanVariant{"empty", {}}), InvalidArgument);
}

}  // namespace
}  // namespace pdd
