#include "pdd/planner.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdd/errors.h"

namespace pdd {

namespace {

constexpr std::int64_t kMaxL = std::numeric_limits<TokenCount>::max();

std::int64_t clamp_count(double v) {
  if (!(v < static_cast<double>(kMaxL))) return kMaxL;
  if (v < static_cast<double>(-kMaxL)) return -kMaxL;
  return static_cast<std::int64_t>(v);
}

}  // namespace

void PlanConstraints::validate(const TimingModel& model) const {
  if (!(xi_scene >= 0.0 && xi_scene <= 1.0)) {
    throw InvalidArgument("xi_scene must lie in [0, 1]");
  }
  if (!(tau > model.tpot_d)) throw InvalidArgument("tau must exceed tpot_d");
}

RatioInterval r_bounds(const TimingModel& model, const PlanConstraints& constraints,
                       TokenCount l) {
  if (l == 0) throw InvalidArgument("prompt length must be positive");
  const double per_token_overhead = model.k_c + model.delta(l) / static_cast<double>(l);
  return RatioInterval{constraints.xi_scene, 1.0 - per_token_overhead / model.k_d};
}

LengthInterval l_bounds(const TimingModel& model, const PlanConstraints& constraints,
                        TokenCount l, double r, Millis ttft_c, Millis ttft_d) {
  if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("ratio r must lie in (0, 1]");
  if (!(constraints.tau > model.tpot_d)) throw InvalidArgument("tau must exceed tpot_d");

  const Millis surplus = model.k_d * r * static_cast<double>(l) - ttft_c;
  const Millis headroom = constraints.tau - model.tpot_d;
  auto pace_ok = [&](std::int64_t L) {
    return model.tpot_d + surplus / static_cast<double>(L - 1) <= constraints.tau;
  };
  auto occupancy_ok = [&](std::int64_t L) {
    return ttft_c + static_cast<double>(L - 1) * model.tpot_c <= ttft_d;
  };

  LengthInterval out;
  if (surplus <= 0.0) {
    out.lo = 2;
  } else {
    out.lo = std::max<std::int64_t>(2, 1 + clamp_count(std::ceil(surplus / headroom)));
    // The quotient can land one ulp on the wrong side of an integer; settle the
    // boundary against the inequality itself.
    while (out.lo > 2 && pace_ok(out.lo - 1)) --out.lo;
    while (out.lo < kMaxL && !pace_ok(out.lo)) ++out.lo;
  }

  const Millis slack = ttft_d - ttft_c;
  out.hi = 1 + clamp_count(std::floor(slack / model.tpot_c));
  while (out.hi > 1 && !occupancy_ok(out.hi)) --out.hi;
  while (out.hi < kMaxL && occupancy_ok(out.hi + 1)) ++out.hi;
  return out;
}

Plan solve_plan(const TimingModel& model, const PlanConstraints& constraints, TokenCount l,
                Millis rtt) {
  model.validate();
  constraints.validate(model);

  const RatioInterval rb = r_bounds(model, constraints, l);
  const double r_lo = std::max(rb.lo, kMinRatio);
  const bool ratio_ok = r_lo <= rb.hi;

  Plan plan;
  plan.r = ratio_ok ? r_lo : 1.0;

  const Millis ttft_c = ttft_cloud(model, l, plan.r, rtt);
  const Millis ttft_d = ttft_device(model, l, plan.r, ttft_c);
  plan.ttft_d_estimate = ttft_d;

  const LengthInterval lb = l_bounds(model, constraints, l, plan.r, ttft_c, ttft_d);
  const bool length_ok = !lb.empty();
  plan.L = static_cast<TokenCount>(length_ok ? lb.lo : std::max<std::int64_t>(lb.hi, 1));

  const Millis prefill_refined = model.k_d * plan.r * static_cast<double>(l);
  if (plan.L >= 2) {
    plan.achieved_tpot_smooth = smoothed_tpot(model, prefill_refined, ttft_c, plan.L);
  } else {
    // No cloud decoding tokens: the second token waits for device prefill.
    plan.achieved_tpot_smooth = ttft_d - ttft_c + model.tpot_d;
  }
  plan.feasible = ratio_ok && length_ok;
  return plan;
}

Plan evaluate_plan(const TimingModel& model, const PlanConstraints& constraints, TokenCount l,
                   Millis rtt, double r, TokenCount L) {
  if (L < 1) throw InvalidArgument("L must be at least 1");
  Plan plan;
  plan.r = r;
  plan.L = L;
  const Millis ttft_c = ttft_cloud(model, l, r, rtt);
  const Millis ttft_d = ttft_device(model, l, r, ttft_c);
  plan.ttft_d_estimate = ttft_d;
  const Millis prefill_refined = model.k_d * r * static_cast<double>(l);
  plan.achieved_tpot_smooth = L >= 2 ? smoothed_tpot(model, prefill_refined, ttft_c, L)
                                     : ttft_d - ttft_c + model.tpot_d;
  const RatioInterval rb = r_bounds(model, constraints, l);
  const bool ratio_ok = r >= rb.lo && r <= rb.hi;
  const bool pace_ok = L >= 2 && plan.achieved_tpot_smooth <= constraints.tau;
  const bool occupancy_ok = ttft_c + static_cast<double>(L - 1) * model.tpot_c <= ttft_d;
  plan.feasible = ratio_ok && pace_ok && occupancy_ok;
  return plan;
}

PlanTable::PlanTable(std::vector<TokenCount> buckets, std::map<PlanKey, Plan> plans)
    : buckets_(std::move(buckets)), plans_(std::move(plans)) {
  if (buckets_.empty()) throw InvalidArgument("bucket list must be nonempty");
  for (std::size_t i = 0; i < buckets_.size(); ++i) {
    if (buckets_[i] == 0 || (i > 0 && buckets_[i] <= buckets_[i - 1])) {
      throw InvalidArgument("buckets must be positive and strictly increasing");
    }
  }
}

std::optional<TokenCount> PlanTable::bucket_for(TokenCount l) const {
  auto it = std::lower_bound(buckets_.begin(), buckets_.end(), l);
  if (it == buckets_.end()) return std::nullopt;
  return *it;
}

std::optional<Plan> PlanTable::lookup(const std::string& scene, const std::string& device_class,
                                      TokenCount l) const {
  const auto bucket = bucket_for(l);
  if (!bucket) return std::nullopt;
  auto it = plans_.find(PlanKey{scene, device_class, *bucket});
  if (it == plans_.end()) return std::nullopt;
  return it->second;
}

PlanTable build_plan_table(const std::map<std::string, TimingModel>& device_models,
                           const std::map<std::string, PlanConstraints>& scene_constraints,
                           std::vector<TokenCount> buckets) {
  if (buckets.empty()) throw InvalidArgument("bucket list must be nonempty");
  std::sort(buckets.begin(), buckets.end());
  std::map<PlanKey, Plan> plans;
  for (const auto& [scene, constraints] : scene_constraints) {
    for (const auto& [device, model] : device_models) {
      for (TokenCount bucket : buckets) {
        plans.emplace(PlanKey{scene, device, bucket}, solve_plan(model, constraints, bucket, 0.0));
      }
    }
  }
  return PlanTable(std::move(buckets), std::move(plans));
}

}  // namespace pdd
