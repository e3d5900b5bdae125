#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "pdd/timing.h"

namespace pdd {

struct PlanConstraints {
  double xi_scene = 0.25;  // quality floor on r
  Millis tau = 100.0;      // maximum tolerable display TPOT

  void validate(const TimingModel& model) const;
};

struct Plan {
  double r = 1.0;
  TokenCount L = 1;
  bool feasible = false;
  Millis achieved_tpot_smooth = 0.0;
  Millis ttft_d_estimate = 0.0;

  friend bool operator==(const Plan&, const Plan&) = default;
};

// Smallest r the planner will hand out. r = 0 would drop the whole content
// block and is outside the timing formulas' domain.
inline constexpr double kMinRatio = 0.01;

struct RatioInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return lo > hi; }
};

struct LengthInterval {
  std::int64_t lo = 2;
  std::int64_t hi = 1;
  bool empty() const { return lo > hi; }
};

// Quality floor and break-even ceiling on r. The interval may be empty.
RatioInterval r_bounds(const TimingModel& model, const PlanConstraints& constraints,
                       TokenCount l);

// Display-speed floor and cloud-occupancy ceiling on L. L_lo is clamped below
// at 2; the interval may be empty.
LengthInterval l_bounds(const TimingModel& model, const PlanConstraints& constraints,
                        TokenCount l, double r, Millis ttft_c, Millis ttft_d);

// Closed-form solution of the (r, L) program. TTFT_d grows with r and does not
// depend on L, so the optimum is the smallest admissible r and, for that r, the
// smallest L meeting tau. Infeasibility is reported in Plan::feasible:
//  - empty r-interval: r = 1 (never go below the quality floor)
//  - empty L-interval: L = max(L_hi, 1); the occupancy cap wins over tau
Plan solve_plan(const TimingModel& model, const PlanConstraints& constraints, TokenCount l,
                Millis rtt);

// Fills in the derived fields of a given (r, L) and checks both constraints by
// substitution. Used for sweeps that override the solved plan.
Plan evaluate_plan(const TimingModel& model, const PlanConstraints& constraints, TokenCount l,
                   Millis rtt, double r, TokenCount L);

struct PlanKey {
  std::string scene;
  std::string device_class;
  TokenCount bucket = 0;

  friend auto operator<=>(const PlanKey&, const PlanKey&) = default;
};

inline const std::vector<TokenCount>& default_buckets() {
  static const std::vector<TokenCount> kBuckets{1024, 2048, 4096, 8192, 16384, 32768};
  return kBuckets;
}

class PlanTable {
 public:
  PlanTable() = default;
  PlanTable(std::vector<TokenCount> buckets, std::map<PlanKey, Plan> plans);

  // Plan for the smallest bucket >= l; nullopt when the key is unknown or l
  // is above the largest bucket.
  std::optional<Plan> lookup(const std::string& scene, const std::string& device_class,
                             TokenCount l) const;
  std::optional<TokenCount> bucket_for(TokenCount l) const;

  const std::map<PlanKey, Plan>& plans() const { return plans_; }
  const std::vector<TokenCount>& buckets() const { return buckets_; }
  std::size_t size() const { return plans_.size(); }

 private:
  std::vector<TokenCount> buckets_;
  std::map<PlanKey, Plan> plans_;
};

// Solves one plan per (scene, device class, bucket), planning each bucket at
// its upper boundary with zero RTT. Both are the worst case for the display
// pace: a longer prompt or a faster round trip leaves more device prefill to
// amortize. The occupancy ceiling does not depend on RTT.
PlanTable build_plan_table(const std::map<std::string, TimingModel>& device_models,
                           const std::map<std::string, PlanConstraints>& scene_constraints,
                           std::vector<TokenCount> buckets);

}  // namespace pdd
