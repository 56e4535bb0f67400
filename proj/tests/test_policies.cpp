#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "chesslab/policies.hpp"

using namespace chesslab;

TEST_CASE("random policy fires exactly on planned moves with budget left") {
  RandomPolicy policy;
  policy.planned_moves = {4, 9};
  CHECK(decide_random(policy, make_context(4, 0.5, 0.5, 0)) == Decision::kIntervene);
  CHECK(decide_random(policy, make_context(5, 0.5, 0.9, 0)) == Decision::kPass);
  CHECK(decide_random(policy, make_context(9, 0.5, 0.5, 1)) == Decision::kIntervene);
  CHECK(decide_random(policy, make_context(9, 0.5, 0.5, 2)) == Decision::kPass);  // spent
}

TEST_CASE("draw_random_plan shapes") {
  std::mt19937_64 rng(3);
  auto all = draw_random_plan(6, 6, rng);
  CHECK(all.planned_moves == std::set<int>{1, 2, 3, 4, 5, 6});
  auto none = draw_random_plan(0, 10, rng);
  CHECK(none.planned_moves.empty());
  CHECK(decide_random(none, make_context(1, 0.0, 1.0, 0)) == Decision::kPass);
  CHECK_THROWS_AS(draw_random_plan(11, 10, rng), PolicyError);
}

TEST_CASE("draw_random_plan is uniform (chi-square)") {
  std::mt19937_64 rng(12345);
  const int horizon = 30, k = 3, draws = 4000;
  std::map<int, int> counts;
  for (int i = 0; i < draws; ++i) {
    auto plan = draw_random_plan(k, horizon, rng);
    CHECK(static_cast<int>(plan.planned_moves.size()) == k);
    for (int t : plan.planned_moves) {
      CHECK(t >= 1);
      CHECK(t <= horizon);
      counts[t]++;
    }
  }
  double expected = static_cast<double>(draws) * k / horizon;
  double chi2 = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    double diff = counts[t] - expected;
    chi2 += diff * diff / expected;
  }
  // 29 degrees of freedom, p = 0.001 critical value.
  CHECK(chi2 < 58.30);
}

TEST_CASE("threshold policy boundary and budget behavior") {
  ThresholdPolicy policy;
  policy.thresholds = {0.205, 0.3};

  CHECK(decide_threshold(policy, make_context(10, 0.5, 0.71, 0)) ==
        Decision::kIntervene);  // gap 0.21 >= 0.205
  CHECK(decide_threshold(policy, make_context(10, 0.5, 0.70, 0)) == Decision::kPass);
  // A gap exactly at the boundary fires (inclusive comparison); use values
  // that are exact in binary.
  ThresholdPolicy exact;
  exact.thresholds = {0.25};
  CHECK(decide_threshold(exact, make_context(10, 0.5, 0.75, 0)) == Decision::kIntervene);
  CHECK(decide_threshold(policy, make_context(10, 0.6, 0.6, 0)) == Decision::kPass);  // gap 0
  // Second assist needs the second threshold.
  CHECK(decide_threshold(policy, make_context(11, 0.5, 0.75, 1)) == Decision::kPass);
  CHECK(decide_threshold(policy, make_context(11, 0.5, 0.81, 1)) == Decision::kIntervene);
  // Budget spent: always pass.
  CHECK(decide_threshold(policy, make_context(12, 0.0, 1.0, 2)) == Decision::kPass);
}

TEST_CASE("threshold policy is monotone in gap") {
  ThresholdPolicy policy;
  policy.thresholds = {0.17};
  for (int i = 0; i <= 100; ++i) {
    double gap = i / 100.0;
    auto lo = decide_threshold(policy, make_context(5, 0.4, 0.4 + gap, 0));
    auto hi = decide_threshold(policy, make_context(5, 0.4, 0.4 + std::min(1.0, gap + 0.01), 0));
    if (lo == Decision::kIntervene) CHECK(hi == Decision::kIntervene);
  }
}

namespace {

MaxDeltaPolicy zero_policy(int budget) {
  MaxDeltaPolicy policy;
  for (int j = 0; j < budget; ++j)
    policy.predictors_weak.push_back([](const DecisionContext&) { return 0.0; });
  for (int j = 0; j + 1 < budget; ++j)
    policy.predictors_strong.push_back([](const DecisionContext&) { return 0.0; });
  policy.slacks.assign(static_cast<size_t>(budget), 0.0);
  return policy;
}

}  // namespace

TEST_CASE("maxdelta degenerate oracle: zero predictors fire exactly when delta >= 0") {
  auto policy = zero_policy(3);
  CHECK(decide_maxdelta(policy, make_context(5, 0.5, 0.5, 0)) == Decision::kIntervene);
  CHECK(decide_maxdelta(policy, make_context(5, 0.5, 0.6, 1)) == Decision::kIntervene);
  CHECK(decide_maxdelta(policy, make_context(5, 0.6, 0.5, 0)) == Decision::kPass);  // delta < 0
  CHECK(decide_maxdelta(policy, make_context(5, 0.5, 0.6, 3)) == Decision::kPass);  // spent
}

TEST_CASE("maxdelta with one assist reduces to delta + eps >= S^W_1") {
  MaxDeltaPolicy policy;
  policy.predictors_weak.push_back([](const DecisionContext&) { return 0.2; });
  policy.slacks = {0.05};
  // delta 0.16: 0.16 + 0.05 >= 0.2 -> fire
  CHECK(decide_maxdelta(policy, make_context(3, 0.5, 0.66, 0)) == Decision::kIntervene);
  // delta 0.10: 0.15 < 0.2 -> wait
  CHECK(decide_maxdelta(policy, make_context(3, 0.5, 0.60, 0)) == Decision::kPass);
}

TEST_CASE("maxdelta fires when nothing is left to wait for") {
  MaxDeltaPolicy policy = zero_policy(1);
  // S^W_1 == 0 at end of game; any positive delta fires.
  CHECK(decide_maxdelta(policy, make_context(40, 0.5, 0.51, 0)) == Decision::kIntervene);
}

TEST_CASE("maxdelta allows at most one intervention per move") {
  auto policy = zero_policy(2);
  auto ctx = make_context(7, 0.4, 0.8, 1, 7);  // already intervened at move 7
  CHECK(decide_maxdelta(policy, ctx) == Decision::kPass);
  auto next = make_context(8, 0.4, 0.8, 1, 7);
  CHECK(decide_maxdelta(policy, next) == Decision::kIntervene);
}

TEST_CASE("maxdelta hand trace on a three-move synthetic game") {
  // Budget 2. Hand-built predictors as plain tables over the move number.
  auto table = [](std::map<int, double> vals) {
    return [vals](const DecisionContext& ctx) {
      auto it = vals.find(ctx.move_number);
      return it == vals.end() ? 0.0 : it->second;
    };
  };
  MaxDeltaPolicy policy;
  policy.predictors_weak.push_back(table({{1, 0.30}, {2, 0.20}, {3, 0.00}}));  // S^W_1
  policy.predictors_weak.push_back(table({{1, 0.45}, {2, 0.25}, {3, 0.00}}));  // S^W_2
  policy.predictors_strong.push_back(table({{1, 0.25}, {2, 0.15}, {3, 0.00}}));  // S^S_1
  policy.slacks = {0.0, 0.0};

  // Game: (p_w, p_s) per move.
  // m=1: delta 0.10. r=2: 0.10 + S^S_1(1) 0.25 = 0.35 < S^W_2(1) 0.45 -> pass.
  // m=2: delta 0.35. r=2: 0.35 + 0.15 = 0.50 >= 0.25 -> fire assist 1.
  // m=3: delta 0.05. r=1: 0.05 + 0 >= S^W_1(3) 0.00 -> fire assist 2.
  int assists = 0;
  std::optional<int> last;
  std::vector<Decision> sequence;
  struct MoveData {
    int m;
    double pw, ps;
  };
  for (const MoveData& md : {MoveData{1, 0.50, 0.60}, MoveData{2, 0.40, 0.75},
                             MoveData{3, 0.50, 0.55}}) {
    auto ctx = make_context(md.m, md.pw, md.ps, assists, last);
    Decision d = decide_maxdelta(policy, ctx);
    sequence.push_back(d);
    if (d == Decision::kIntervene) {
      ++assists;
      last = md.m;
    }
  }
  CHECK(sequence == std::vector<Decision>{Decision::kPass, Decision::kIntervene,
                                          Decision::kIntervene});
}
