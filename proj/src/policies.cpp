#include "chesslab/policies.hpp"

#include <algorithm>

namespace chesslab {

DecisionContext make_context(int move_number, double p_w, double p_s, int assists_used,
                             std::optional<int> last_intervention_move) {
  DecisionContext ctx;
  ctx.move_number = move_number;
  ctx.p_w = p_w;
  ctx.p_s = p_s;
  ctx.delta = p_s - p_w;
  ctx.gap = std::max(0.0, ctx.delta);
  ctx.assists_used = assists_used;
  ctx.last_intervention_move = last_intervention_move;
  return ctx;
}

RandomPolicy draw_random_plan(int k, int horizon, std::mt19937_64& rng) {
  if (k < 0) throw PolicyError("budget must be nonnegative");
  if (k > horizon) throw PolicyError("budget exceeds horizon");
  RandomPolicy policy;
  // Floyd's algorithm: uniform k-subset of [1, horizon] without replacement.
  for (int j = horizon - k + 1; j <= horizon; ++j) {
    int t = std::uniform_int_distribution<int>(1, j)(rng);
    if (!policy.planned_moves.insert(t).second) policy.planned_moves.insert(j);
  }
  return policy;
}

Decision decide_random(const RandomPolicy& policy, const DecisionContext& ctx) {
  if (ctx.assists_used >= policy.budget()) return Decision::kPass;
  return policy.planned_moves.count(ctx.move_number) ? Decision::kIntervene : Decision::kPass;
}

Decision decide_threshold(const ThresholdPolicy& policy, const DecisionContext& ctx) {
  if (ctx.assists_used >= policy.budget()) return Decision::kPass;
  double next_threshold = policy.thresholds[static_cast<size_t>(ctx.assists_used)];
  return ctx.gap >= next_threshold ? Decision::kIntervene : Decision::kPass;
}

namespace {

// Cumulative-max over j keeps predicted sums nondecreasing in j; S_0 == 0.
double monotone_suffix_eval(const std::vector<SuffixPredictor>& predictors, int j,
                            const DecisionContext& ctx) {
  if (j <= 0) return 0.0;
  if (j > static_cast<int>(predictors.size()))
    throw PolicyError("suffix predictor index out of range");
  double best = 0.0;
  for (int i = 1; i <= j; ++i) {
    const auto& f = predictors[static_cast<size_t>(i - 1)];
    if (!f) throw PolicyError("suffix predictor not set");
    best = std::max(best, f(ctx));
  }
  return best;
}

}  // namespace

Decision decide_maxdelta(const MaxDeltaPolicy& policy, const DecisionContext& ctx) {
  int budget = policy.budget();
  if (ctx.assists_used >= budget) return Decision::kPass;
  if (ctx.last_intervention_move && ctx.move_number <= *ctx.last_intervention_move)
    return Decision::kPass;  // at most one intervention per move

  int remaining = budget - ctx.assists_used;
  double wait_value = monotone_suffix_eval(policy.predictors_weak, remaining, ctx);
  double after_value = monotone_suffix_eval(policy.predictors_strong, remaining - 1, ctx);
  double slack = policy.slacks[static_cast<size_t>(budget - remaining)];
  return ctx.delta + after_value + slack >= wait_value ? Decision::kIntervene
                                                       : Decision::kPass;
}

}  // namespace chesslab
