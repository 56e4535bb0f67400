#pragma once

#include <functional>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace chesslab {

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Decision { kPass, kIntervene };

// Everything a policy may look at for one White move. Policies are pure
// functions of (policy, context); per-game counters live here, owned by the
// game loop.
struct DecisionContext {
  int move_number = 0;  // t, 1-based
  double p_w = 0.5;     // calibrated
  double p_s = 0.5;     // calibrated
  double delta = 0.0;   // p_s - p_w
  double gap = 0.0;     // max(0, delta)
  int assists_used = 0;
  std::optional<int> last_intervention_move;
};

DecisionContext make_context(int move_number, double p_w, double p_s, int assists_used,
                             std::optional<int> last_intervention_move = std::nullopt);

// --- Random baseline ---------------------------------------------------

struct RandomPolicy {
  std::set<int> planned_moves;  // K distinct move numbers in [1, horizon]
  int budget() const { return static_cast<int>(planned_moves.size()); }
};

// Uniform sample of k distinct move numbers without replacement.
RandomPolicy draw_random_plan(int k, int horizon, std::mt19937_64& rng);

Decision decide_random(const RandomPolicy& policy, const DecisionContext& ctx);

// --- Fixed thresholds ----------------------------------------------------

struct ThresholdPolicy {
  std::vector<double> thresholds;  // consumed in stored order
  int budget() const { return static_cast<int>(thresholds.size()); }
};

// Fire assist k when gap >= T_k, boundary inclusive.
Decision decide_threshold(const ThresholdPolicy& policy, const DecisionContext& ctx);

// --- Maximal-delta-sum ---------------------------------------------------

// Expected sum of the top-j suffix deltas given the current decision state.
// Weak-conditioned predictors look at p_w, strong-conditioned ones at p_s;
// both may use the move number and any running statistics carried by their
// closure.
using SuffixPredictor = std::function<double(const DecisionContext&)>;

struct MaxDeltaPolicy {
  std::vector<SuffixPredictor> predictors_weak;    // [j-1] -> S^W_j, j = 1..K
  std::vector<SuffixPredictor> predictors_strong;  // [j-1] -> S^S_j, j = 1..K-1
  std::vector<double> slacks;                      // epsilon_1..epsilon_K
  int budget() const { return static_cast<int>(slacks.size()); }
};

// With r = K - assists_used assists remaining, intervene iff
//   delta + S^S_{r-1}(m, p_s) + epsilon_{K-r+1} >= S^W_r(m, p_w),
// where S_0 == 0 and at most one intervention fires per move. Predictor
// evaluations are monotonized over j (cumulative max) before use.
Decision decide_maxdelta(const MaxDeltaPolicy& policy, const DecisionContext& ctx);

}  // namespace chesslab
