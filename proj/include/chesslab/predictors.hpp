#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "chesslab/game_model.hpp"
#include "chesslab/policies.hpp"

namespace chesslab {

class PredictorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sum of the min(k, n) largest suffix deltas after clipping at zero; the
// empty list sums to zero.
double top_k_delta_sum(const std::vector<double>& deltas, int k);

inline constexpr int kFeatureDim = 7;

// (t, p_w, p_s, delta, mean past gap, max past gap, past move count)
using FeatureVector = std::array<double, kFeatureDim>;

struct RunningGapStats {
  double mean = 0.0;
  double max = 0.0;
  int count = 0;
  void update(double gap) {
    mean = (mean * count + gap) / (count + 1);
    max = std::max(max, gap);
    ++count;
  }
};

FeatureVector make_features(int t, double p_w, double p_s, const RunningGapStats& past);
// Strong-conditioned variant: the position value after an intervention is
// p_s, so both probability slots carry p_s and the current delta is zero.
FeatureVector make_features_strong(int t, double p_s, const RunningGapStats& past);

enum class PredictorFamily { kLinear, kForest, kMlp };
enum class TargetSide { kWeak, kStrong };

std::string to_string(PredictorFamily f);
std::optional<PredictorFamily> predictor_family_from_string(std::string_view s);

struct TrainingExample {
  FeatureVector features{};
  double target = 0.0;
};

// One example per (game, t) with a nonempty strict suffix, from a calibrated
// no-intervention dataset. Targets are top-k sums of suffix gaps.
std::vector<TrainingExample> build_training_set(const Dataset& d0, int k, TargetSide side);

struct PredictorHyperparams {
  double ridge_lambda = 1e-4;
  int forest_trees = 200;
  int forest_max_depth = 12;
  int forest_min_leaf = 5;
  int forest_max_samples = 20000;  // per-tree bootstrap cap
  int mlp_hidden = 32;             // two hidden layers of this width
  int mlp_epochs = 60;
  int mlp_batch = 64;
  double mlp_lr = 0.01;
  double mlp_weight_decay = 1e-4;
};

// A fitted suffix-sum regressor. Predictions are clipped to [0, k].
class PredictorModel {
 public:
  PredictorFamily family() const { return family_; }
  int target_k() const { return target_k_; }
  TargetSide side() const { return side_; }

  double predict(const FeatureVector& x) const;

  std::string serialize() const;  // family-tagged JSON with self-check hash
  static PredictorModel deserialize(const std::string& text);

 private:
  static PredictorModel deserialize_impl(const std::string& text);

 public:

 private:
  friend PredictorModel fit_predictor(PredictorFamily, const std::vector<TrainingExample>&,
                                      int, TargetSide, const PredictorHyperparams&, uint64_t);

  struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  struct Tree {
    std::vector<TreeNode> nodes;
  };

  PredictorFamily family_ = PredictorFamily::kLinear;
  int target_k_ = 1;
  TargetSide side_ = TargetSide::kWeak;

  // Feature standardization (linear and mlp).
  std::array<double, kFeatureDim> feat_mean_{};
  std::array<double, kFeatureDim> feat_scale_{};

  std::array<double, kFeatureDim + 1> linear_weights_{};  // + bias

  std::vector<Tree> trees_;

  // MLP: two hidden ReLU layers and a linear output.
  std::vector<std::vector<double>> mlp_w1_, mlp_w2_;
  std::vector<double> mlp_b1_, mlp_b2_, mlp_w3_;
  double mlp_b3_ = 0.0;
};

PredictorModel fit_predictor(PredictorFamily family,
                             const std::vector<TrainingExample>& training_set, int k,
                             TargetSide side, const PredictorHyperparams& params = {},
                             uint64_t seed = 1);

// The predictor set Algorithm-1-style policies consume: weak-conditioned
// S^W_1..S^W_K and strong-conditioned S^S_1..S^S_{K-1}.
struct PredictorBundle {
  int budget = 0;
  std::vector<PredictorModel> weak;    // size K
  std::vector<PredictorModel> strong;  // size K-1
};

PredictorBundle train_bundle(const Dataset& d0, int budget, PredictorFamily family,
                             const PredictorHyperparams& params = {}, uint64_t seed = 1);

void save_bundle(const PredictorBundle& bundle, const std::filesystem::path& path);
PredictorBundle load_bundle(const std::filesystem::path& path);

// Wires a bundle into a MaxDeltaPolicy. The returned policy's predictors
// read the running-gap statistics through `stats`, which the game loop owns
// and updates after every decision.
MaxDeltaPolicy make_maxdelta_policy(const PredictorBundle& bundle,
                                    const std::vector<double>& slacks,
                                    const RunningGapStats* stats);

}  // namespace chesslab
