#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chesslab {

class OptimizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SearchSpace {
  int dims = 1;
  std::vector<double> lower;
  std::vector<double> upper;
  bool ordering_constraint = false;  // enforce x_1 <= ... <= x_K by sorting

  // Default threshold box: [0, 0.6] per dimension.
  static SearchSpace thresholds(int k, double lo = 0.0, double hi = 0.6);
  void validate() const;
};

struct ObjectiveResult {
  double value = 0.0;
  double noise_se = 0.0;  // standard error of the reported value, if known
};

// Maps a parameter vector to a noisy score in [0,1]. The eval seed is
// derived deterministically per trial so stochastic backends stay
// reproducible end to end.
using Objective = std::function<ObjectiveResult(const std::vector<double>& params,
                                                uint64_t eval_seed)>;

struct Trial {
  std::vector<double> params;
  double value = 0.0;
  double noise_se = 0.0;
  std::string backend;
  double cost_seconds = 0.0;
  bool failed = false;
};

struct BayesOptOptions {
  int init_points = 8;
  int iterations = 25;
  uint64_t seed = 1;
  int candidate_pool = 4096;
  std::string backend = "custom";
  std::function<void(const Trial&)> on_trial;  // streaming hook, may be empty
};

struct BayesOptResult {
  std::vector<double> best_params;
  double best_value = 0.0;
  std::vector<Trial> trials;
  bool degenerate_fallback = false;  // constant observations: random search
};

// Gaussian-process surrogate (squared-exponential kernel with per-dimension
// length scales fit by marginal-likelihood grid search) with expected
// improvement maximized over a quasi-random candidate set. Deterministic
// trial sequence for a deterministic objective and fixed seed. Failed
// objective evaluations are recorded and skipped.
BayesOptResult bayes_opt(const Objective& objective, const SearchSpace& space,
                         const BayesOptOptions& options = {});

}  // namespace chesslab
