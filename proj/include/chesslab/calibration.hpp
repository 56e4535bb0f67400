#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "chesslab/game_model.hpp"

namespace chesslab {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One observation: raw engine score alpha against the game's final result.
struct CalibrationPair {
  double alpha = 0.0;
  double score = 0.0;
};

// Nondecreasing step function on [0,1]. Evaluation is right-continuous:
// queries below the first breakpoint return the first value, at or above a
// breakpoint its value applies until the next one.
struct IsotonicCurve {
  std::vector<double> breakpoints;  // strictly increasing
  std::vector<double> values;       // nondecreasing
  int move_bucket = 0;
  bool degenerate = false;  // all alphas identical; constant-mean fallback

  double eval(double x) const;
};

// Pool-adjacent-violators fit: the nondecreasing step function minimizing
// MSE over the pairs. Ties in alpha are averaged before pooling. Requires
// at least 2 pairs.
IsotonicCurve fit_isotonic(std::vector<CalibrationPair> pairs);

struct MonotoneNetConfig {
  std::vector<int> hidden_layers{16, 16};
  int epochs = 2000;
  double learning_rate = 0.05;
  uint64_t seed = 1;
};

// sigma(g(x)) with g a feedforward net whose weights are projected to be
// nonnegative after every step; monotone nondecreasing by construction.
class MonotoneNet {
 public:
  struct Layer {
    std::vector<std::vector<double>> weights;  // [out][in], all >= 0
    std::vector<double> biases;
  };

  double eval(double x) const;
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  friend MonotoneNet fit_monotone_net(const std::vector<CalibrationPair>&,
                                      const MonotoneNetConfig&);
  std::vector<Layer> layers_;  // hidden layers + final scalar layer
};

// Full-batch gradient descent on MSE with a nonnegativity projection after
// each step; deterministic given config.seed. Requires >= 10 pairs. Throws
// CalibrationError carrying the epoch index if the loss diverges.
MonotoneNet fit_monotone_net(const std::vector<CalibrationPair>& pairs,
                             const MonotoneNetConfig& config = {});

struct MseComparison {
  double mse_isotonic = 0.0;
  double mse_net = 0.0;
  enum class Winner { kIsotonic, kMonotoneNet } winner = Winner::kIsotonic;
};

// Holdout MSE of both fits; ties go to the isotonic curve, which is also
// what downstream consumers default to.
MseComparison compare_mse(const std::vector<CalibrationPair>& holdout,
                          const IsotonicCurve& isotonic, const MonotoneNet& net);

enum class CalibrationMethod { kIsotonic, kMonotoneNet };

// Per-move-bucket calibration curves fit on an annotated no-intervention
// dataset. Buckets partition [1, horizon]; buckets with fewer than
// min_samples pairs borrow the nearest populated bucket's curve. Monotone
// net fits are tabulated into step curves so every bucket serializes the
// same way.
struct CalibrationBank {
  int bucket_width = 5;
  int horizon = 200;
  std::vector<IsotonicCurve> curves;  // one per bucket
  std::vector<bool> fitted;           // false = borrowed from a neighbor

  int bucket_of(int move_number) const;
  const IsotonicCurve& curve_for_move(int move_number) const;
  double calibrate(int move_number, double raw) const;
};

struct BankConfig {
  CalibrationMethod method = CalibrationMethod::kIsotonic;
  int bucket_width = 5;
  int horizon = 200;
  int min_samples = 20;
  MonotoneNetConfig net;
};

CalibrationBank build_bank(const Dataset& d0, const BankConfig& config = {});

// Fills pw/ps/gap on every point that has raw values.
void apply_calibration(Dataset& dataset, const CalibrationBank& bank);

// An identity bank (curves y = x everywhere); used before any data exists.
CalibrationBank identity_bank(int horizon = 200);

void save_bank(const CalibrationBank& bank, const std::filesystem::path& path);
CalibrationBank load_bank(const std::filesystem::path& path);

}  // namespace chesslab
