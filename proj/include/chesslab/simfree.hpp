#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chesslab/calibration.hpp"
#include "chesslab/game_model.hpp"

namespace chesslab {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-move-number banks of calibrated (p_w, p_s) pairs observed in D0, plus
// the empirical mean outcome. An empty bank at move t ends a simulated game
// (no logged game lasted that long).
struct MoveBank {
  int horizon = 200;
  std::vector<std::vector<std::pair<double, double>>> pairs;  // [t-1]
  double baseline_mean = 0.5;

  const std::vector<std::pair<double, double>>& at(int t) const {
    return pairs[static_cast<size_t>(t - 1)];
  }
  size_t total_pairs() const;
};

MoveBank build_banks(const Dataset& d0, int horizon = 200);

void save_banks(const MoveBank& banks, const std::filesystem::path& path);
MoveBank load_banks(const std::filesystem::path& path);

// Binned uplift estimate: per move bin, monotone-in-d curves mu1 (intervened,
// from DI) and mu0 (untouched, from D0) tabulated on a uniform d-grid; the
// lookup interpolates linearly and clamps the difference to [-1, 1].
struct UpliftTable {
  int bin_width = 10;
  int horizon = 200;
  int grid_size = 101;
  std::vector<std::vector<double>> mu1;    // [bin][node]
  std::vector<std::vector<double>> mu0;    // [bin][node]
  std::vector<std::vector<double>> delta;  // [bin][node]
  std::vector<bool> populated;             // false: no usable DI data, delta == 0
  std::vector<std::vector<long>> count1;   // DI pairs nearest each node
  std::vector<std::vector<long>> count0;   // D0 pairs nearest each node

  int bin_of(int t) const;
  double lookup(int t, double d) const;
  // A cell is populated when both sides have data support near that gap
  // value; isotonic tails outside the support are extrapolations.
  bool cell_populated(int bin, int node, long min_count = 20) const;
};

UpliftTable fit_uplift(const Dataset& d0, const Dataset& di, int bin_width = 10,
                       int d_grid_size = 101, int horizon = 200);

void save_uplift(const UpliftTable& table, const std::filesystem::path& path);
UpliftTable load_uplift(const std::filesystem::path& path);

struct SimConfig {
  int horizon = 200;
  std::vector<double> uplift_scales;  // lambda_k, padded with 1.0 to the budget
  long runs = 10000;
  uint64_t seed = 1;
  int threads = 1;
};

struct SimEvent {
  int k = 0;
  int t = 0;
  double d = 0.0;
};

struct SimResult {
  double v = 0.0;
  std::vector<SimEvent> events;
};

// One simulated game: walk the banks, spend assists when the sampled gap
// clears the next threshold, then apply the recorded uplifts in order with
// clipping.
SimResult simulate_game(const MoveBank& banks, const UpliftTable& uplift,
                        const std::vector<double>& thresholds, const SimConfig& config,
                        std::mt19937_64& rng);

struct SimReport {
  double avg_score = 0.0;
  double stddev = 0.0;  // per-run standard deviation of v
  std::vector<double> frac_fired;  // per assist k
  std::vector<double> avg_move;    // mean move number over runs where k fired
  long runs = 0;
};

// Monte Carlo mean over config.runs independent games. Per-run RNG streams
// derive from (seed, run index) and the reduction is in run order, so the
// report is bit-identical for a given seed regardless of thread count.
SimReport avg_score(const MoveBank& banks, const UpliftTable& uplift,
                    const std::vector<double>& thresholds, const SimConfig& config);

}  // namespace chesslab
