#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chesslab/calibration.hpp"
#include "chesslab/engine_bridge.hpp"
#include "chesslab/game_model.hpp"
#include "chesslab/optimize.hpp"
#include "chesslab/policies.hpp"
#include "chesslab/predictors.hpp"

namespace chesslab {

struct MatchConfig {
  std::filesystem::path engine_path;
  std::filesystem::path strong_engine_path;  // empty: same binary as engine_path
  int weak_elo = 1500;                       // W and B
  int strong_elo = 3190;                     // C
  bool strong_limit_strength = false;        // C plays at full strength by default
  int budget = 0;
  int samples_per_decision = 10;
  int horizon = 200;
  // Range for randomly planned intervention moves (random policy plans and
  // DI's t*). 0 means the full horizon; a value near the typical game length
  // keeps most planned interventions inside real games.
  int plan_horizon = 0;
  uint64_t seed = 1;
  int games = 1;
  int threads = 1;
  SearchLimit weak_limit = SearchLimit::movetime(100);
  SearchLimit strong_limit = SearchLimit::movetime(200);

  // Local adjudication: call the game once both engines report an extreme
  // score for this many consecutive plies. Keeps desk-scale games short.
  bool adjudicate = true;
  double adjudicate_score = 0.96;
  int adjudicate_plies = 3;

  void validate() const;
};

struct PolicySpec {
  enum class Kind { kNone, kRandom, kThreshold, kMaxDelta };
  Kind kind = Kind::kNone;
  int random_budget = 0;                   // kRandom
  std::vector<double> thresholds;          // kThreshold
  std::vector<double> slacks;              // kMaxDelta
  const PredictorBundle* bundle = nullptr; // kMaxDelta

  int budget() const;
  std::string tag() const;
};

struct EnginePair {
  EngineSession weak;
  EngineSession strong;
};

EnginePair start_engines(const MatchConfig& config);

// One engine-vs-engine game under `policy`. Samples both engines before
// every White move, logs a MovePoint, consults the policy, and plays either
// the first weak sample or the strong sample with maximal raw WDL. Black
// always plays the weak engine's move. Throws EngineError on engine failure.
GameRecord play_game(const MatchConfig& config, const PolicySpec& policy,
                     const CalibrationBank& bank, EnginePair& engines,
                     std::mt19937_64& game_rng, uint64_t game_index);

// Per-game progress callback; `line` is a single JSON object.
using StatusFn = std::function<void(const std::string& line)>;

// N no-intervention games with full logging; calibration defaults to the
// identity (raw values pass through) since the bank is usually fit from this
// very dataset afterwards. Aborted games are excluded and tallied in
// source_meta["aborted"].
Dataset generate_d0(const MatchConfig& config, const CalibrationBank* bank = nullptr,
                    const StatusFn& status = {});

// N games with one uniformly planned intervention move t* each; if the game
// ends before t*, the planned event is kept with fired=false.
Dataset generate_di(const MatchConfig& config, const CalibrationBank* bank = nullptr,
                    const StatusFn& status = {});

struct OracleResult {
  double base_score = 0.0;
  double best_score = 0.0;
  std::vector<double> per_move_scores;  // one per White move of the base game
};

// Post-hoc upper bound for one base game: replays the recorded prefix with a
// forced intervention at every White move in turn and takes the best result.
OracleResult oracle_upper_bound(const MatchConfig& config, const CalibrationBank& bank,
                                EnginePair& engines, std::mt19937_64& game_rng,
                                uint64_t game_index);

struct HindsightResult {
  double committed_result = 0.0;  // intervene at the first trigger
  double deferred_result = 0.0;   // skip it, intervene at the next trigger
  double max_result = 0.0;
  bool triggered = false;
};

// Budget-1 branching experiment: at the first trigger the game forks; branch
// A commits, branch B waits for the next trigger. Both replay to completion.
HindsightResult hindsight_play(const MatchConfig& config, const PolicySpec& policy,
                               const CalibrationBank& bank, EnginePair& engines,
                               std::mt19937_64& game_rng, uint64_t game_index);

// Threshold-vector objective backed by real engine games: each evaluation
// plays `games_per_eval` fresh games and reports the mean score with its
// standard error. One engine pair is spawned per objective and reused.
Objective make_engine_objective(const MatchConfig& config, const CalibrationBank& bank,
                                int games_per_eval);

}  // namespace chesslab
