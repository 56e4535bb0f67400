#include "chesslab/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "chesslab/chess.hpp"
#include "chesslab/util.hpp"

namespace chesslab {

using nlohmann::json;

void MatchConfig::validate() const {
  if (engine_path.empty()) throw EngineError("engine_path not set");
  if (strong_elo < weak_elo) throw EngineError("strong_elo must be >= weak_elo");
  if (horizon < 1) throw EngineError("horizon must be >= 1");
  if (budget < 0) throw EngineError("budget must be >= 0");
  if (samples_per_decision < 1) throw EngineError("samples_per_decision must be >= 1");
  if (games < 1) throw EngineError("games must be >= 1");
}

int PolicySpec::budget() const {
  switch (kind) {
    case Kind::kNone: return 0;
    case Kind::kRandom: return random_budget;
    case Kind::kThreshold: return static_cast<int>(thresholds.size());
    case Kind::kMaxDelta: return static_cast<int>(slacks.size());
  }
  return 0;
}

std::string PolicySpec::tag() const {
  switch (kind) {
    case Kind::kNone: return "none";
    case Kind::kRandom: return random_budget == 1 ? "random-single" : "random";
    case Kind::kThreshold: return "threshold";
    case Kind::kMaxDelta: return "maxdelta";
  }
  return "none";
}

EnginePair start_engines(const MatchConfig& config) {
  config.validate();
  EngineConfig weak_cfg;
  weak_cfg.executable = config.engine_path;
  weak_cfg.elo = config.weak_elo;
  weak_cfg.limit_strength = true;
  weak_cfg.show_wdl = true;
  weak_cfg.limit = config.weak_limit;

  EngineConfig strong_cfg;
  strong_cfg.executable =
      config.strong_engine_path.empty() ? config.engine_path : config.strong_engine_path;
  strong_cfg.elo = config.strong_elo;
  strong_cfg.limit_strength = config.strong_limit_strength;
  strong_cfg.show_wdl = true;
  strong_cfg.limit = config.strong_limit;

  return EnginePair{start_engine(weak_cfg), start_engine(strong_cfg)};
}

namespace {

std::string make_game_id(const char* prefix, uint64_t seed, uint64_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%08llx-%06llu", prefix,
                static_cast<unsigned long long>(seed & 0xffffffffULL),
                static_cast<unsigned long long>(index));
  return buf;
}

struct LoopOptions {
  std::vector<std::string> prefix;   // moves replayed before the loop starts
  bool log_points = true;            // sample engines at every White move
  int forced_intervention_move = -1; // intervene exactly here, no policy
  int suppress_trigger_at = -1;      // hindsight deferral: pass at this move
  const RandomPolicy* plan = nullptr;          // externally drawn random plan
  std::vector<std::string>* trigger_prefix = nullptr;  // out: moves before 1st assist
  RunningGapStats* trigger_stats = nullptr;            // out: stats at that point
  RunningGapStats initial_stats;     // carried into the loop (hindsight branch B)
};

const MoveSample& max_raw_wdl(const std::vector<MoveSample>& samples) {
  size_t best = 0;
  for (size_t i = 1; i < samples.size(); ++i)
    if (samples[i].score_raw > samples[best].score_raw) best = i;
  return samples[best];
}

double mean_score(const std::vector<MoveSample>& samples) {
  double sum = 0.0;
  for (const auto& s : samples) sum += s.score_raw;
  return sum / static_cast<double>(samples.size());
}

// The single engine-game loop behind play_game, dataset generation, the
// oracle replays and the hindsight branches.
GameRecord run_loop(const MatchConfig& cfg, const PolicySpec* policy,
                    const CalibrationBank& bank, EnginePair& engines,
                    std::mt19937_64& rng, const std::string& game_id,
                    const LoopOptions& opts) {
  engines.weak.new_game();
  engines.strong.new_game();

  GameRecord record;
  record.game_id = game_id;
  record.white_elo = cfg.weak_elo;
  record.black_elo = cfg.weak_elo;
  record.oracle_elo = cfg.strong_elo;

  Game game;
  for (const auto& u : opts.prefix)
    if (!game.play_uci(u)) throw EngineError("illegal prefix move: " + u);

  int budget = policy ? policy->budget() : 0;
  int plan_horizon = cfg.plan_horizon > 0 ? std::min(cfg.plan_horizon, cfg.horizon)
                                          : cfg.horizon;
  RandomPolicy plan;
  if (policy && policy->kind == PolicySpec::Kind::kRandom) {
    plan = opts.plan ? *opts.plan : draw_random_plan(policy->random_budget, plan_horizon, rng);
  }
  RunningGapStats stats = opts.initial_stats;
  MaxDeltaPolicy maxdelta;
  if (policy && policy->kind == PolicySpec::Kind::kMaxDelta) {
    if (policy->bundle == nullptr) throw EngineError("maxdelta policy needs a predictor bundle");
    maxdelta = make_maxdelta_policy(*policy->bundle, policy->slacks, &stats);
  }

  int assists = 0;
  std::optional<int> last_intervention;
  int extreme_dir = 0, extreme_streak = 0;
  double last_pw = 0.5;

  auto finalize = [&](double result, Termination term) {
    record.moves = game.uci_moves();
    record.result = result;
    record.termination = term;
    return record;
  };

  // Returns true when the position has been one-sided long enough to call.
  auto register_eval = [&](double white_score) {
    if (!cfg.adjudicate) return false;
    int dir = white_score >= cfg.adjudicate_score ? 1
              : white_score <= 1.0 - cfg.adjudicate_score ? -1
                                                          : 0;
    if (dir != 0 && dir == extreme_dir) ++extreme_streak;
    else extreme_streak = dir != 0 ? 1 : 0;
    extreme_dir = dir;
    return extreme_streak >= cfg.adjudicate_plies;
  };

  while (true) {
    BoardStatus st = game.status();
    if (st == BoardStatus::kCheckmate) return finalize(game.result(), Termination::kCheckmate);
    if (st != BoardStatus::kOngoing) return finalize(0.5, Termination::kDrawRule);

    bool white_to_move = game.pos().side_to_move() == Color::kWhite;
    std::string move_to_play;
    double played_score = 0.5;

    if (white_to_move) {
      int t = game.white_moves_played() + 1;
      if (t > cfg.horizon) {
        double r = last_pw < 0.25 ? 0.0 : (last_pw <= 0.75 ? 0.5 : 1.0);
        return finalize(r, Termination::kHorizon);
      }

      bool want_decision = policy != nullptr && assists < budget;
      bool forced_here = opts.forced_intervention_move == t;

      if (forced_here) {
        auto strong_samples =
            engines.strong.sample_moves(game.uci_moves(), cfg.samples_per_decision);
        const MoveSample& pick = max_raw_wdl(strong_samples);
        move_to_play = pick.move_uci;
        played_score = pick.score_raw;
        InterventionEvent ev;
        ev.ordinal = ++assists;
        ev.t = t;
        ev.gap = 0.0;
        ev.policy_tag = "forced";
        record.interventions.push_back(ev);
        last_intervention = t;
      } else if (opts.log_points || want_decision) {
        auto weak_samples =
            engines.weak.sample_moves(game.uci_moves(), cfg.samples_per_decision);
        auto strong_samples =
            engines.strong.sample_moves(game.uci_moves(), cfg.samples_per_decision);
        double pw_raw = mean_score(weak_samples);
        double ps_raw = mean_score(strong_samples);
        double pw = bank.calibrate(t, pw_raw);
        double ps = bank.calibrate(t, ps_raw);
        double gap = std::max(0.0, ps - pw);
        last_pw = pw;

        DecisionContext ctx = make_context(t, pw, ps, assists, last_intervention);
        Decision decision = Decision::kPass;
        if (want_decision) {
          switch (policy->kind) {
            case PolicySpec::Kind::kNone: break;
            case PolicySpec::Kind::kRandom: decision = decide_random(plan, ctx); break;
            case PolicySpec::Kind::kThreshold: {
              ThresholdPolicy tp{policy->thresholds};
              decision = decide_threshold(tp, ctx);
              break;
            }
            case PolicySpec::Kind::kMaxDelta: decision = decide_maxdelta(maxdelta, ctx); break;
          }
          if (decision == Decision::kIntervene && opts.suppress_trigger_at == t)
            decision = Decision::kPass;
        }

        const MoveSample& strong_pick = max_raw_wdl(strong_samples);
        if (opts.log_points) {
          MovePoint point;
          point.t = t;
          point.pw_raw = pw_raw;
          point.ps_raw = ps_raw;
          point.pw = pw;
          point.ps = ps;
          point.gap = gap;
          point.weak_move = weak_samples[0].move_uci;
          point.strong_move = strong_pick.move_uci;
          record.points.push_back(std::move(point));
        }

        if (decision == Decision::kIntervene) {
          if (opts.trigger_prefix && record.interventions.empty()) {
            *opts.trigger_prefix = game.uci_moves();
            if (opts.trigger_stats) *opts.trigger_stats = stats;
          }
          move_to_play = strong_pick.move_uci;
          played_score = strong_pick.score_raw;
          InterventionEvent ev;
          ev.ordinal = ++assists;
          ev.t = t;
          ev.gap = gap;
          ev.policy_tag = policy->tag();
          record.interventions.push_back(ev);
          last_intervention = t;
        } else {
          move_to_play = weak_samples[0].move_uci;
          played_score = weak_samples[0].score_raw;
        }
        stats.update(gap);
      } else {
        MoveSample sample = engines.weak.evaluate(game.uci_moves());
        move_to_play = sample.move_uci;
        played_score = sample.score_raw;
        last_pw = bank.calibrate(t, sample.score_raw);
      }
    } else {
      MoveSample sample = engines.weak.evaluate(game.uci_moves());
      move_to_play = sample.move_uci;
      played_score = sample.score_raw;
    }

    if (move_to_play.empty() || !game.play_uci(move_to_play))
      throw EngineError("engine suggested an unplayable move: '" + move_to_play + "'");
    if (register_eval(played_score)) {
      double r = extreme_dir > 0 ? 1.0 : 0.0;
      return finalize(r, Termination::kResignationProxy);
    }
  }
}

}  // namespace

GameRecord play_game(const MatchConfig& config, const PolicySpec& policy,
                     const CalibrationBank& bank, EnginePair& engines,
                     std::mt19937_64& game_rng, uint64_t game_index) {
  config.validate();
  LoopOptions opts;
  opts.log_points = true;
  return run_loop(config, &policy, bank, engines, game_rng,
                  make_game_id("game", config.seed, game_index), opts);
}

namespace {

// Shared driver for D0/DI generation: N games over a small worker pool, one
// engine pair per worker, per-game RNG streams derived from (seed, index).
Dataset generate_dataset(const MatchConfig& config, DatasetKind kind,
                         const CalibrationBank* bank, const StatusFn& status) {
  config.validate();
  Dataset ds;
  ds.kind = kind;
  CalibrationBank fallback = identity_bank(config.horizon);
  const CalibrationBank& use_bank = bank ? *bank : fallback;

  int n = config.games;
  std::vector<std::optional<GameRecord>> slots(static_cast<size_t>(n));
  std::atomic<int> aborted{0};
  std::atomic<int> cursor{0};
  std::mutex status_mu;

  const char* prefix = kind == DatasetKind::kD0 ? "d0" : "di";
  auto worker = [&]() {
    std::optional<EnginePair> engines;
    while (true) {
      int i = cursor.fetch_add(1);
      if (i >= n) break;
      std::mt19937_64 rng = derive_rng(config.seed, static_cast<uint64_t>(i));
      try {
        if (!engines) engines.emplace(start_engines(config));

        LoopOptions opts;
        opts.log_points = true;
        GameRecord record;
        if (kind == DatasetKind::kD0) {
          record = run_loop(config, nullptr, use_bank, *engines, rng,
                            make_game_id(prefix, config.seed, static_cast<uint64_t>(i)), opts);
        } else {
          // One planned intervention move, uniform over the plan range.
          int plan_horizon = config.plan_horizon > 0
                                 ? std::min(config.plan_horizon, config.horizon)
                                 : config.horizon;
          int tstar = std::uniform_int_distribution<int>(1, plan_horizon)(rng);
          RandomPolicy plan;
          plan.planned_moves = {tstar};
          PolicySpec spec;
          spec.kind = PolicySpec::Kind::kRandom;
          spec.random_budget = 1;
          opts.plan = &plan;
          record = run_loop(config, &spec, use_bank, *engines, rng,
                            make_game_id(prefix, config.seed, static_cast<uint64_t>(i)), opts);
          if (record.interventions.empty()) {
            InterventionEvent ev;
            ev.ordinal = 1;
            ev.t = tstar;
            ev.gap = 0.0;
            ev.policy_tag = "random-single";
            ev.fired = false;
            record.interventions.push_back(ev);
          }
        }
        validate_record(record, kind, config.budget > 0 ? std::optional<int>(config.budget)
                                                        : std::nullopt);
        if (status) {
          json line{{"event", "game"},
                    {"id", record.game_id},
                    {"result", record.result},
                    {"plies", record.moves.size()},
                    {"interventions", record.interventions.size()}};
          std::lock_guard<std::mutex> lock(status_mu);
          status(line.dump());
        }
        slots[static_cast<size_t>(i)] = std::move(record);
      } catch (const EngineError& e) {
        aborted.fetch_add(1);
        engines.reset();  // respawn on the next game
        if (status) {
          json line{{"event", "aborted"}, {"index", i}, {"error", e.what()}};
          std::lock_guard<std::mutex> lock(status_mu);
          status(line.dump());
        }
      }
    }
  };

  int workers = std::clamp(config.threads, 1, n);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (auto& slot : slots)
    if (slot) ds.records.push_back(std::move(*slot));
  ds.source_meta["engine"] = config.engine_path.string();
  ds.source_meta["weak_elo"] = std::to_string(config.weak_elo);
  ds.source_meta["strong_elo"] = std::to_string(config.strong_elo);
  ds.source_meta["seed"] = std::to_string(config.seed);
  ds.source_meta["samples_per_decision"] = std::to_string(config.samples_per_decision);
  ds.source_meta["aborted"] = std::to_string(aborted.load());
  if (kind == DatasetKind::kDI) ds.source_meta["budget"] = "1";
  return ds;
}

}  // namespace

Dataset generate_d0(const MatchConfig& config, const CalibrationBank* bank,
                    const StatusFn& status) {
  return generate_dataset(config, DatasetKind::kD0, bank, status);
}

Dataset generate_di(const MatchConfig& config, const CalibrationBank* bank,
                    const StatusFn& status) {
  return generate_dataset(config, DatasetKind::kDI, bank, status);
}

OracleResult oracle_upper_bound(const MatchConfig& config, const CalibrationBank& bank,
                                EnginePair& engines, std::mt19937_64& game_rng,
                                uint64_t game_index) {
  config.validate();
  LoopOptions base_opts;
  base_opts.log_points = false;
  GameRecord base = run_loop(config, nullptr, bank, engines, game_rng,
                             make_game_id("oracle-base", config.seed, game_index), base_opts);

  OracleResult result;
  result.base_score = base.result;
  result.best_score = base.result;
  int white_moves = static_cast<int>((base.moves.size() + 1) / 2);
  for (int t = 1; t <= white_moves; ++t) {
    LoopOptions opts;
    opts.log_points = false;
    opts.forced_intervention_move = t;
    opts.prefix.assign(base.moves.begin(), base.moves.begin() + 2 * (t - 1));
    GameRecord alt = run_loop(config, nullptr, bank, engines, game_rng,
                              make_game_id("oracle-alt", config.seed, game_index), opts);
    result.per_move_scores.push_back(alt.result);
    result.best_score = std::max(result.best_score, alt.result);
  }
  return result;
}

HindsightResult hindsight_play(const MatchConfig& config, const PolicySpec& policy,
                               const CalibrationBank& bank, EnginePair& engines,
                               std::mt19937_64& game_rng, uint64_t game_index) {
  config.validate();
  if (policy.budget() != 1) throw EngineError("hindsight_play needs a budget-1 policy");

  std::vector<std::string> trigger_prefix;
  RunningGapStats trigger_stats;
  LoopOptions opts;
  opts.log_points = false;
  opts.trigger_prefix = &trigger_prefix;
  opts.trigger_stats = &trigger_stats;
  GameRecord committed = run_loop(config, &policy, bank, engines, game_rng,
                                  make_game_id("hind-a", config.seed, game_index), opts);

  HindsightResult result;
  result.committed_result = committed.result;
  if (committed.interventions.empty() || !committed.interventions[0].fired) {
    result.deferred_result = committed.result;
    result.max_result = committed.result;
    result.triggered = false;
    return result;
  }
  result.triggered = true;

  int t1 = committed.interventions[0].t;
  LoopOptions deferred_opts;
  deferred_opts.log_points = false;
  deferred_opts.prefix = trigger_prefix;
  deferred_opts.suppress_trigger_at = t1;
  deferred_opts.initial_stats = trigger_stats;
  GameRecord deferred = run_loop(config, &policy, bank, engines, game_rng,
                                 make_game_id("hind-b", config.seed, game_index), deferred_opts);
  result.deferred_result = deferred.result;
  result.max_result = std::max(result.committed_result, result.deferred_result);
  return result;
}

Objective make_engine_objective(const MatchConfig& config, const CalibrationBank& bank,
                                int games_per_eval) {
  config.validate();
  if (games_per_eval < 1) throw EngineError("games_per_eval must be >= 1");
  auto engines = std::make_shared<std::optional<EnginePair>>();
  auto bank_copy = std::make_shared<CalibrationBank>(bank);
  MatchConfig cfg = config;

  return [engines, bank_copy, cfg, games_per_eval](const std::vector<double>& params,
                                                   uint64_t eval_seed) -> ObjectiveResult {
    PolicySpec spec;
    spec.kind = PolicySpec::Kind::kThreshold;
    spec.thresholds = params;

    std::vector<double> scores;
    scores.reserve(static_cast<size_t>(games_per_eval));
    for (int g = 0; g < games_per_eval; ++g) {
      std::mt19937_64 rng = derive_rng(eval_seed, static_cast<uint64_t>(g));
      for (int attempt = 0;; ++attempt) {
        try {
          if (!engines->has_value()) engines->emplace(start_engines(cfg));
          LoopOptions opts;
          opts.log_points = false;
          GameRecord record = run_loop(cfg, &spec, *bank_copy, **engines, rng,
                                       make_game_id("obj", eval_seed, static_cast<uint64_t>(g)),
                                       opts);
          scores.push_back(record.result);
          break;
        } catch (const EngineError&) {
          engines->reset();
          if (attempt >= 1) throw;  // recorded as a failed trial upstream
        }
      }
    }
    return ObjectiveResult{mean_of(scores), sem_of(scores)};
  };
}

}  // namespace chesslab
