// chesslab: dataset generation, calibration, predictor training, policy
// play, uplift fitting, engine-free simulation, threshold optimization,
// conversion-gap analysis and report emission, all behind one CLI.
//
// Exit codes: 0 success, 2 configuration error, 3 engine failure, 4 data
// error. Progress events stream to stderr as JSON lines.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "chesslab/analysis.hpp"
#include "chesslab/calibration.hpp"
#include "chesslab/engine_bridge.hpp"
#include "chesslab/game_model.hpp"
#include "chesslab/optimize.hpp"
#include "chesslab/orchestrator.hpp"
#include "chesslab/policies.hpp"
#include "chesslab/predictors.hpp"
#include "chesslab/simfree.hpp"
#include "chesslab/util.hpp"

using namespace chesslab;
using nlohmann::json;

namespace {

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

void status_line(const std::string& line) { std::cerr << line << "\n"; }

StatusFn status_stream() {
  return [](const std::string& line) { status_line(line); };
}

// Engine / match flags shared by the engine-backed subcommands.
struct MatchFlags {
  MatchConfig config;
  int weak_depth = 0, strong_depth = 0;
  int weak_movetime = 0, strong_movetime = 0;
  bool fast = false;
  bool no_adjudicate = false;

  void attach(CLI::App* cmd, bool need_engine = true) {
    auto* opt = cmd->add_option("--engine", config.engine_path, "UCI engine executable");
    if (need_engine) opt->required();
    cmd->add_option("--strong-engine", config.strong_engine_path,
                    "separate executable for the strong engine");
    cmd->add_option("--weak-elo", config.weak_elo, "ELO for W and B");
    cmd->add_option("--strong-elo", config.strong_elo, "ELO recorded for C");
    cmd->add_flag("--limit-strong", config.strong_limit_strength,
                  "apply UCI_Elo to the strong engine too");
    cmd->add_option("--games", config.games, "number of games");
    cmd->add_option("--samples", config.samples_per_decision, "engine samples per decision");
    cmd->add_option("--horizon", config.horizon, "White-move horizon H");
    cmd->add_option("--plan-horizon", config.plan_horizon,
                    "range for randomly planned intervention moves (0: horizon)");
    cmd->add_option("--seed", config.seed, "base RNG seed");
    cmd->add_option("--threads", config.threads, "worker count");
    cmd->add_option("--weak-depth", weak_depth, "weak engine search depth");
    cmd->add_option("--strong-depth", strong_depth, "strong engine search depth");
    cmd->add_option("--weak-movetime", weak_movetime, "weak engine movetime (ms)");
    cmd->add_option("--strong-movetime", strong_movetime, "strong engine movetime (ms)");
    cmd->add_flag("--fast", fast, "CI fidelity reduction: 3 samples per decision");
    cmd->add_flag("--no-adjudicate", no_adjudicate, "disable local resignation adjudication");
  }

  MatchConfig resolve() {
    if (fast) config.samples_per_decision = 3;
    if (no_adjudicate) config.adjudicate = false;
    if (weak_depth > 0) config.weak_limit = SearchLimit::depth(weak_depth);
    else if (weak_movetime > 0) config.weak_limit = SearchLimit::movetime(weak_movetime);
    if (strong_depth > 0) config.strong_limit = SearchLimit::depth(strong_depth);
    else if (strong_movetime > 0) config.strong_limit = SearchLimit::movetime(strong_movetime);
    return config;
  }
};

int run_cli(int argc, char** argv) {
  CLI::App app{"limited-budget chess assistance harness"};
  app.set_config("--config", "", "declarative run config (flags win)", false);
  app.require_subcommand(1);

  std::function<int()> action;

  // ---- gen-data ---------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "play engine-vs-engine games into a dataset");
  auto gen_flags = std::make_shared<MatchFlags>();
  auto gen_kind = std::make_shared<std::string>("d0");
  auto gen_out = std::make_shared<std::string>();
  auto gen_bank = std::make_shared<std::string>();
  gen->add_option("--kind", *gen_kind, "d0 or di")->check(CLI::IsMember({"d0", "di"}));
  gen->add_option("--out", *gen_out, "output dataset (jsonl)")->required();
  gen->add_option("--bank", *gen_bank, "calibration bank applied during play");
  gen_flags->attach(gen);
  gen->callback([&action, gen_flags, gen_kind, gen_out, gen_bank]() {
    action = [=]() {
      MatchConfig cfg = gen_flags->resolve();
      std::optional<CalibrationBank> bank;
      if (!gen_bank->empty()) bank = load_bank(*gen_bank);
      Dataset ds = *gen_kind == "d0"
                       ? generate_d0(cfg, bank ? &*bank : nullptr, status_stream())
                       : generate_di(cfg, bank ? &*bank : nullptr, status_stream());
      write_jsonl(ds, *gen_out);
      std::cout << json{{"written", *gen_out}, {"records", ds.records.size()}}.dump() << "\n";
      return 0;
    };
  });

  // ---- play -------------------------------------------------------------
  auto* play = app.add_subcommand("play", "run games under an intervention policy");
  auto play_flags = std::make_shared<MatchFlags>();
  auto play_policy = std::make_shared<std::string>("threshold");
  auto play_thresholds = std::make_shared<std::string>();
  auto play_slacks = std::make_shared<std::string>();
  auto play_budget = std::make_shared<int>(1);
  auto play_predictors = std::make_shared<std::string>();
  auto play_bank = std::make_shared<std::string>();
  auto play_out = std::make_shared<std::string>();
  play->add_option("--policy", *play_policy, "random | threshold | maxdelta")
      ->check(CLI::IsMember({"random", "threshold", "maxdelta"}));
  play->add_option("--t,--thresholds", *play_thresholds, "comma-separated thresholds");
  play->add_option("--slacks", *play_slacks, "comma-separated maxdelta slacks");
  play->add_option("--budget", *play_budget, "budget for the random policy");
  play->add_option("--predictors", *play_predictors, "predictor bundle (maxdelta)");
  play->add_option("--bank", *play_bank, "calibration bank (jsonl)");
  play->add_option("--out", *play_out, "output dataset (jsonl)")->required();
  play_flags->attach(play);
  play->callback([&action, play_flags, play_policy, play_thresholds, play_slacks, play_budget,
                  play_predictors, play_bank, play_out]() {
    action = [=]() {
      MatchConfig cfg = play_flags->resolve();
      CalibrationBank bank =
          play_bank->empty() ? identity_bank(cfg.horizon) : load_bank(*play_bank);

      PredictorBundle bundle;
      PolicySpec spec;
      if (*play_policy == "random") {
        spec.kind = PolicySpec::Kind::kRandom;
        spec.random_budget = *play_budget;
      } else if (*play_policy == "threshold") {
        spec.kind = PolicySpec::Kind::kThreshold;
        spec.thresholds = parse_doubles(*play_thresholds);
        if (spec.thresholds.empty())
          throw CLI::ValidationError("--thresholds", "threshold policy needs --t");
      } else {
        spec.kind = PolicySpec::Kind::kMaxDelta;
        if (play_predictors->empty())
          throw CLI::ValidationError("--predictors", "maxdelta policy needs a bundle");
        bundle = load_bundle(*play_predictors);
        spec.bundle = &bundle;
        spec.slacks = play_slacks->empty()
                          ? std::vector<double>(static_cast<size_t>(bundle.budget), 0.0)
                          : parse_doubles(*play_slacks);
      }
      cfg.budget = spec.budget();

      Dataset ds;
      ds.kind = DatasetKind::kPlay;
      ds.source_meta["policy"] = spec.tag();
      ds.source_meta["budget"] = std::to_string(spec.budget());
      ds.source_meta["seed"] = std::to_string(cfg.seed);

      EnginePair engines = start_engines(cfg);
      for (int g = 0; g < cfg.games; ++g) {
        std::mt19937_64 rng = derive_rng(cfg.seed, static_cast<uint64_t>(g));
        GameRecord record = play_game(cfg, spec, bank, engines, rng, static_cast<uint64_t>(g));
        status_line(json{{"event", "game"},
                         {"id", record.game_id},
                         {"result", record.result},
                         {"interventions", record.interventions.size()}}
                        .dump());
        ds.records.push_back(std::move(record));
      }
      write_jsonl(ds, *play_out);
      double mean = 0.0;
      for (const auto& r : ds.records) mean += r.result;
      if (!ds.records.empty()) mean /= static_cast<double>(ds.records.size());
      std::cout << json{{"written", *play_out},
                        {"records", ds.records.size()},
                        {"avg_score", mean}}
                       .dump()
                << "\n";
      return 0;
    };
  });

  // ---- ingest-pgn -------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest-pgn", "import a PGN corpus, optionally annotate");
  auto ingest_flags = std::make_shared<MatchFlags>();
  auto ingest_pgn = std::make_shared<std::string>();
  auto ingest_out = std::make_shared<std::string>();
  auto ingest_min_elo = std::make_shared<int>(0);
  auto ingest_max_elo = std::make_shared<int>(0);
  auto ingest_no_result_ok = std::make_shared<bool>(false);
  auto ingest_annotate = std::make_shared<bool>(false);
  ingest->add_option("--pgn", *ingest_pgn, "input PGN file")->required();
  ingest->add_option("--out", *ingest_out, "output dataset (jsonl)")->required();
  ingest->add_option("--min-elo", *ingest_min_elo, "minimum player ELO filter");
  ingest->add_option("--max-elo", *ingest_max_elo, "maximum player ELO filter");
  ingest->add_flag("--allow-no-result", *ingest_no_result_ok, "keep games without a Result tag");
  ingest->add_flag("--annotate", *ingest_annotate, "fill raw evaluations with the engines");
  ingest_flags->attach(ingest, /*need_engine=*/false);
  ingest->callback([&action, ingest_flags, ingest_pgn, ingest_out, ingest_min_elo,
                    ingest_max_elo, ingest_no_result_ok, ingest_annotate]() {
    action = [=]() {
      PgnFilters filters;
      if (*ingest_min_elo > 0) filters.min_elo = *ingest_min_elo;
      if (*ingest_max_elo > 0) filters.max_elo = *ingest_max_elo;
      filters.require_result = !*ingest_no_result_ok;
      PgnStats stats;
      Dataset ds = parse_pgn(*ingest_pgn, filters, &stats);
      if (*ingest_annotate) {
        MatchConfig cfg = ingest_flags->resolve();
        cfg.games = std::max(1, cfg.games);
        EnginePair engines = start_engines(cfg);
        auto res = annotate(ds, engines.weak, engines.strong, cfg.samples_per_decision);
        if (res.error) {
          status_line(json{{"event", "annotate-failed"},
                           {"completed", res.completed_games},
                           {"error", *res.error}}
                          .dump());
          throw EngineError(*res.error);
        }
      }
      write_jsonl(ds, *ingest_out);
      std::cout << json{{"written", *ingest_out},
                        {"accepted", stats.accepted},
                        {"skipped_unparseable", stats.skipped_unparseable},
                        {"skipped_no_result", stats.skipped_no_result},
                        {"skipped_filtered", stats.skipped_filtered}}
                       .dump()
                << "\n";
      return 0;
    };
  });

  // ---- calibrate --------------------------------------------------------
  auto* cal = app.add_subcommand("calibrate", "fit per-move-bucket calibration curves");
  auto cal_d0 = std::make_shared<std::string>();
  auto cal_out = std::make_shared<std::string>();
  auto cal_apply = std::make_shared<std::string>();
  auto cal_apply_in = std::make_shared<std::string>();
  auto cal_apply_out = std::make_shared<std::string>();
  auto cal_method = std::make_shared<std::string>("isotonic");
  auto cal_cfg = std::make_shared<BankConfig>();
  cal->add_option("--d0", *cal_d0, "annotated no-intervention dataset")->required();
  cal->add_option("--out", *cal_out, "output bank (jsonl)")->required();
  cal->add_option("--apply", *cal_apply, "also write a calibrated copy of the dataset here");
  cal->add_option("--apply-in", *cal_apply_in, "additional dataset to calibrate with this bank");
  cal->add_option("--apply-out", *cal_apply_out, "where the additional calibrated copy goes");
  cal->add_option("--method", *cal_method, "isotonic | monotone-net")
      ->check(CLI::IsMember({"isotonic", "monotone-net"}));
  cal->add_option("--bucket-width", cal_cfg->bucket_width, "moves per bucket");
  cal->add_option("--min-samples", cal_cfg->min_samples, "pairs needed to fit a bucket");
  cal->add_option("--horizon", cal_cfg->horizon, "White-move horizon");
  cal->callback([&action, cal_d0, cal_out, cal_apply, cal_apply_in, cal_apply_out, cal_method,
                 cal_cfg]() {
    action = [=]() {
      Dataset d0 = read_jsonl(*cal_d0);
      BankConfig cfg = *cal_cfg;
      cfg.method = *cal_method == "isotonic" ? CalibrationMethod::kIsotonic
                                             : CalibrationMethod::kMonotoneNet;
      CalibrationBank bank = build_bank(d0, cfg);
      save_bank(bank, *cal_out);
      if (!cal_apply->empty()) {
        apply_calibration(d0, bank);
        write_jsonl(d0, *cal_apply);
      }
      if (!cal_apply_in->empty()) {
        if (cal_apply_out->empty())
          throw CLI::ValidationError("--apply-out", "--apply-in needs --apply-out");
        Dataset other = read_jsonl(*cal_apply_in);
        apply_calibration(other, bank);
        write_jsonl(other, *cal_apply_out);
      }
      std::cout << json{{"written", *cal_out}, {"buckets", bank.curves.size()}}.dump() << "\n";
      return 0;
    };
  });

  // ---- train-predictors -------------------------------------------------
  auto* train = app.add_subcommand("train-predictors", "fit suffix-delta-sum predictors");
  auto train_d0 = std::make_shared<std::string>();
  auto train_out = std::make_shared<std::string>();
  auto train_family = std::make_shared<std::string>("forest");
  auto train_budget = std::make_shared<int>(3);
  auto train_seed = std::make_shared<uint64_t>(1);
  auto train_hp = std::make_shared<PredictorHyperparams>();
  train->add_option("--d0", *train_d0, "calibrated no-intervention dataset")->required();
  train->add_option("--out", *train_out, "output bundle")->required();
  train->add_option("--family", *train_family, "linear | forest | mlp")
      ->check(CLI::IsMember({"linear", "forest", "mlp"}));
  train->add_option("--budget", *train_budget, "intervention budget K");
  train->add_option("--seed", *train_seed, "training seed");
  train->add_option("--trees", train_hp->forest_trees, "forest size");
  train->add_option("--max-depth", train_hp->forest_max_depth, "tree depth cap");
  train->callback([&action, train_d0, train_out, train_family, train_budget, train_seed,
                   train_hp]() {
    action = [=]() {
      Dataset d0 = read_jsonl(*train_d0);
      auto family = predictor_family_from_string(*train_family);
      PredictorBundle bundle =
          train_bundle(d0, *train_budget, *family, *train_hp, *train_seed);
      save_bundle(bundle, *train_out);
      std::cout << json{{"written", *train_out}, {"budget", bundle.budget}}.dump() << "\n";
      return 0;
    };
  });

  // ---- fit-uplift -------------------------------------------------------
  auto* fit = app.add_subcommand("fit-uplift", "estimate the uplift table from D0 and DI");
  auto fit_d0 = std::make_shared<std::string>();
  auto fit_di = std::make_shared<std::string>();
  auto fit_out = std::make_shared<std::string>();
  auto fit_banks_out = std::make_shared<std::string>();
  auto fit_bin = std::make_shared<int>(10);
  auto fit_grid = std::make_shared<int>(101);
  auto fit_horizon = std::make_shared<int>(200);
  fit->add_option("--d0", *fit_d0, "calibrated D0 dataset")->required();
  fit->add_option("--di", *fit_di, "calibrated DI dataset")->required();
  fit->add_option("--out", *fit_out, "output uplift table")->required();
  fit->add_option("--banks-out", *fit_banks_out, "also write the move banks here");
  fit->add_option("--bin-width", *fit_bin, "move-bin width");
  fit->add_option("--grid", *fit_grid, "d-grid size");
  fit->add_option("--horizon", *fit_horizon, "White-move horizon");
  fit->callback([&action, fit_d0, fit_di, fit_out, fit_banks_out, fit_bin, fit_grid,
                 fit_horizon]() {
    action = [=]() {
      Dataset d0 = read_jsonl(*fit_d0);
      Dataset di = read_jsonl(*fit_di);
      UpliftTable table = fit_uplift(d0, di, *fit_bin, *fit_grid, *fit_horizon);
      save_uplift(table, *fit_out);
      if (!fit_banks_out->empty()) save_banks(build_banks(d0, *fit_horizon), *fit_banks_out);
      int populated = 0;
      for (bool p : table.populated) populated += p ? 1 : 0;
      std::cout << json{{"written", *fit_out}, {"populated_bins", populated}}.dump() << "\n";
      return 0;
    };
  });

  // ---- simulate ---------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "engine-free Monte Carlo policy evaluation");
  auto sim_banks = std::make_shared<std::string>();
  auto sim_uplift = std::make_shared<std::string>();
  auto sim_thresholds = std::make_shared<std::string>();
  auto sim_lambda = std::make_shared<std::string>();
  auto sim_out = std::make_shared<std::string>();
  auto sim_cfg = std::make_shared<SimConfig>();
  sim->add_option("--banks", *sim_banks, "move banks (jsonl)")->required();
  sim->add_option("--uplift", *sim_uplift, "uplift table (jsonl)")->required();
  sim->add_option("--t,--thresholds", *sim_thresholds, "comma-separated thresholds")->required();
  sim->add_option("--lambda", *sim_lambda, "comma-separated uplift scales");
  sim->add_option("--runs", sim_cfg->runs, "Monte Carlo runs");
  sim->add_option("--seed", sim_cfg->seed, "RNG seed");
  sim->add_option("--horizon", sim_cfg->horizon, "simulation horizon");
  sim->add_option("--threads", sim_cfg->threads, "worker count");
  sim->add_option("--out", *sim_out, "also write the report JSON here");
  sim->callback([&action, sim_banks, sim_uplift, sim_thresholds, sim_lambda, sim_out,
                 sim_cfg]() {
    action = [=]() {
      MoveBank banks = load_banks(*sim_banks);
      UpliftTable uplift = load_uplift(*sim_uplift);
      SimConfig cfg = *sim_cfg;
      if (!sim_lambda->empty()) cfg.uplift_scales = parse_doubles(*sim_lambda);
      std::vector<double> thresholds = parse_doubles(*sim_thresholds);
      SimReport report = avg_score(banks, uplift, thresholds, cfg);
      json out{{"avg_score", report.avg_score},
               {"runs", report.runs},
               {"frac_fired", report.frac_fired},
               {"avg_move", report.avg_move},
               {"thresholds", thresholds},
               {"seed", cfg.seed}};
      std::cout << out.dump() << "\n";
      if (!sim_out->empty()) atomic_write_file(*sim_out, out.dump() + "\n");
      return 0;
    };
  });

  // ---- optimize ---------------------------------------------------------
  auto* opt = app.add_subcommand("optimize", "Bayesian optimization of threshold vectors");
  auto opt_backend = std::make_shared<std::string>("simfree");
  auto opt_flags = std::make_shared<MatchFlags>();
  auto opt_banks = std::make_shared<std::string>();
  auto opt_uplift = std::make_shared<std::string>();
  auto opt_bank = std::make_shared<std::string>();
  auto opt_out = std::make_shared<std::string>();
  auto opt_trials_log = std::make_shared<std::string>();
  auto opt_k = std::make_shared<int>(2);
  auto opt_iters = std::make_shared<int>(25);
  auto opt_init = std::make_shared<int>(8);
  auto opt_seed = std::make_shared<uint64_t>(1);
  auto opt_lo = std::make_shared<double>(0.0);
  auto opt_hi = std::make_shared<double>(0.6);
  auto opt_ordered = std::make_shared<bool>(false);
  auto opt_runs_per_eval = std::make_shared<long>(100000);
  auto opt_games_per_eval = std::make_shared<int>(50);
  auto opt_sim_threads = std::make_shared<int>(1);
  opt->add_option("--backend", *opt_backend, "simfree | engine")
      ->check(CLI::IsMember({"simfree", "engine"}));
  opt->add_option("--k", *opt_k, "number of thresholds")->required();
  opt->add_option("--iters", *opt_iters, "optimizer iterations");
  opt->add_option("--init", *opt_init, "initial space-filling points");
  opt->add_option("--opt-seed", *opt_seed, "optimizer seed");
  opt->add_option("--lo", *opt_lo, "lower bound per threshold");
  opt->add_option("--hi", *opt_hi, "upper bound per threshold");
  opt->add_flag("--ordered", *opt_ordered, "enforce T1 <= ... <= TK");
  opt->add_option("--banks", *opt_banks, "move banks (simfree)");
  opt->add_option("--uplift", *opt_uplift, "uplift table (simfree)");
  opt->add_option("--runs-per-eval", *opt_runs_per_eval, "simulator runs per evaluation");
  opt->add_option("--sim-threads", *opt_sim_threads, "simulator worker count");
  opt->add_option("--bank", *opt_bank, "calibration bank (engine backend)");
  opt->add_option("--games-per-eval", *opt_games_per_eval, "engine games per evaluation");
  opt->add_option("--trials-log", *opt_trials_log, "append trials as JSON lines");
  opt->add_option("--out", *opt_out, "write best parameters JSON here");
  opt_flags->attach(opt, /*need_engine=*/false);
  opt->callback([&action, opt_backend, opt_flags, opt_banks, opt_uplift, opt_bank, opt_out,
                 opt_trials_log, opt_k, opt_iters, opt_init, opt_seed, opt_lo, opt_hi,
                 opt_ordered, opt_runs_per_eval, opt_games_per_eval, opt_sim_threads]() {
    action = [=]() {
      SearchSpace space = SearchSpace::thresholds(*opt_k, *opt_lo, *opt_hi);
      space.ordering_constraint = *opt_ordered;

      std::ofstream trials_out;
      if (!opt_trials_log->empty()) trials_out.open(*opt_trials_log, std::ios::app);

      BayesOptOptions options;
      options.iterations = *opt_iters;
      options.init_points = *opt_init;
      options.seed = *opt_seed;
      options.backend = *opt_backend;
      options.on_trial = [&trials_out](const Trial& t) {
        json line{{"params", t.params},   {"value", t.value},
                  {"noise_se", t.noise_se}, {"backend", t.backend},
                  {"cost_seconds", t.cost_seconds}, {"failed", t.failed}};
        status_line(line.dump());
        if (trials_out.is_open()) {
          trials_out << line.dump() << "\n";
          trials_out.flush();
        }
      };

      Objective objective;
      MoveBank banks;
      UpliftTable uplift;
      SimConfig sim_cfg;
      if (*opt_backend == "simfree") {
        if (opt_banks->empty() || opt_uplift->empty())
          throw CLI::ValidationError("--banks", "simfree backend needs --banks and --uplift");
        banks = load_banks(*opt_banks);
        uplift = load_uplift(*opt_uplift);
        sim_cfg.runs = *opt_runs_per_eval;
        sim_cfg.horizon = banks.horizon;
        sim_cfg.threads = *opt_sim_threads;
        objective = [&banks, &uplift, sim_cfg](const std::vector<double>& params,
                                               uint64_t eval_seed) {
          SimConfig cfg = sim_cfg;
          cfg.seed = eval_seed;
          SimReport report = avg_score(banks, uplift, params, cfg);
          double se = 0.5 / std::sqrt(static_cast<double>(report.runs));
          return ObjectiveResult{report.avg_score, se};
        };
      } else {
        MatchConfig cfg = opt_flags->resolve();
        CalibrationBank bank =
            opt_bank->empty() ? identity_bank(cfg.horizon) : load_bank(*opt_bank);
        objective = make_engine_objective(cfg, bank, *opt_games_per_eval);
      }

      BayesOptResult result = bayes_opt(objective, space, options);
      json out{{"best_params", result.best_params},
               {"best_value", result.best_value},
               {"trials", result.trials.size()},
               {"degenerate_fallback", result.degenerate_fallback}};
      std::cout << out.dump() << "\n";
      if (!opt_out->empty()) atomic_write_file(*opt_out, out.dump() + "\n");
      return 0;
    };
  });

  // ---- gap-grid ---------------------------------------------------------
  auto* gap = app.add_subcommand("gap-grid", "engine-vs-human conversion grid");
  auto gap_engine = std::make_shared<std::string>();
  auto gap_human = std::make_shared<std::string>();
  auto gap_n = std::make_shared<std::string>("10,20,30");
  auto gap_alpha = std::make_shared<std::string>("0.5,0.6,0.7,0.8");
  auto gap_min_cell = std::make_shared<int>(30);
  auto gap_out = std::make_shared<std::string>("gap_report");
  gap->add_option("--engine-data", *gap_engine, "calibrated engine dataset")->required();
  gap->add_option("--human-data", *gap_human, "calibrated human dataset")->required();
  gap->add_option("--n", *gap_n, "comma-separated move numbers");
  gap->add_option("--alpha", *gap_alpha, "comma-separated alpha cutoffs");
  gap->add_option("--min-cell", *gap_min_cell, "minimum samples per defined cell");
  gap->add_option("--out-dir", *gap_out, "report directory");
  gap->callback([&action, gap_engine, gap_human, gap_n, gap_alpha, gap_min_cell, gap_out]() {
    action = [=]() {
      Dataset engine_ds = read_jsonl(*gap_engine);
      Dataset human_ds = read_jsonl(*gap_human);
      GapGrid grid = gap_grid(engine_ds, human_ds, parse_ints(*gap_n),
                              parse_doubles(*gap_alpha), *gap_min_cell);
      ReportInputs inputs;
      inputs.grid = &grid;
      inputs.config_hash = "gap-grid";
      auto written = write_report(inputs, *gap_out);
      std::cout << json{{"mean_delta", grid.mean_delta},
                        {"defined_cells", grid.defined_cells},
                        {"out_dir", *gap_out}}
                       .dump()
                << "\n";
      return 0;
    };
  });

  // ---- report -----------------------------------------------------------
  auto* rep = app.add_subcommand("report", "render CSV/SVG artifacts from a run directory");
  auto rep_dir = std::make_shared<std::string>();
  auto rep_out = std::make_shared<std::string>();
  auto rep_seed = std::make_shared<uint64_t>(0);
  rep->add_option("--run-dir", *rep_dir, "directory holding run artifacts")->required();
  rep->add_option("--out-dir", *rep_out, "output directory (default: run dir)");
  rep->add_option("--seed", *rep_seed, "seed recorded in provenance lines");
  rep->callback([&action, rep_dir, rep_out, rep_seed]() {
    action = [=]() {
      namespace fs = std::filesystem;
      fs::path dir = *rep_dir;
      ReportInputs inputs;
      inputs.seed = *rep_seed;

      // Conventional artifact names produced by the other subcommands.
      CalibrationBank bank;
      bool have_bank = fs::exists(dir / "bank.jsonl");
      if (have_bank) {
        bank = load_bank(dir / "bank.jsonl");
        inputs.bank = &bank;
      }
      SimReport sim_report;
      bool have_sim = fs::exists(dir / "sim_report.json");
      if (have_sim) {
        std::ifstream in(dir / "sim_report.json");
        json j = json::parse(in);
        sim_report.avg_score = j.at("avg_score").get<double>();
        sim_report.runs = j.at("runs").get<long>();
        sim_report.frac_fired = j.at("frac_fired").get<std::vector<double>>();
        sim_report.avg_move = j.at("avg_move").get<std::vector<double>>();
        inputs.sim = &sim_report;
      }
      // Score-vs-budget rows from play/gen-data datasets named budget-<k>.jsonl.
      for (int budget = 0; budget <= 16; ++budget) {
        fs::path p = dir / ("budget-" + std::to_string(budget) + ".jsonl");
        if (!fs::exists(p)) continue;
        Dataset ds = read_jsonl(p);
        if (ds.records.empty()) continue;
        double mean = 0.0;
        for (const auto& r : ds.records) mean += r.result;
        inputs.score_vs_budget.emplace_back(budget,
                                            mean / static_cast<double>(ds.records.size()));
      }

      std::string stamp;
      for (const auto& e : {std::string("bank.jsonl"), std::string("sim_report.json")})
        stamp += e;
      inputs.config_hash = std::to_string(fnv1a(stamp));
      auto written = write_report(inputs, rep_out->empty() ? dir : fs::path(*rep_out));
      json names = json::array();
      for (const auto& p : written) names.push_back(p.string());
      std::cout << json{{"written", names}}.dump() << "\n";
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const EngineError& e) {
    std::cerr << "engine failure: " << e.what() << "\n";
    return 3;
  } catch (const OptimizeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const PolicyError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    // DataError, CalibrationError, PredictorError, SimError, AnalysisError,
    // bad numeric flags: all data-shaped problems.
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
