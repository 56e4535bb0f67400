#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "chesslab/optimize.hpp"
#include "chesslab/util.hpp"

using namespace chesslab;

TEST_CASE("finds the maximum of a 1-d quadratic within 0.05 for every seed") {
  SearchSpace space = SearchSpace::thresholds(1, 0.0, 1.0);
  Objective objective = [](const std::vector<double>& x, uint64_t) {
    return ObjectiveResult{1.0 - (x[0] - 0.3) * (x[0] - 0.3), 0.0};
  };
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    BayesOptOptions opts;
    opts.init_points = 8;
    opts.iterations = 25;
    opts.seed = seed;
    auto result = bayes_opt(objective, space, opts);
    CHECK(result.trials.size() <= 33);
    CHECK(std::abs(result.best_params[0] - 0.3) <= 0.05);
  }
}

TEST_CASE("constant objective falls back to random search and reports the constant") {
  SearchSpace space = SearchSpace::thresholds(2);
  Objective objective = [](const std::vector<double>&, uint64_t) {
    return ObjectiveResult{0.42, 0.0};
  };
  BayesOptOptions opts;
  opts.init_points = 4;
  opts.iterations = 6;
  auto result = bayes_opt(objective, space, opts);
  CHECK(result.best_value == 0.42);
  CHECK(result.degenerate_fallback);
}

TEST_CASE("proposals respect bounds and the ordering constraint") {
  SearchSpace space = SearchSpace::thresholds(3, 0.1, 0.5);
  space.ordering_constraint = true;
  Objective objective = [&space](const std::vector<double>& x, uint64_t) {
    for (int d = 0; d < space.dims; ++d) {
      REQUIRE(x[static_cast<size_t>(d)] >= space.lower[static_cast<size_t>(d)]);
      REQUIRE(x[static_cast<size_t>(d)] <= space.upper[static_cast<size_t>(d)]);
    }
    for (size_t d = 1; d < x.size(); ++d) REQUIRE(x[d] >= x[d - 1]);
    double v = 1.0;
    for (double xi : x) v -= (xi - 0.3) * (xi - 0.3);
    return ObjectiveResult{v, 0.0};
  };
  BayesOptOptions opts;
  opts.init_points = 5;
  opts.iterations = 10;
  auto result = bayes_opt(objective, space, opts);
  CHECK(result.trials.size() == 15);
}

TEST_CASE("incumbent bookkeeping: best_value equals the max over successful trials") {
  SearchSpace space = SearchSpace::thresholds(1, 0.0, 1.0);
  int calls = 0;
  Objective objective = [&calls](const std::vector<double>& x, uint64_t) {
    if (++calls % 4 == 0) throw std::runtime_error("synthetic failure");
    return ObjectiveResult{std::sin(3.0 * x[0]), 0.0};
  };
  BayesOptOptions opts;
  opts.init_points = 6;
  opts.iterations = 12;
  auto result = bayes_opt(objective, space, opts);
  double best = -1e300;
  int failures = 0;
  for (const auto& t : result.trials) {
    if (t.failed) {
      ++failures;
      continue;
    }
    best = std::max(best, t.value);
  }
  CHECK(failures > 0);
  CHECK(result.best_value == best);
}

TEST_CASE("beats random search in aggregate on a noiseless unimodal objective") {
  SearchSpace space = SearchSpace::thresholds(1, 0.0, 1.0);
  auto objective_value = [](double x) { return 1.0 - (x - 0.62) * (x - 0.62); };
  double regret_bo = 0.0, regret_random = 0.0;
  const int budget = 20;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Objective objective = [&](const std::vector<double>& x, uint64_t) {
      return ObjectiveResult{objective_value(x[0]), 0.0};
    };
    BayesOptOptions opts;
    opts.init_points = 6;
    opts.iterations = budget - 6;
    opts.seed = seed;
    auto result = bayes_opt(objective, space, opts);
    regret_bo += 1.0 - result.best_value;

    std::mt19937_64 rng = derive_rng(seed, 7);
    double best_random = -1e300;
    for (int i = 0; i < budget; ++i) {
      double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      best_random = std::max(best_random, objective_value(x));
    }
    regret_random += 1.0 - best_random;
  }
  CHECK(regret_bo <= regret_random);
}

TEST_CASE("noisy objective still lands near the optimum") {
  SearchSpace space = SearchSpace::thresholds(1, 0.0, 1.0);
  Objective objective = [](const std::vector<double>& x, uint64_t eval_seed) {
    std::mt19937_64 rng(eval_seed);
    double noise = std::normal_distribution<double>(0.0, 0.03)(rng);
    return ObjectiveResult{1.0 - (x[0] - 0.4) * (x[0] - 0.4) + noise, 0.03};
  };
  BayesOptOptions opts;
  opts.init_points = 10;
  opts.iterations = 30;
  opts.seed = 5;
  auto result = bayes_opt(objective, space, opts);
  CHECK(std::abs(result.best_params[0] - 0.4) < 0.15);
}

TEST_CASE("validation and error paths") {
  SearchSpace bad;
  bad.dims = 2;
  bad.lower = {0.0, 0.5};
  bad.upper = {1.0, 0.4};
  Objective objective = [](const std::vector<double>&, uint64_t) {
    return ObjectiveResult{0.0, 0.0};
  };
  CHECK_THROWS_AS(bayes_opt(objective, bad, {}), OptimizeError);

  SearchSpace space = SearchSpace::thresholds(1);
  Objective always_fails = [](const std::vector<double>&, uint64_t) -> ObjectiveResult {
    throw std::runtime_error("down");
  };
  CHECK_THROWS_AS(bayes_opt(always_fails, space, {}), OptimizeError);
}

TEST_CASE("deterministic trial sequence for a deterministic objective") {
  SearchSpace space = SearchSpace::thresholds(2);
  Objective objective = [](const std::vector<double>& x, uint64_t) {
    return ObjectiveResult{1.0 - (x[0] - 0.2) * (x[0] - 0.2) - (x[1] - 0.4) * (x[1] - 0.4), 0.0};
  };
  BayesOptOptions opts;
  opts.init_points = 5;
  opts.iterations = 8;
  opts.seed = 11;
  auto a = bayes_opt(objective, space, opts);
  auto b = bayes_opt(objective, space, opts);
  REQUIRE(a.trials.size() == b.trials.size());
  for (size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].params == b.trials[i].params);
    CHECK(a.trials[i].value == b.trials[i].value);
  }
  CHECK(a.best_params == b.best_params);
}
