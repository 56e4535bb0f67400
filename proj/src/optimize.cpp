#include "chesslab/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "chesslab/util.hpp"

namespace chesslab {

SearchSpace SearchSpace::thresholds(int k, double lo, double hi) {
  SearchSpace space;
  space.dims = k;
  space.lower.assign(static_cast<size_t>(k), lo);
  space.upper.assign(static_cast<size_t>(k), hi);
  return space;
}

void SearchSpace::validate() const {
  if (dims < 1) throw OptimizeError("search space needs at least one dimension");
  if (static_cast<int>(lower.size()) != dims || static_cast<int>(upper.size()) != dims)
    throw OptimizeError("bounds must match dims");
  for (int i = 0; i < dims; ++i) {
    if (!std::isfinite(lower[static_cast<size_t>(i)]) || !std::isfinite(upper[static_cast<size_t>(i)]) ||
        lower[static_cast<size_t>(i)] >= upper[static_cast<size_t>(i)])
      throw OptimizeError("each dimension needs finite lower < upper");
  }
}

namespace {

constexpr double kPi = 3.14159265358979323846;

double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Halton low-discrepancy sequence, one base per dimension.
double halton(uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  uint64_t i = index;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % static_cast<uint64_t>(base));
    i /= static_cast<uint64_t>(base);
  }
  return r;
}

constexpr int kHaltonBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

std::vector<double> candidate_point(uint64_t index, const SearchSpace& space) {
  std::vector<double> x(static_cast<size_t>(space.dims));
  for (int d = 0; d < space.dims; ++d) {
    double u = halton(index + 1, kHaltonBases[d % 10]);
    x[static_cast<size_t>(d)] =
        space.lower[static_cast<size_t>(d)] +
        u * (space.upper[static_cast<size_t>(d)] - space.lower[static_cast<size_t>(d)]);
  }
  if (space.ordering_constraint) std::sort(x.begin(), x.end());
  return x;
}

// Gaussian process on standardized observations with a squared-exponential
// ARD kernel. Length scales are expressed as fractions of each dimension's
// range.
struct Gp {
  const SearchSpace& space;
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;  // standardized
  std::vector<double> length_frac;
  double noise_var = 1e-4;

  std::vector<std::vector<double>> chol;  // lower triangular of K
  std::vector<double> alpha;              // K^-1 y

  explicit Gp(const SearchSpace& s) : space(s) {
    length_frac.assign(static_cast<size_t>(s.dims), 0.3);
  }

  double range(int d) const {
    return space.upper[static_cast<size_t>(d)] - space.lower[static_cast<size_t>(d)];
  }

  double kernel(const std::vector<double>& a, const std::vector<double>& b) const {
    double s = 0.0;
    for (int d = 0; d < space.dims; ++d) {
      double len = length_frac[static_cast<size_t>(d)] * range(d);
      double diff = (a[static_cast<size_t>(d)] - b[static_cast<size_t>(d)]) / len;
      s += diff * diff;
    }
    return std::exp(-0.5 * s);
  }

  // Returns log marginal likelihood; false if the Cholesky fails.
  bool refit(double* log_ml = nullptr) {
    size_t n = xs.size();
    chol.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j <= i; ++j) {
        double v = kernel(xs[i], xs[j]);
        if (i == j) v += noise_var + 1e-10;
        chol[i][j] = v;
      }
    }
    // In-place Cholesky.
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j <= i; ++j) {
        double sum = chol[i][j];
        for (size_t k = 0; k < j; ++k) sum -= chol[i][k] * chol[j][k];
        if (i == j) {
          if (sum <= 0.0) return false;
          chol[i][i] = std::sqrt(sum);
        } else {
          chol[i][j] = sum / chol[j][j];
        }
      }
    }
    alpha = ys;
    for (size_t i = 0; i < n; ++i) {  // solve L z = y
      for (size_t k = 0; k < i; ++k) alpha[i] -= chol[i][k] * alpha[k];
      alpha[i] /= chol[i][i];
    }
    double quad = 0.0, logdet = 0.0;
    for (size_t i = 0; i < n; ++i) {
      quad += alpha[i] * alpha[i];
      logdet += std::log(chol[i][i]);
    }
    for (size_t i = n; i-- > 0;) {  // solve L^T alpha = z
      for (size_t k = i + 1; k < n; ++k) alpha[i] -= chol[k][i] * alpha[k];
      alpha[i] /= chol[i][i];
    }
    if (log_ml)
      *log_ml = -0.5 * quad - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * kPi);
    return true;
  }

  // Coordinate grid search over per-dimension length scales and the noise
  // term, two sweeps, maximizing marginal likelihood.
  void fit_hyperparams(double noise_floor) {
    static constexpr double kLenGrid[] = {0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.5};
    static constexpr double kNoiseGrid[] = {1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3};
    double best_ml = -1e300;
    refit(&best_ml);
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (int d = 0; d < space.dims; ++d) {
        double keep = length_frac[static_cast<size_t>(d)];
        double best_len = keep;
        for (double cand : kLenGrid) {
          length_frac[static_cast<size_t>(d)] = cand;
          double ml;
          if (refit(&ml) && ml > best_ml) {
            best_ml = ml;
            best_len = cand;
          }
        }
        length_frac[static_cast<size_t>(d)] = best_len;
      }
      double best_noise = noise_var;
      for (double cand : kNoiseGrid) {
        if (cand < noise_floor) continue;
        noise_var = cand;
        double ml;
        if (refit(&ml) && ml > best_ml) {
          best_ml = ml;
          best_noise = cand;
        }
      }
      noise_var = best_noise;
    }
    refit();
  }

  void posterior(const std::vector<double>& x, double* mean, double* var) const {
    size_t n = xs.size();
    std::vector<double> k(n);
    for (size_t i = 0; i < n; ++i) k[i] = kernel(x, xs[i]);
    double mu = 0.0;
    for (size_t i = 0; i < n; ++i) mu += k[i] * alpha[i];
    // v = L^-1 k
    std::vector<double> v = k;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < i; ++j) v[i] -= chol[i][j] * v[j];
      v[i] /= chol[i][i];
    }
    double reduction = 0.0;
    for (size_t i = 0; i < n; ++i) reduction += v[i] * v[i];
    *mean = mu;
    *var = std::max(1e-12, 1.0 + noise_var - reduction);
  }
};

}  // namespace

BayesOptResult bayes_opt(const Objective& objective, const SearchSpace& space,
                         const BayesOptOptions& options) {
  space.validate();
  if (options.iterations < 1) throw OptimizeError("need at least one iteration");
  if (space.dims > 10) throw OptimizeError("at most 10 dimensions supported");

  BayesOptResult result;
  std::mt19937_64 rng = derive_rng(options.seed, 0xb0);

  auto run_trial = [&](const std::vector<double>& params, uint64_t index) {
    Trial trial;
    trial.params = params;
    trial.backend = options.backend;
    StopWatch watch;
    try {
      ObjectiveResult r = objective(params, splitmix64(options.seed ^ (index * 2654435761ULL)));
      trial.value = r.value;
      trial.noise_se = r.noise_se;
    } catch (const std::exception&) {
      trial.failed = true;
    }
    trial.cost_seconds = watch.seconds();
    result.trials.push_back(trial);
    if (options.on_trial) options.on_trial(result.trials.back());
    return trial;
  };

  // Space-filling initialization.
  uint64_t halton_cursor = 17;  // skip the degenerate first points
  for (int i = 0; i < options.init_points; ++i)
    run_trial(candidate_point(halton_cursor++, space), static_cast<uint64_t>(i));

  for (int iter = 0; iter < options.iterations; ++iter) {
    // Collect successful observations.
    std::vector<const Trial*> ok;
    for (const auto& t : result.trials)
      if (!t.failed) ok.push_back(&t);

    std::vector<double> next;
    bool random_fallback = false;
    if (ok.size() < 2) {
      random_fallback = true;
    } else {
      double mean = 0.0;
      for (auto* t : ok) mean += t->value;
      mean /= static_cast<double>(ok.size());
      double var = 0.0, mean_se = 0.0;
      for (auto* t : ok) {
        var += (t->value - mean) * (t->value - mean);
        mean_se += t->noise_se;
      }
      var /= static_cast<double>(ok.size());
      mean_se /= static_cast<double>(ok.size());
      if (var < 1e-14) {
        // Flat objective so far; fall back to random search but keep going.
        random_fallback = true;
        result.degenerate_fallback = true;
      } else {
        double sd = std::sqrt(var);
        Gp gp(space);
        for (auto* t : ok) {
          gp.xs.push_back(t->params);
          gp.ys.push_back((t->value - mean) / sd);
        }
        // Observed standard errors seed the noise floor.
        double noise_floor = mean_se > 0.0 ? (mean_se / sd) * (mean_se / sd) * 0.5 : 0.0;
        gp.noise_var = std::max(1e-4, noise_floor);
        gp.fit_hyperparams(noise_floor);

        double best = -1e300;
        for (auto* t : ok) best = std::max(best, (t->value - mean) / sd);
        double best_ei = -1.0;
        uint64_t base = 1000 + static_cast<uint64_t>(iter) * static_cast<uint64_t>(options.candidate_pool);
        for (int c = 0; c < options.candidate_pool; ++c) {
          std::vector<double> x = candidate_point(base + static_cast<uint64_t>(c), space);
          double mu, v;
          gp.posterior(x, &mu, &v);
          double sigma = std::sqrt(v);
          double imp = mu - best - 0.001;
          double z = imp / sigma;
          double ei = imp * norm_cdf(z) + sigma * norm_pdf(z);
          if (ei > best_ei) {
            best_ei = ei;
            next = std::move(x);
          }
        }
        if (next.empty()) random_fallback = true;
      }
    }
    if (random_fallback) {
      next.assign(static_cast<size_t>(space.dims), 0.0);
      for (int d = 0; d < space.dims; ++d)
        next[static_cast<size_t>(d)] = std::uniform_real_distribution<double>(
            space.lower[static_cast<size_t>(d)], space.upper[static_cast<size_t>(d)])(rng);
      if (space.ordering_constraint) std::sort(next.begin(), next.end());
    }
    run_trial(next, static_cast<uint64_t>(options.init_points + iter));
  }

  // Incumbent: best successful trial.
  const Trial* best = nullptr;
  for (const auto& t : result.trials)
    if (!t.failed && (best == nullptr || t.value > best->value)) best = &t;
  if (best == nullptr) throw OptimizeError("every objective evaluation failed");
  result.best_params = best->params;
  result.best_value = best->value;
  return result;
}

}  // namespace chesslab
