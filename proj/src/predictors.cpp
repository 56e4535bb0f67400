#include "chesslab/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "chesslab/util.hpp"

namespace chesslab {

using nlohmann::json;

double top_k_delta_sum(const std::vector<double>& deltas, int k) {
  if (k < 1) throw PredictorError("k must be >= 1");
  std::vector<double> clipped;
  clipped.reserve(deltas.size());
  for (double d : deltas) clipped.push_back(std::max(0.0, d));
  std::sort(clipped.begin(), clipped.end(), std::greater<double>());
  size_t take = std::min(clipped.size(), static_cast<size_t>(k));
  return std::accumulate(clipped.begin(), clipped.begin() + take, 0.0);
}

FeatureVector make_features(int t, double p_w, double p_s, const RunningGapStats& past) {
  return FeatureVector{static_cast<double>(t), p_w,      p_s,
                       p_s - p_w,             past.mean, past.max,
                       static_cast<double>(past.count)};
}

FeatureVector make_features_strong(int t, double p_s, const RunningGapStats& past) {
  return FeatureVector{static_cast<double>(t), p_s,      p_s,
                       0.0,                    past.mean, past.max,
                       static_cast<double>(past.count)};
}

std::string to_string(PredictorFamily f) {
  switch (f) {
    case PredictorFamily::kLinear: return "linear-l2";
    case PredictorFamily::kForest: return "random-forest";
    case PredictorFamily::kMlp: return "mlp";
  }
  return "linear-l2";
}

std::optional<PredictorFamily> predictor_family_from_string(std::string_view s) {
  if (s == "linear-l2" || s == "linear") return PredictorFamily::kLinear;
  if (s == "random-forest" || s == "forest") return PredictorFamily::kForest;
  if (s == "mlp") return PredictorFamily::kMlp;
  return std::nullopt;
}

std::vector<TrainingExample> build_training_set(const Dataset& d0, int k, TargetSide side) {
  if (k < 1) throw PredictorError("k must be >= 1");
  if (d0.records.empty()) throw PredictorError("empty dataset");
  std::vector<TrainingExample> out;
  for (const auto& record : d0.records) {
    size_t n = record.points.size();
    RunningGapStats past;
    for (size_t i = 0; i + 1 < n; ++i) {  // strict suffix must be nonempty
      const MovePoint& p = record.points[i];
      if (!p.pw || !p.ps)
        throw PredictorError("build_training_set requires calibrated points");
      std::vector<double> suffix;
      for (size_t j = i + 1; j < n; ++j) {
        const MovePoint& q = record.points[j];
        if (q.gap) suffix.push_back(*q.gap);
      }
      TrainingExample ex;
      ex.features = side == TargetSide::kWeak
                        ? make_features(p.t, *p.pw, *p.ps, past)
                        : make_features_strong(p.t, *p.ps, past);
      ex.target = top_k_delta_sum(suffix, k);
      out.push_back(ex);
      past.update(p.gap.value_or(std::max(0.0, *p.ps - *p.pw)));
    }
  }
  return out;
}

namespace {

// Cholesky solve of A x = b for symmetric positive definite A (in place).
std::vector<double> cholesky_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  size_t n = a.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      double sum = a[i][j];
      for (size_t k = 0; k < j; ++k) sum -= a[i][k] * a[j][k];
      if (i == j) {
        if (sum <= 0.0) throw PredictorError("singular design matrix");
        a[i][i] = std::sqrt(sum);
      } else {
        a[i][j] = sum / a[j][j];
      }
    }
  }
  for (size_t i = 0; i < n; ++i) {  // forward
    double sum = b[i];
    for (size_t k = 0; k < i; ++k) sum -= a[i][k] * b[k];
    b[i] = sum / a[i][i];
  }
  for (size_t i = n; i-- > 0;) {  // backward
    double sum = b[i];
    for (size_t k = i + 1; k < n; ++k) sum -= a[k][i] * b[k];
    b[i] = sum / a[i][i];
  }
  return b;
}

}  // namespace

double PredictorModel::predict(const FeatureVector& x) const {
  double raw = 0.0;
  switch (family_) {
    case PredictorFamily::kLinear: {
      raw = linear_weights_[kFeatureDim];
      for (int i = 0; i < kFeatureDim; ++i)
        raw += linear_weights_[static_cast<size_t>(i)] * (x[static_cast<size_t>(i)] - feat_mean_[static_cast<size_t>(i)]) /
               feat_scale_[static_cast<size_t>(i)];
      break;
    }
    case PredictorFamily::kForest: {
      if (trees_.empty()) throw PredictorError("forest not fitted");
      double sum = 0.0;
      for (const Tree& tree : trees_) {
        int node = 0;
        while (tree.nodes[static_cast<size_t>(node)].feature >= 0) {
          const TreeNode& nd = tree.nodes[static_cast<size_t>(node)];
          node = x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        sum += tree.nodes[static_cast<size_t>(node)].value;
      }
      raw = sum / static_cast<double>(trees_.size());
      break;
    }
    case PredictorFamily::kMlp: {
      std::vector<double> h1(mlp_w1_.size());
      for (size_t o = 0; o < mlp_w1_.size(); ++o) {
        double z = mlp_b1_[o];
        for (int i = 0; i < kFeatureDim; ++i)
          z += mlp_w1_[o][static_cast<size_t>(i)] *
               (x[static_cast<size_t>(i)] - feat_mean_[static_cast<size_t>(i)]) / feat_scale_[static_cast<size_t>(i)];
        h1[o] = std::max(0.0, z);
      }
      std::vector<double> h2(mlp_w2_.size());
      for (size_t o = 0; o < mlp_w2_.size(); ++o) {
        double z = mlp_b2_[o];
        for (size_t i = 0; i < h1.size(); ++i) z += mlp_w2_[o][i] * h1[i];
        h2[o] = std::max(0.0, z);
      }
      raw = mlp_b3_;
      for (size_t i = 0; i < h2.size(); ++i) raw += mlp_w3_[i] * h2[i];
      break;
    }
  }
  return std::clamp(raw, 0.0, static_cast<double>(target_k_));
}

namespace {

struct Standardization {
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> scale{};
};

Standardization standardize(const std::vector<TrainingExample>& data) {
  Standardization s;
  s.scale.fill(1.0);
  size_t n = data.size();
  for (const auto& ex : data)
    for (int i = 0; i < kFeatureDim; ++i) s.mean[static_cast<size_t>(i)] += ex.features[static_cast<size_t>(i)];
  for (int i = 0; i < kFeatureDim; ++i) s.mean[static_cast<size_t>(i)] /= static_cast<double>(n);
  for (const auto& ex : data)
    for (int i = 0; i < kFeatureDim; ++i) {
      double d = ex.features[static_cast<size_t>(i)] - s.mean[static_cast<size_t>(i)];
      s.scale[static_cast<size_t>(i)] += d * d;
    }
  for (int i = 0; i < kFeatureDim; ++i) {
    double var = (s.scale[static_cast<size_t>(i)] - 1.0) / static_cast<double>(n);
    s.scale[static_cast<size_t>(i)] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return s;
}

}  // namespace

PredictorModel fit_predictor(PredictorFamily family,
                             const std::vector<TrainingExample>& training_set, int k,
                             TargetSide side, const PredictorHyperparams& params,
                             uint64_t seed) {
  if (training_set.empty()) throw PredictorError("empty training set");
  PredictorModel model;
  model.family_ = family;
  model.target_k_ = k;
  model.side_ = side;

  switch (family) {
    case PredictorFamily::kLinear: {
      auto st = standardize(training_set);
      model.feat_mean_ = st.mean;
      model.feat_scale_ = st.scale;
      size_t dim = kFeatureDim + 1;
      std::vector<std::vector<double>> xtx(dim, std::vector<double>(dim, 0.0));
      std::vector<double> xty(dim, 0.0);
      std::vector<double> row(dim, 1.0);
      for (const auto& ex : training_set) {
        for (int i = 0; i < kFeatureDim; ++i)
          row[static_cast<size_t>(i)] =
              (ex.features[static_cast<size_t>(i)] - st.mean[static_cast<size_t>(i)]) / st.scale[static_cast<size_t>(i)];
        row[kFeatureDim] = 1.0;
        for (size_t i = 0; i < dim; ++i) {
          xty[i] += row[i] * ex.target;
          for (size_t j = 0; j <= i; ++j) xtx[i][j] += row[i] * row[j];
        }
      }
      for (size_t i = 0; i < dim; ++i)
        for (size_t j = i + 1; j < dim; ++j) xtx[i][j] = xtx[j][i];
      if (params.ridge_lambda <= 0.0 && training_set.size() < dim)
        throw PredictorError("singular design matrix: too few examples without ridge");
      for (size_t i = 0; i + 1 < dim; ++i) xtx[i][i] += params.ridge_lambda;  // bias unpenalized
      auto w = cholesky_solve(std::move(xtx), std::move(xty));
      for (size_t i = 0; i < dim; ++i) model.linear_weights_[i] = w[i];
      break;
    }

    case PredictorFamily::kForest: {
      std::mt19937_64 rng(splitmix64(seed));
      size_t n = training_set.size();
      size_t sample_n = std::min<size_t>(n, static_cast<size_t>(params.forest_max_samples));
      int mtry = std::max(1, kFeatureDim / 3);

      struct Builder {
        const std::vector<TrainingExample>& data;
        const PredictorHyperparams& params;
        int mtry;
        std::mt19937_64& rng;
        PredictorModel::Tree* tree;

        int build(std::vector<int>& idx, int lo, int hi, int depth) {
          double sum = 0.0, sq = 0.0;
          for (int i = lo; i < hi; ++i) {
            double y = data[static_cast<size_t>(idx[static_cast<size_t>(i)])].target;
            sum += y;
            sq += y * y;
          }
          int count = hi - lo;
          double mean = sum / count;
          double sse = sq - sum * sum / count;

          PredictorModel::TreeNode node;
          node.value = mean;
          int node_id = static_cast<int>(tree->nodes.size());
          tree->nodes.push_back(node);
          if (depth >= params.forest_max_depth || count < 2 * params.forest_min_leaf ||
              sse <= 1e-12)
            return node_id;

          int best_feature = -1;
          double best_threshold = 0.0, best_score = sse - 1e-12;
          for (int trial = 0; trial < mtry; ++trial) {
            int f = static_cast<int>(rng() % kFeatureDim);
            std::sort(idx.begin() + lo, idx.begin() + hi, [&](int a, int b) {
              return data[static_cast<size_t>(a)].features[static_cast<size_t>(f)] <
                     data[static_cast<size_t>(b)].features[static_cast<size_t>(f)];
            });
            double left_sum = 0.0, left_sq = 0.0;
            for (int i = lo; i + 1 < hi; ++i) {
              double y = data[static_cast<size_t>(idx[static_cast<size_t>(i)])].target;
              left_sum += y;
              left_sq += y * y;
              int nl = i - lo + 1, nr = hi - i - 1;
              double xa = data[static_cast<size_t>(idx[static_cast<size_t>(i)])].features[static_cast<size_t>(f)];
              double xb = data[static_cast<size_t>(idx[static_cast<size_t>(i + 1)])].features[static_cast<size_t>(f)];
              if (xa == xb || nl < params.forest_min_leaf || nr < params.forest_min_leaf)
                continue;
              double right_sum = sum - left_sum, right_sq = sq - left_sq;
              double score = (left_sq - left_sum * left_sum / nl) +
                             (right_sq - right_sum * right_sum / nr);
              if (score < best_score) {
                best_score = score;
                best_feature = f;
                best_threshold = 0.5 * (xa + xb);
              }
            }
          }
          if (best_feature < 0) return node_id;

          std::sort(idx.begin() + lo, idx.begin() + hi, [&](int a, int b) {
            return data[static_cast<size_t>(a)].features[static_cast<size_t>(best_feature)] <
                   data[static_cast<size_t>(b)].features[static_cast<size_t>(best_feature)];
          });
          int mid = lo;
          while (mid < hi &&
                 data[static_cast<size_t>(idx[static_cast<size_t>(mid)])].features[static_cast<size_t>(best_feature)] <=
                     best_threshold)
            ++mid;
          tree->nodes[static_cast<size_t>(node_id)].feature = best_feature;
          tree->nodes[static_cast<size_t>(node_id)].threshold = best_threshold;
          int left = build(idx, lo, mid, depth + 1);
          tree->nodes[static_cast<size_t>(node_id)].left = left;
          int right = build(idx, mid, hi, depth + 1);
          tree->nodes[static_cast<size_t>(node_id)].right = right;
          return node_id;
        }
      };

      for (int t = 0; t < params.forest_trees; ++t) {
        PredictorModel::Tree tree;
        std::vector<int> idx(sample_n);
        for (size_t i = 0; i < sample_n; ++i)
          idx[i] = static_cast<int>(rng() % n);  // bootstrap
        Builder builder{training_set, params, mtry, rng, &tree};
        builder.build(idx, 0, static_cast<int>(sample_n), 0);
        model.trees_.push_back(std::move(tree));
      }
      break;
    }

    case PredictorFamily::kMlp: {
      auto st = standardize(training_set);
      model.feat_mean_ = st.mean;
      model.feat_scale_ = st.scale;
      std::mt19937_64 rng(splitmix64(seed));
      int h = params.mlp_hidden;
      auto init = [&rng](int fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        return dist;
      };
      auto d1 = init(kFeatureDim);
      model.mlp_w1_.assign(static_cast<size_t>(h), std::vector<double>(kFeatureDim));
      model.mlp_b1_.assign(static_cast<size_t>(h), 0.0);
      for (auto& row : model.mlp_w1_)
        for (auto& w : row) w = d1(rng);
      auto d2 = init(h);
      model.mlp_w2_.assign(static_cast<size_t>(h), std::vector<double>(static_cast<size_t>(h)));
      model.mlp_b2_.assign(static_cast<size_t>(h), 0.0);
      for (auto& row : model.mlp_w2_)
        for (auto& w : row) w = d2(rng);
      model.mlp_w3_.assign(static_cast<size_t>(h), 0.0);
      for (auto& w : model.mlp_w3_) w = d2(rng);

      size_t n = training_set.size();
      std::vector<size_t> order(n);
      std::iota(order.begin(), order.end(), 0);

      std::vector<double> xs(kFeatureDim);
      for (int epoch = 0; epoch < params.mlp_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < n; start += static_cast<size_t>(params.mlp_batch)) {
          size_t end = std::min(n, start + static_cast<size_t>(params.mlp_batch));
          double batch = static_cast<double>(end - start);
          // Gradient accumulators.
          std::vector<std::vector<double>> g1(model.mlp_w1_.size(),
                                              std::vector<double>(kFeatureDim, 0.0));
          std::vector<std::vector<double>> g2(model.mlp_w2_.size(),
                                              std::vector<double>(static_cast<size_t>(h), 0.0));
          std::vector<double> gb1(static_cast<size_t>(h), 0.0), gb2(static_cast<size_t>(h), 0.0),
              g3(static_cast<size_t>(h), 0.0);
          double gb3 = 0.0;

          for (size_t oi = start; oi < end; ++oi) {
            const auto& ex = training_set[order[oi]];
            for (int i = 0; i < kFeatureDim; ++i)
              xs[static_cast<size_t>(i)] =
                  (ex.features[static_cast<size_t>(i)] - st.mean[static_cast<size_t>(i)]) / st.scale[static_cast<size_t>(i)];
            std::vector<double> z1(static_cast<size_t>(h)), a1(static_cast<size_t>(h));
            for (int o = 0; o < h; ++o) {
              double z = model.mlp_b1_[static_cast<size_t>(o)];
              for (int i = 0; i < kFeatureDim; ++i)
                z += model.mlp_w1_[static_cast<size_t>(o)][static_cast<size_t>(i)] * xs[static_cast<size_t>(i)];
              z1[static_cast<size_t>(o)] = z;
              a1[static_cast<size_t>(o)] = std::max(0.0, z);
            }
            std::vector<double> z2(static_cast<size_t>(h)), a2(static_cast<size_t>(h));
            for (int o = 0; o < h; ++o) {
              double z = model.mlp_b2_[static_cast<size_t>(o)];
              for (int i = 0; i < h; ++i)
                z += model.mlp_w2_[static_cast<size_t>(o)][static_cast<size_t>(i)] * a1[static_cast<size_t>(i)];
              z2[static_cast<size_t>(o)] = z;
              a2[static_cast<size_t>(o)] = std::max(0.0, z);
            }
            double pred = model.mlp_b3_;
            for (int i = 0; i < h; ++i)
              pred += model.mlp_w3_[static_cast<size_t>(i)] * a2[static_cast<size_t>(i)];
            double err = 2.0 * (pred - ex.target);

            gb3 += err;
            std::vector<double> d2v(static_cast<size_t>(h));
            for (int i = 0; i < h; ++i) {
              g3[static_cast<size_t>(i)] += err * a2[static_cast<size_t>(i)];
              d2v[static_cast<size_t>(i)] =
                  z2[static_cast<size_t>(i)] > 0.0 ? err * model.mlp_w3_[static_cast<size_t>(i)] : 0.0;
            }
            std::vector<double> d1v(static_cast<size_t>(h), 0.0);
            for (int o = 0; o < h; ++o) {
              gb2[static_cast<size_t>(o)] += d2v[static_cast<size_t>(o)];
              for (int i = 0; i < h; ++i) {
                g2[static_cast<size_t>(o)][static_cast<size_t>(i)] +=
                    d2v[static_cast<size_t>(o)] * a1[static_cast<size_t>(i)];
                d1v[static_cast<size_t>(i)] +=
                    d2v[static_cast<size_t>(o)] * model.mlp_w2_[static_cast<size_t>(o)][static_cast<size_t>(i)];
              }
            }
            for (int o = 0; o < h; ++o) {
              double d = z1[static_cast<size_t>(o)] > 0.0 ? d1v[static_cast<size_t>(o)] : 0.0;
              gb1[static_cast<size_t>(o)] += d;
              for (int i = 0; i < kFeatureDim; ++i)
                g1[static_cast<size_t>(o)][static_cast<size_t>(i)] += d * xs[static_cast<size_t>(i)];
            }
          }

          double lr = params.mlp_lr / batch;
          double decay = params.mlp_weight_decay;
          for (int o = 0; o < h; ++o) {
            model.mlp_b1_[static_cast<size_t>(o)] -= lr * gb1[static_cast<size_t>(o)];
            model.mlp_b2_[static_cast<size_t>(o)] -= lr * gb2[static_cast<size_t>(o)];
            model.mlp_w3_[static_cast<size_t>(o)] -=
                lr * (g3[static_cast<size_t>(o)] + decay * model.mlp_w3_[static_cast<size_t>(o)]);
            for (int i = 0; i < kFeatureDim; ++i)
              model.mlp_w1_[static_cast<size_t>(o)][static_cast<size_t>(i)] -=
                  lr * (g1[static_cast<size_t>(o)][static_cast<size_t>(i)] +
                        decay * model.mlp_w1_[static_cast<size_t>(o)][static_cast<size_t>(i)]);
            for (int i = 0; i < h; ++i)
              model.mlp_w2_[static_cast<size_t>(o)][static_cast<size_t>(i)] -=
                  lr * (g2[static_cast<size_t>(o)][static_cast<size_t>(i)] +
                        decay * model.mlp_w2_[static_cast<size_t>(o)][static_cast<size_t>(i)]);
          }
          model.mlp_b3_ -= lr * gb3;
        }
      }
      break;
    }
  }
  return model;
}

std::string PredictorModel::serialize() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["family"] = to_string(family_);
  j["k"] = target_k_;
  j["side"] = side_ == TargetSide::kWeak ? "weak" : "strong";
  json params;
  params["feat_mean"] = feat_mean_;
  params["feat_scale"] = feat_scale_;
  switch (family_) {
    case PredictorFamily::kLinear:
      params["weights"] = linear_weights_;
      break;
    case PredictorFamily::kForest: {
      json trees = json::array();
      for (const Tree& t : trees_) {
        json nodes = json::array();
        for (const TreeNode& n : t.nodes)
          nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        trees.push_back(std::move(nodes));
      }
      params["trees"] = std::move(trees);
      break;
    }
    case PredictorFamily::kMlp:
      params["w1"] = mlp_w1_;
      params["b1"] = mlp_b1_;
      params["w2"] = mlp_w2_;
      params["b2"] = mlp_b2_;
      params["w3"] = mlp_w3_;
      params["b3"] = mlp_b3_;
      break;
  }
  std::string blob = params.dump();
  j["params"] = std::move(params);
  j["hash"] = fnv1a(blob);
  return j.dump();
}

PredictorModel PredictorModel::deserialize(const std::string& text) {
  try {
    return deserialize_impl(text);
  } catch (const json::exception& e) {
    throw PredictorError(std::string("bad predictor artifact: ") + e.what());
  }
}

PredictorModel PredictorModel::deserialize_impl(const std::string& text) {
  json j = json::parse(text);
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw PredictorError("predictor schema version mismatch");
  std::string blob = j.at("params").dump();
  if (j.at("hash").get<uint64_t>() != fnv1a(blob))
    throw PredictorError("predictor artifact failed its self-check hash");

  PredictorModel model;
  auto family = predictor_family_from_string(j.at("family").get<std::string>());
  if (!family) throw PredictorError("unknown predictor family");
  model.family_ = *family;
  model.target_k_ = j.at("k").get<int>();
  model.side_ = j.at("side").get<std::string>() == "weak" ? TargetSide::kWeak
                                                          : TargetSide::kStrong;
  const json& params = j.at("params");
  model.feat_mean_ = params.at("feat_mean").get<std::array<double, kFeatureDim>>();
  model.feat_scale_ = params.at("feat_scale").get<std::array<double, kFeatureDim>>();
  switch (model.family_) {
    case PredictorFamily::kLinear:
      model.linear_weights_ =
          params.at("weights").get<std::array<double, kFeatureDim + 1>>();
      break;
    case PredictorFamily::kForest:
      for (const auto& tj : params.at("trees")) {
        Tree tree;
        for (const auto& nj : tj) {
          TreeNode n;
          n.feature = nj.at(0).get<int>();
          n.threshold = nj.at(1).get<double>();
          n.left = nj.at(2).get<int>();
          n.right = nj.at(3).get<int>();
          n.value = nj.at(4).get<double>();
          tree.nodes.push_back(n);
        }
        model.trees_.push_back(std::move(tree));
      }
      break;
    case PredictorFamily::kMlp:
      model.mlp_w1_ = params.at("w1").get<std::vector<std::vector<double>>>();
      model.mlp_b1_ = params.at("b1").get<std::vector<double>>();
      model.mlp_w2_ = params.at("w2").get<std::vector<std::vector<double>>>();
      model.mlp_b2_ = params.at("b2").get<std::vector<double>>();
      model.mlp_w3_ = params.at("w3").get<std::vector<double>>();
      model.mlp_b3_ = params.at("b3").get<double>();
      break;
  }
  return model;
}

PredictorBundle train_bundle(const Dataset& d0, int budget, PredictorFamily family,
                             const PredictorHyperparams& params, uint64_t seed) {
  if (budget < 1) throw PredictorError("budget must be >= 1");
  PredictorBundle bundle;
  bundle.budget = budget;
  for (int j = 1; j <= budget; ++j) {
    auto set = build_training_set(d0, j, TargetSide::kWeak);
    bundle.weak.push_back(fit_predictor(family, set, j, TargetSide::kWeak, params,
                                        splitmix64(seed ^ (0x57eaUL + static_cast<uint64_t>(j)))));
  }
  for (int j = 1; j <= budget - 1; ++j) {
    auto set = build_training_set(d0, j, TargetSide::kStrong);
    bundle.strong.push_back(
        fit_predictor(family, set, j, TargetSide::kStrong, params,
                      splitmix64(seed ^ (0x0c0ddUL + static_cast<uint64_t>(j)))));
  }
  return bundle;
}

void save_bundle(const PredictorBundle& bundle, const std::filesystem::path& path) {
  std::string out;
  json header;
  header["schema_version"] = kSchemaVersion;
  header["budget"] = bundle.budget;
  out += header.dump();
  out += '\n';
  for (const auto& m : bundle.weak) {
    out += m.serialize();
    out += '\n';
  }
  for (const auto& m : bundle.strong) {
    out += m.serialize();
    out += '\n';
  }
  atomic_write_file(path, out);
}

PredictorBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PredictorError("cannot open bundle: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw PredictorError("empty bundle file");
  PredictorBundle bundle;
  try {
    json header = json::parse(line);
    if (header.at("schema_version").get<int>() != kSchemaVersion)
      throw PredictorError("bundle schema version mismatch");
    bundle.budget = header.at("budget").get<int>();
  } catch (const json::exception& e) {
    throw PredictorError(std::string("bad bundle header: ") + e.what());
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    PredictorModel m = PredictorModel::deserialize(line);
    if (m.side() == TargetSide::kWeak) bundle.weak.push_back(std::move(m));
    else bundle.strong.push_back(std::move(m));
  }
  if (static_cast<int>(bundle.weak.size()) != bundle.budget ||
      static_cast<int>(bundle.strong.size()) != bundle.budget - 1)
    throw PredictorError("bundle is missing predictors");
  return bundle;
}

MaxDeltaPolicy make_maxdelta_policy(const PredictorBundle& bundle,
                                    const std::vector<double>& slacks,
                                    const RunningGapStats* stats) {
  if (static_cast<int>(slacks.size()) != bundle.budget)
    throw PredictorError("slack count must equal the budget");
  MaxDeltaPolicy policy;
  policy.slacks = slacks;
  for (const auto& model : bundle.weak) {
    policy.predictors_weak.push_back([&model, stats](const DecisionContext& ctx) {
      return model.predict(make_features(ctx.move_number, ctx.p_w, ctx.p_s, *stats));
    });
  }
  for (const auto& model : bundle.strong) {
    policy.predictors_strong.push_back([&model, stats](const DecisionContext& ctx) {
      return model.predict(make_features_strong(ctx.move_number, ctx.p_s, *stats));
    });
  }
  return policy;
}

}  // namespace chesslab
