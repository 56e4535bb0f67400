#include "chesslab/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "json.hpp"

#include "chesslab/util.hpp"

namespace chesslab {

using nlohmann::json;

double IsotonicCurve::eval(double x) const {
  if (breakpoints.empty()) throw CalibrationError("curve not fitted");
  // Last breakpoint <= x, right-continuous; below the first -> first value.
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
  if (it == breakpoints.begin()) return clamp01(values.front());
  size_t idx = static_cast<size_t>(it - breakpoints.begin()) - 1;
  return clamp01(values[idx]);
}

IsotonicCurve fit_isotonic(std::vector<CalibrationPair> pairs) {
  if (pairs.size() < 2) throw CalibrationError("fit_isotonic needs at least 2 pairs");
  for (const auto& p : pairs) {
    if (p.alpha < 0.0 || p.alpha > 1.0 || p.score < 0.0 || p.score > 1.0)
      throw CalibrationError("calibration pair out of range");
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const CalibrationPair& a, const CalibrationPair& b) { return a.alpha < b.alpha; });

  // Pre-average ties in alpha, keeping multiplicity as weight.
  struct Block {
    double alpha_lo;
    double sum;
    double weight;
    double value() const { return sum / weight; }
  };
  std::vector<Block> grouped;
  for (const auto& p : pairs) {
    if (!grouped.empty() && grouped.back().alpha_lo == p.alpha) {
      grouped.back().sum += p.score;
      grouped.back().weight += 1.0;
    } else {
      grouped.push_back(Block{p.alpha, p.score, 1.0});
    }
  }

  IsotonicCurve curve;
  if (grouped.size() == 1) {
    curve.breakpoints = {grouped[0].alpha_lo};
    curve.values = {grouped[0].value()};
    curve.degenerate = true;
    return curve;
  }

  // Pool adjacent violators over the weighted groups.
  std::vector<Block> stack;
  for (const Block& g : grouped) {
    stack.push_back(g);
    while (stack.size() >= 2 && stack[stack.size() - 2].value() > stack.back().value()) {
      Block top = stack.back();
      stack.pop_back();
      stack.back().sum += top.sum;
      stack.back().weight += top.weight;
    }
  }

  for (const Block& b : stack) {
    curve.breakpoints.push_back(b.alpha_lo);
    curve.values.push_back(b.value());
  }
  return curve;
}

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_grad(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double MonotoneNet::eval(double x) const {
  std::vector<double> act{x};
  for (size_t li = 0; li < layers_.size(); ++li) {
    const Layer& layer = layers_[li];
    std::vector<double> next(layer.weights.size());
    bool last = li + 1 == layers_.size();
    for (size_t o = 0; o < layer.weights.size(); ++o) {
      double z = layer.biases[o];
      for (size_t i = 0; i < act.size(); ++i) z += layer.weights[o][i] * act[i];
      next[o] = last ? z : softplus(z);
    }
    act = std::move(next);
  }
  return sigmoid(act[0]);
}

MonotoneNet fit_monotone_net(const std::vector<CalibrationPair>& pairs,
                             const MonotoneNetConfig& config) {
  if (pairs.size() < 10) throw CalibrationError("fit_monotone_net needs at least 10 pairs");

  std::mt19937_64 rng(splitmix64(config.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  MonotoneNet net;
  int in_dim = 1;
  std::vector<int> widths = config.hidden_layers;
  widths.push_back(1);  // final scalar
  for (int w : widths) {
    MonotoneNet::Layer layer;
    layer.weights.assign(static_cast<size_t>(w), std::vector<double>(in_dim));
    layer.biases.assign(static_cast<size_t>(w), 0.0);
    for (int o = 0; o < w; ++o) {
      for (int i = 0; i < in_dim; ++i)
        layer.weights[static_cast<size_t>(o)][static_cast<size_t>(i)] =
            unit(rng) * (in_dim == 1 ? 4.0 : 1.0 / std::sqrt(in_dim));
      // First hidden layer: spread activation knots across [0,1].
      if (in_dim == 1 && w > 1)
        layer.biases[static_cast<size_t>(o)] =
            -layer.weights[static_cast<size_t>(o)][0] * (o / std::max(1.0, w - 1.0));
      else
        layer.biases[static_cast<size_t>(o)] = -0.5 * unit(rng);
    }
    net.layers_.push_back(std::move(layer));
    in_dim = w;
  }

  size_t n = pairs.size();
  size_t depth = net.layers_.size();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Accumulated full-batch gradients.
    std::vector<MonotoneNet::Layer> grads;
    for (const auto& layer : net.layers_) {
      MonotoneNet::Layer g;
      g.weights.assign(layer.weights.size(), std::vector<double>(layer.weights[0].size(), 0.0));
      g.biases.assign(layer.biases.size(), 0.0);
      grads.push_back(std::move(g));
    }

    double loss = 0.0;
    for (const auto& p : pairs) {
      // Forward, caching pre-activations and activations.
      std::vector<std::vector<double>> acts{{p.alpha}};
      std::vector<std::vector<double>> zs;
      for (size_t li = 0; li < depth; ++li) {
        const auto& layer = net.layers_[li];
        bool last = li + 1 == depth;
        std::vector<double> z(layer.weights.size());
        std::vector<double> a(layer.weights.size());
        for (size_t o = 0; o < layer.weights.size(); ++o) {
          double v = layer.biases[o];
          for (size_t i = 0; i < acts.back().size(); ++i)
            v += layer.weights[o][i] * acts.back()[i];
          z[o] = v;
          a[o] = last ? v : softplus(v);
        }
        zs.push_back(std::move(z));
        acts.push_back(std::move(a));
      }
      double g_out = acts.back()[0];
      double pred = sigmoid(g_out);
      double err = pred - p.score;
      loss += err * err;

      // Backward. dL/dg = 2 err sigma'(g); sigma'(g) = pred (1 - pred).
      std::vector<double> delta{2.0 * err * pred * (1.0 - pred)};
      for (size_t li = depth; li-- > 0;) {
        const auto& layer = net.layers_[li];
        bool last = li + 1 == depth;
        std::vector<double> d(layer.weights.size());
        for (size_t o = 0; o < layer.weights.size(); ++o)
          d[o] = last ? delta[o] : delta[o] * softplus_grad(zs[li][o]);
        for (size_t o = 0; o < layer.weights.size(); ++o) {
          grads[li].biases[o] += d[o];
          for (size_t i = 0; i < acts[li].size(); ++i)
            grads[li].weights[o][i] += d[o] * acts[li][i];
        }
        if (li > 0) {
          std::vector<double> prev(acts[li].size(), 0.0);
          for (size_t o = 0; o < layer.weights.size(); ++o)
            for (size_t i = 0; i < prev.size(); ++i) prev[i] += d[o] * layer.weights[o][i];
          delta = std::move(prev);
        }
      }
    }

    loss /= static_cast<double>(n);
    if (!std::isfinite(loss))
      throw CalibrationError("monotone net diverged at epoch " + std::to_string(epoch));

    double lr = config.learning_rate / static_cast<double>(n);
    for (size_t li = 0; li < depth; ++li) {
      auto& layer = net.layers_[li];
      for (size_t o = 0; o < layer.weights.size(); ++o) {
        layer.biases[o] -= lr * grads[li].biases[o];
        for (size_t i = 0; i < layer.weights[o].size(); ++i) {
          layer.weights[o][i] -= lr * grads[li].weights[o][i];
          if (layer.weights[o][i] < 0.0) layer.weights[o][i] = 0.0;  // projection
        }
      }
    }
  }
  return net;
}

MseComparison compare_mse(const std::vector<CalibrationPair>& holdout,
                          const IsotonicCurve& isotonic, const MonotoneNet& net) {
  if (holdout.empty()) throw CalibrationError("empty holdout");
  MseComparison cmp;
  for (const auto& p : holdout) {
    double ei = isotonic.eval(p.alpha) - p.score;
    double en = net.eval(p.alpha) - p.score;
    cmp.mse_isotonic += ei * ei;
    cmp.mse_net += en * en;
  }
  cmp.mse_isotonic /= static_cast<double>(holdout.size());
  cmp.mse_net /= static_cast<double>(holdout.size());
  cmp.winner = cmp.mse_net < cmp.mse_isotonic ? MseComparison::Winner::kMonotoneNet
                                              : MseComparison::Winner::kIsotonic;
  return cmp;
}

int CalibrationBank::bucket_of(int move_number) const {
  int idx = (move_number - 1) / bucket_width;
  int count = static_cast<int>(curves.size());
  return std::clamp(idx, 0, count - 1);
}

const IsotonicCurve& CalibrationBank::curve_for_move(int move_number) const {
  if (curves.empty()) throw CalibrationError("empty calibration bank");
  return curves[static_cast<size_t>(bucket_of(move_number))];
}

double CalibrationBank::calibrate(int move_number, double raw) const {
  return curve_for_move(move_number).eval(raw);
}

CalibrationBank build_bank(const Dataset& d0, const BankConfig& config) {
  if (d0.records.empty()) throw CalibrationError("cannot build bank from an empty dataset");
  int buckets = (config.horizon + config.bucket_width - 1) / config.bucket_width;

  // Calibration pairs come from the weak side's raw values: those reflect the
  // game actually played, and the final result is the regression target.
  std::vector<std::vector<CalibrationPair>> per_bucket(static_cast<size_t>(buckets));
  for (const auto& record : d0.records) {
    for (const auto& point : record.points) {
      if (!point.pw_raw) continue;
      if (point.t < 1 || point.t > config.horizon) continue;
      int b = (point.t - 1) / config.bucket_width;
      per_bucket[static_cast<size_t>(b)].push_back(
          CalibrationPair{*point.pw_raw, record.result});
    }
  }

  CalibrationBank bank;
  bank.bucket_width = config.bucket_width;
  bank.horizon = config.horizon;
  bank.curves.resize(static_cast<size_t>(buckets));
  bank.fitted.assign(static_cast<size_t>(buckets), false);

  int populated = 0;
  for (int b = 0; b < buckets; ++b) {
    auto& pairs = per_bucket[static_cast<size_t>(b)];
    if (static_cast<int>(pairs.size()) < std::max(2, config.min_samples)) continue;
    IsotonicCurve curve;
    if (config.method == CalibrationMethod::kIsotonic) {
      curve = fit_isotonic(pairs);
    } else {
      MonotoneNetConfig net_cfg = config.net;
      net_cfg.seed = splitmix64(config.net.seed ^ static_cast<uint64_t>(b));
      MonotoneNet net = fit_monotone_net(pairs, net_cfg);
      // Tabulate to a step curve so all banks serialize identically.
      for (int i = 0; i <= 100; ++i) {
        double x = i / 100.0;
        curve.breakpoints.push_back(x);
        curve.values.push_back(net.eval(x));
      }
    }
    curve.move_bucket = b;
    bank.curves[static_cast<size_t>(b)] = std::move(curve);
    bank.fitted[static_cast<size_t>(b)] = true;
    ++populated;
  }
  if (populated == 0)
    throw CalibrationError("no bucket has enough calibration pairs (min_samples=" +
                           std::to_string(config.min_samples) + ")");

  // Sparse buckets borrow the nearest populated curve (ties to the left).
  for (int b = 0; b < buckets; ++b) {
    if (bank.fitted[static_cast<size_t>(b)]) continue;
    int best = -1, best_dist = buckets + 1;
    for (int o = 0; o < buckets; ++o) {
      if (!bank.fitted[static_cast<size_t>(o)]) continue;
      int dist = std::abs(o - b);
      if (dist < best_dist) {
        best_dist = dist;
        best = o;
      }
    }
    bank.curves[static_cast<size_t>(b)] = bank.curves[static_cast<size_t>(best)];
    bank.curves[static_cast<size_t>(b)].move_bucket = b;
  }
  return bank;
}

void apply_calibration(Dataset& dataset, const CalibrationBank& bank) {
  for (auto& record : dataset.records) {
    for (auto& point : record.points) {
      if (point.pw_raw) point.pw = bank.calibrate(point.t, *point.pw_raw);
      if (point.ps_raw) point.ps = bank.calibrate(point.t, *point.ps_raw);
      if (point.pw && point.ps) point.gap = std::max(0.0, *point.ps - *point.pw);
    }
  }
}

CalibrationBank identity_bank(int horizon) {
  CalibrationBank bank;
  bank.bucket_width = horizon;
  bank.horizon = horizon;
  IsotonicCurve identity;
  for (int i = 0; i <= 100; ++i) {
    identity.breakpoints.push_back(i / 100.0);
    identity.values.push_back(i / 100.0);
  }
  bank.curves.push_back(std::move(identity));
  bank.fitted.push_back(true);
  return bank;
}

void save_bank(const CalibrationBank& bank, const std::filesystem::path& path) {
  std::string out;
  json header;
  header["schema_version"] = kSchemaVersion;
  header["bucket_width"] = bank.bucket_width;
  header["horizon"] = bank.horizon;
  out += header.dump();
  out += '\n';
  for (size_t b = 0; b < bank.curves.size(); ++b) {
    json j;
    j["bucket"] = bank.curves[b].move_bucket;
    j["breakpoints"] = bank.curves[b].breakpoints;
    j["values"] = bank.curves[b].values;
    j["fitted"] = static_cast<bool>(bank.fitted[b]);
    j["degenerate"] = bank.curves[b].degenerate;
    out += j.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

CalibrationBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CalibrationError("cannot open bank: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CalibrationError("empty bank file");
  CalibrationBank bank;
  try {
    json header = json::parse(line);
    if (header.at("schema_version").get<int>() != kSchemaVersion)
      throw CalibrationError("bank schema version mismatch");
    bank.bucket_width = header.at("bucket_width").get<int>();
    bank.horizon = header.at("horizon").get<int>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      IsotonicCurve curve;
      curve.move_bucket = j.at("bucket").get<int>();
      curve.breakpoints = j.at("breakpoints").get<std::vector<double>>();
      curve.values = j.at("values").get<std::vector<double>>();
      curve.degenerate = j.value("degenerate", false);
      bank.fitted.push_back(j.value("fitted", true));
      bank.curves.push_back(std::move(curve));
    }
  } catch (const json::exception& e) {
    throw CalibrationError("bad bank file " + path.string() + ": " + e.what());
  }
  if (bank.curves.empty()) throw CalibrationError("bank has no curves");
  return bank;
}

}  // namespace chesslab
