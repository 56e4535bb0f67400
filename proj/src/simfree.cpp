#include "chesslab/simfree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"

#include "chesslab/util.hpp"

namespace chesslab {

size_t MoveBank::total_pairs() const {
  size_t n = 0;
  for (const auto& bank : pairs) n += bank.size();
  return n;
}

MoveBank build_banks(const Dataset& d0, int horizon) {
  if (d0.records.empty()) throw SimError("cannot build banks from an empty dataset");
  MoveBank banks;
  banks.horizon = horizon;
  banks.pairs.resize(static_cast<size_t>(horizon));
  double sum = 0.0;
  for (const auto& record : d0.records) {
    sum += record.result;
    for (const auto& point : record.points) {
      if (!point.pw || !point.ps) throw SimError("banks need calibrated points");
      if (point.t < 1 || point.t > horizon) continue;
      banks.pairs[static_cast<size_t>(point.t - 1)].emplace_back(*point.pw, *point.ps);
    }
  }
  banks.baseline_mean = sum / static_cast<double>(d0.records.size());
  return banks;
}

void save_banks(const MoveBank& banks, const std::filesystem::path& path) {
  using nlohmann::json;
  std::string out;
  json header{{"schema_version", kSchemaVersion},
              {"horizon", banks.horizon},
              {"baseline_mean", banks.baseline_mean}};
  out += header.dump();
  out += '\n';
  for (int t = 1; t <= banks.horizon; ++t) {
    const auto& bank = banks.at(t);
    if (bank.empty()) continue;
    json row;
    row["t"] = t;
    json pairs = json::array();
    for (auto [pw, ps] : bank) pairs.push_back(json::array({pw, ps}));
    row["pairs"] = std::move(pairs);
    out += row.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

MoveBank load_banks(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw SimError("cannot open banks: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SimError("empty banks file");
  MoveBank banks;
  try {
    json header = json::parse(line);
    if (header.at("schema_version").get<int>() != kSchemaVersion)
      throw SimError("banks schema version mismatch");
    banks.horizon = header.at("horizon").get<int>();
    banks.baseline_mean = header.at("baseline_mean").get<double>();
    banks.pairs.resize(static_cast<size_t>(banks.horizon));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json row = json::parse(line);
      int t = row.at("t").get<int>();
      if (t < 1 || t > banks.horizon) throw SimError("bank row out of range");
      for (const auto& pair : row.at("pairs"))
        banks.pairs[static_cast<size_t>(t - 1)].emplace_back(pair.at(0).get<double>(),
                                                             pair.at(1).get<double>());
    }
  } catch (const json::exception& e) {
    throw SimError("bad banks file " + path.string() + ": " + e.what());
  }
  return banks;
}

void save_uplift(const UpliftTable& table, const std::filesystem::path& path) {
  using nlohmann::json;
  std::string out;
  json header{{"schema_version", kSchemaVersion},
              {"bin_width", table.bin_width},
              {"horizon", table.horizon},
              {"grid_size", table.grid_size}};
  out += header.dump();
  out += '\n';
  for (size_t b = 0; b < table.delta.size(); ++b) {
    json row;
    row["bin"] = b;
    row["mu1"] = table.mu1[b];
    row["mu0"] = table.mu0[b];
    row["delta"] = table.delta[b];
    row["populated"] = static_cast<bool>(table.populated[b]);
    row["count1"] = table.count1[b];
    row["count0"] = table.count0[b];
    out += row.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

UpliftTable load_uplift(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw SimError("cannot open uplift table: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SimError("empty uplift file");
  UpliftTable table;
  try {
    json header = json::parse(line);
    if (header.at("schema_version").get<int>() != kSchemaVersion)
      throw SimError("uplift schema version mismatch");
    table.bin_width = header.at("bin_width").get<int>();
    table.horizon = header.at("horizon").get<int>();
    table.grid_size = header.at("grid_size").get<int>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json row = json::parse(line);
      table.mu1.push_back(row.at("mu1").get<std::vector<double>>());
      table.mu0.push_back(row.at("mu0").get<std::vector<double>>());
      table.delta.push_back(row.at("delta").get<std::vector<double>>());
      table.populated.push_back(row.at("populated").get<bool>());
      table.count1.push_back(row.at("count1").get<std::vector<long>>());
      table.count0.push_back(row.at("count0").get<std::vector<long>>());
    }
  } catch (const json::exception& e) {
    throw SimError("bad uplift file " + path.string() + ": " + e.what());
  }
  if (table.delta.empty()) throw SimError("uplift table has no bins");
  return table;
}

int UpliftTable::bin_of(int t) const {
  int bins = static_cast<int>(delta.size());
  return std::clamp((t - 1) / bin_width, 0, bins - 1);
}

double UpliftTable::lookup(int t, double d) const {
  const auto& row = delta[static_cast<size_t>(bin_of(t))];
  double x = clamp01(d) * static_cast<double>(grid_size - 1);
  int lo = std::min(static_cast<int>(x), grid_size - 2);
  double frac = x - lo;
  return row[static_cast<size_t>(lo)] * (1.0 - frac) + row[static_cast<size_t>(lo + 1)] * frac;
}

namespace {

// Isotonic fits are unreliable in their terminal blocks when those blocks
// pool only a handful of points (the leftmost block is a min-prefix mean,
// the rightmost a max-suffix mean). Merge underweight tail blocks into
// their neighbors before tabulating; monotonicity is preserved.
void merge_light_tails(IsotonicCurve* curve, const std::vector<CalibrationPair>& pairs,
                       double min_weight) {
  size_t blocks = curve->breakpoints.size();
  if (blocks < 2) return;
  std::vector<double> weight(blocks, 0.0);
  std::vector<double> sum(blocks, 0.0);
  for (const auto& p : pairs) {
    auto it = std::upper_bound(curve->breakpoints.begin(), curve->breakpoints.end(), p.alpha);
    size_t idx = it == curve->breakpoints.begin()
                     ? 0
                     : static_cast<size_t>(it - curve->breakpoints.begin()) - 1;
    weight[idx] += 1.0;
    sum[idx] += p.score;
  }
  std::vector<double> bp(curve->breakpoints);
  std::vector<double> w(weight), sm(sum);
  // Left tail.
  size_t lo = 0;
  while (lo + 1 < bp.size() && w[lo] < min_weight) {
    w[lo + 1] += w[lo];
    sm[lo + 1] += sm[lo];
    bp[lo + 1] = bp[lo];
    bp.erase(bp.begin() + static_cast<long>(lo));
    w.erase(w.begin() + static_cast<long>(lo));
    sm.erase(sm.begin() + static_cast<long>(lo));
  }
  // Right tail.
  while (bp.size() >= 2 && w.back() < min_weight) {
    w[w.size() - 2] += w.back();
    sm[sm.size() - 2] += sm.back();
    bp.pop_back();
    w.pop_back();
    sm.pop_back();
  }
  curve->breakpoints = bp;
  curve->values.resize(bp.size());
  for (size_t i = 0; i < bp.size(); ++i)
    curve->values[i] = w[i] > 0.0 ? sm[i] / w[i] : curve->values[i];
  // Re-pool any violation the merges introduced.
  for (size_t i = 0; i + 1 < curve->values.size();) {
    if (curve->values[i] > curve->values[i + 1]) {
      double merged_w = w[i] + w[i + 1];
      double merged_v = (sm[i] + sm[i + 1]) / merged_w;
      w[i] = merged_w;
      sm[i] = sm[i] + sm[i + 1];
      curve->values[i] = merged_v;
      curve->breakpoints.erase(curve->breakpoints.begin() + static_cast<long>(i) + 1);
      curve->values.erase(curve->values.begin() + static_cast<long>(i) + 1);
      w.erase(w.begin() + static_cast<long>(i) + 1);
      sm.erase(sm.begin() + static_cast<long>(i) + 1);
      if (i > 0) --i;
    } else {
      ++i;
    }
  }
}

}  // namespace

UpliftTable fit_uplift(const Dataset& d0, const Dataset& di, int bin_width, int d_grid_size,
                       int horizon) {
  if (bin_width < 1 || d_grid_size < 2) throw SimError("bad uplift table shape");
  UpliftTable table;
  table.bin_width = bin_width;
  table.horizon = horizon;
  table.grid_size = d_grid_size;
  int bins = (horizon + bin_width - 1) / bin_width;

  // mu0 pairs: every D0 point, keyed by its gap. mu1 pairs: the fired DI
  // intervention (d at t*, Y).
  std::vector<std::vector<CalibrationPair>> pairs0(static_cast<size_t>(bins));
  std::vector<std::vector<CalibrationPair>> pairs1(static_cast<size_t>(bins));
  for (const auto& record : d0.records) {
    for (const auto& point : record.points) {
      if (!point.gap) throw SimError("uplift fitting needs calibrated D0 points");
      if (point.t < 1 || point.t > horizon) continue;
      pairs0[static_cast<size_t>((point.t - 1) / bin_width)].push_back(
          CalibrationPair{clamp01(*point.gap), record.result});
    }
  }
  for (const auto& record : di.records) {
    for (const auto& iv : record.interventions) {
      if (!iv.fired) continue;
      if (iv.t < 1 || iv.t > horizon) continue;
      pairs1[static_cast<size_t>((iv.t - 1) / bin_width)].push_back(
          CalibrationPair{clamp01(iv.gap), record.result});
    }
  }

  table.mu1.assign(static_cast<size_t>(bins), std::vector<double>(static_cast<size_t>(d_grid_size), 0.0));
  table.mu0.assign(static_cast<size_t>(bins), std::vector<double>(static_cast<size_t>(d_grid_size), 0.0));
  table.delta.assign(static_cast<size_t>(bins), std::vector<double>(static_cast<size_t>(d_grid_size), 0.0));
  table.populated.assign(static_cast<size_t>(bins), false);
  table.count1.assign(static_cast<size_t>(bins), std::vector<long>(static_cast<size_t>(d_grid_size), 0));
  table.count0.assign(static_cast<size_t>(bins), std::vector<long>(static_cast<size_t>(d_grid_size), 0));

  auto node_of = [d_grid_size](double d) {
    return static_cast<size_t>(std::lround(clamp01(d) * (d_grid_size - 1)));
  };
  for (int b = 0; b < bins; ++b) {
    for (const auto& p : pairs0[static_cast<size_t>(b)])
      ++table.count0[static_cast<size_t>(b)][node_of(p.alpha)];
    for (const auto& p : pairs1[static_cast<size_t>(b)])
      ++table.count1[static_cast<size_t>(b)][node_of(p.alpha)];
  }

  for (int b = 0; b < bins; ++b) {
    auto& p0 = pairs0[static_cast<size_t>(b)];
    auto& p1 = pairs1[static_cast<size_t>(b)];
    if (p0.size() < 2 || p1.size() < 2) continue;  // flagged unpopulated, delta stays 0

    IsotonicCurve c0 = fit_isotonic(p0);
    IsotonicCurve c1 = fit_isotonic(p1);
    merge_light_tails(&c0, p0, 50.0);
    merge_light_tails(&c1, p1, 50.0);
    for (int g = 0; g < d_grid_size; ++g) {
      double d = static_cast<double>(g) / (d_grid_size - 1);
      double m1 = c1.eval(d), m0 = c0.eval(d);
      table.mu1[static_cast<size_t>(b)][static_cast<size_t>(g)] = m1;
      table.mu0[static_cast<size_t>(b)][static_cast<size_t>(g)] = m0;
      table.delta[static_cast<size_t>(b)][static_cast<size_t>(g)] =
          std::clamp(m1 - m0, -1.0, 1.0);
    }
    table.populated[static_cast<size_t>(b)] = true;
  }
  return table;
}

bool UpliftTable::cell_populated(int bin, int node, long min_count) const {
  if (!populated[static_cast<size_t>(bin)]) return false;
  // Data within one grid step on either side counts as support.
  long c1 = 0, c0 = 0;
  for (int g = std::max(0, node - 1); g <= std::min(grid_size - 1, node + 1); ++g) {
    c1 += count1[static_cast<size_t>(bin)][static_cast<size_t>(g)];
    c0 += count0[static_cast<size_t>(bin)][static_cast<size_t>(g)];
  }
  return c1 >= min_count && c0 >= min_count;
}

SimResult simulate_game(const MoveBank& banks, const UpliftTable& uplift,
                        const std::vector<double>& thresholds, const SimConfig& config,
                        std::mt19937_64& rng) {
  int budget = static_cast<int>(thresholds.size());
  SimResult result;
  result.v = banks.baseline_mean;
  int horizon = std::min(config.horizon, banks.horizon);
  int assists = 0;
  for (int t = 1; t <= horizon; ++t) {
    const auto& bank = banks.at(t);
    if (bank.empty()) break;  // no logged game reached this move
    size_t pick = bank.size() == 1
                      ? 0
                      : std::uniform_int_distribution<size_t>(0, bank.size() - 1)(rng);
    auto [pw, ps] = bank[pick];
    double d = std::max(0.0, ps - pw);
    if (assists < budget && d >= thresholds[static_cast<size_t>(assists)]) {
      result.events.push_back(SimEvent{assists + 1, t, d});
      ++assists;
    }
  }
  for (const SimEvent& ev : result.events) {
    double scale = static_cast<size_t>(ev.k - 1) < config.uplift_scales.size()
                       ? config.uplift_scales[static_cast<size_t>(ev.k - 1)]
                       : 1.0;
    result.v = clamp01(result.v + scale * uplift.lookup(ev.t, ev.d));
  }
  return result;
}

SimReport avg_score(const MoveBank& banks, const UpliftTable& uplift,
                    const std::vector<double>& thresholds, const SimConfig& config) {
  if (config.runs < 1) throw SimError("need at least one run");
  int budget = static_cast<int>(thresholds.size());
  long runs = config.runs;

  // Per-run results live in index order so the reduction below is identical
  // no matter how many workers filled them.
  std::vector<double> values(static_cast<size_t>(runs));
  std::vector<int16_t> fired_move(static_cast<size_t>(runs) * static_cast<size_t>(std::max(1, budget)), -1);

  auto worker = [&](long begin, long end) {
    for (long r = begin; r < end; ++r) {
      std::mt19937_64 rng = derive_rng(config.seed, static_cast<uint64_t>(r));
      SimResult res = simulate_game(banks, uplift, thresholds, config, rng);
      values[static_cast<size_t>(r)] = res.v;
      for (const SimEvent& ev : res.events)
        fired_move[static_cast<size_t>(r) * static_cast<size_t>(std::max(1, budget)) +
                   static_cast<size_t>(ev.k - 1)] = static_cast<int16_t>(ev.t);
    }
  };

  int threads = std::max(1, config.threads);
  if (threads == 1 || runs < 1024) {
    worker(0, runs);
  } else {
    std::vector<std::thread> pool;
    long chunk = (runs + threads - 1) / threads;
    for (int i = 0; i < threads; ++i) {
      long begin = i * chunk, end = std::min(runs, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  SimReport report;
  report.runs = runs;
  report.frac_fired.assign(static_cast<size_t>(budget), 0.0);
  report.avg_move.assign(static_cast<size_t>(budget), 0.0);
  double sum = 0.0;
  std::vector<long> fired_counts(static_cast<size_t>(budget), 0);
  std::vector<double> move_sums(static_cast<size_t>(budget), 0.0);
  for (long r = 0; r < runs; ++r) {
    sum += values[static_cast<size_t>(r)];
    for (int k = 0; k < budget; ++k) {
      int16_t mv = fired_move[static_cast<size_t>(r) * static_cast<size_t>(std::max(1, budget)) +
                              static_cast<size_t>(k)];
      if (mv >= 0) {
        ++fired_counts[static_cast<size_t>(k)];
        move_sums[static_cast<size_t>(k)] += mv;
      }
    }
  }
  report.avg_score = sum / static_cast<double>(runs);
  double sq = 0.0;
  for (long r = 0; r < runs; ++r) {
    double d = values[static_cast<size_t>(r)] - report.avg_score;
    sq += d * d;
  }
  report.stddev = runs > 1 ? std::sqrt(sq / static_cast<double>(runs - 1)) : 0.0;
  for (int k = 0; k < budget; ++k) {
    report.frac_fired[static_cast<size_t>(k)] =
        static_cast<double>(fired_counts[static_cast<size_t>(k)]) / static_cast<double>(runs);
    report.avg_move[static_cast<size_t>(k)] =
        fired_counts[static_cast<size_t>(k)] > 0
            ? move_sums[static_cast<size_t>(k)] / static_cast<double>(fired_counts[static_cast<size_t>(k)])
            : 0.0;
  }
  return report;
}

}  // namespace chesslab
