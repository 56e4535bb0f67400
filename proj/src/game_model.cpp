#include "chesslab/game_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "chesslab/chess.hpp"
#include "chesslab/util.hpp"

namespace chesslab {

using nlohmann::json;

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kCheckmate: return "checkmate";
    case Termination::kDrawRule: return "draw-rule";
    case Termination::kResignationProxy: return "resignation-proxy";
    case Termination::kHorizon: return "horizon";
  }
  return "draw-rule";
}

std::optional<Termination> termination_from_string(std::string_view s) {
  if (s == "checkmate") return Termination::kCheckmate;
  if (s == "draw-rule") return Termination::kDrawRule;
  if (s == "resignation-proxy") return Termination::kResignationProxy;
  if (s == "horizon") return Termination::kHorizon;
  return std::nullopt;
}

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kD0: return "d0";
    case DatasetKind::kDI: return "di";
    case DatasetKind::kHumanPgn: return "human-pgn";
    case DatasetKind::kPlay: return "play";
  }
  return "d0";
}

std::optional<DatasetKind> dataset_kind_from_string(std::string_view s) {
  if (s == "d0") return DatasetKind::kD0;
  if (s == "di") return DatasetKind::kDI;
  if (s == "human-pgn") return DatasetKind::kHumanPgn;
  if (s == "play") return DatasetKind::kPlay;
  return std::nullopt;
}

void validate_record(const GameRecord& record, DatasetKind kind, std::optional<int> budget) {
  if (record.result != 0.0 && record.result != 0.5 && record.result != 1.0)
    throw DataError("result must be 0, 0.5 or 1");
  if (record.termination == Termination::kCheckmate && record.result == 0.5)
    throw DataError("checkmate cannot be a draw");
  if (record.termination == Termination::kDrawRule && record.result != 0.5)
    throw DataError("draw-rule termination requires result 0.5");

  int last_t = 0, last_ordinal = 0;
  int fired_count = 0;
  for (const auto& iv : record.interventions) {
    if (iv.t <= last_t && iv.fired)
      throw DataError("interventions must be sorted by move number and distinct");
    if (iv.fired && iv.ordinal <= last_ordinal)
      throw DataError("intervention ordinals must increase with move number");
    if (iv.fired) {
      last_t = iv.t;
      last_ordinal = iv.ordinal;
      ++fired_count;
    }
  }
  if (budget && static_cast<int>(fired_count) > *budget)
    throw DataError("fired interventions exceed budget");

  switch (kind) {
    case DatasetKind::kD0:
      if (!record.interventions.empty())
        throw DataError("D0 records must have zero interventions");
      break;
    case DatasetKind::kDI:
      if (record.interventions.size() != 1)
        throw DataError("DI records must have exactly one intervention");
      break;
    case DatasetKind::kHumanPgn:
      if (!record.interventions.empty())
        throw DataError("human games cannot carry interventions");
      break;
    case DatasetKind::kPlay:
      break;  // any intervention count up to the budget, checked above
  }

  int prev_t = 0;
  for (const auto& p : record.points) {
    if (p.t <= prev_t) throw DataError("points must be ordered by move number");
    prev_t = p.t;
    if (p.gap && p.pw && p.ps) {
      double want = std::max(0.0, *p.ps - *p.pw);
      if (std::abs(*p.gap - want) > 1e-9) throw DataError("gap != max(0, ps - pw)");
    }
  }
}

namespace {

json point_to_json(const MovePoint& p) {
  json j;
  j["t"] = p.t;
  if (p.pw_raw) j["pw_raw"] = *p.pw_raw;
  if (p.ps_raw) j["ps_raw"] = *p.ps_raw;
  if (p.pw) j["pw"] = *p.pw;
  if (p.ps) j["ps"] = *p.ps;
  if (p.gap) j["gap"] = *p.gap;
  if (!p.weak_move.empty()) j["weak_move"] = p.weak_move;
  if (!p.strong_move.empty()) j["strong_move"] = p.strong_move;
  return j;
}

MovePoint point_from_json(const json& j) {
  MovePoint p;
  p.t = j.at("t").get<int>();
  if (j.contains("pw_raw")) p.pw_raw = j["pw_raw"].get<double>();
  if (j.contains("ps_raw")) p.ps_raw = j["ps_raw"].get<double>();
  if (j.contains("pw")) p.pw = j["pw"].get<double>();
  if (j.contains("ps")) p.ps = j["ps"].get<double>();
  if (j.contains("gap")) p.gap = j["gap"].get<double>();
  if (j.contains("weak_move")) p.weak_move = j["weak_move"].get<std::string>();
  if (j.contains("strong_move")) p.strong_move = j["strong_move"].get<std::string>();
  return p;
}

json record_to_json(const GameRecord& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["game_id"] = r.game_id;
  j["white_elo"] = r.white_elo;
  j["black_elo"] = r.black_elo;
  j["oracle_elo"] = r.oracle_elo;
  j["moves"] = r.moves;
  json points = json::array();
  for (const auto& p : r.points) points.push_back(point_to_json(p));
  j["points"] = std::move(points);
  json ivs = json::array();
  for (const auto& iv : r.interventions) {
    ivs.push_back(json{{"k", iv.ordinal},
                       {"t", iv.t},
                       {"d", iv.gap},
                       {"policy_tag", iv.policy_tag},
                       {"fired", iv.fired}});
  }
  j["interventions"] = std::move(ivs);
  j["result"] = r.result;
  j["termination"] = to_string(r.termination);
  return j;
}

GameRecord record_from_json(const json& j) {
  GameRecord r;
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw DataError("record schema version mismatch");
  r.game_id = j.at("game_id").get<std::string>();
  r.white_elo = j.value("white_elo", 0);
  r.black_elo = j.value("black_elo", 0);
  r.oracle_elo = j.value("oracle_elo", 0);
  r.moves = j.value("moves", std::vector<std::string>{});
  for (const auto& pj : j.at("points")) r.points.push_back(point_from_json(pj));
  for (const auto& ij : j.at("interventions")) {
    InterventionEvent iv;
    iv.ordinal = ij.at("k").get<int>();
    iv.t = ij.at("t").get<int>();
    iv.gap = ij.at("d").get<double>();
    iv.policy_tag = ij.value("policy_tag", "");
    iv.fired = ij.value("fired", true);
    r.interventions.push_back(iv);
  }
  r.result = j.at("result").get<double>();
  auto term = termination_from_string(j.at("termination").get<std::string>());
  if (!term) throw DataError("unknown termination: " + j["termination"].get<std::string>());
  r.termination = *term;
  return r;
}

}  // namespace

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::string out;
  json header;
  header["schema_version"] = kSchemaVersion;
  header["kind"] = to_string(dataset.kind);
  header["source_meta"] = dataset.source_meta;
  out += header.dump();
  out += '\n';
  for (const auto& r : dataset.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

Dataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file (missing header): " + path.string());

  Dataset ds;
  try {
    json header = json::parse(line);
    if (header.at("schema_version").get<int>() != kSchemaVersion)
      throw DataError("schema version mismatch in " + path.string());
    auto kind = dataset_kind_from_string(header.at("kind").get<std::string>());
    if (!kind) throw DataError("unknown dataset kind");
    ds.kind = *kind;
    ds.source_meta = header.value("source_meta", std::map<std::string, std::string>{});
  } catch (const json::exception& e) {
    throw DataError(path.string() + ":1: bad header: " + e.what());
  }

  std::optional<int> budget;
  if (auto it = ds.source_meta.find("budget"); it != ds.source_meta.end())
    budget = std::atoi(it->second.c_str());

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      GameRecord r = record_from_json(json::parse(line));
      validate_record(r, ds.kind, budget);
      ds.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

namespace {

// One PGN game: tag pairs plus flattened movetext tokens.
struct RawPgnGame {
  std::map<std::string, std::string> tags;
  std::vector<std::string> san_moves;
  std::string result_token;
  bool movetext_ok = true;
};

class PgnReader {
 public:
  explicit PgnReader(std::istream& in) : in_(in) {}

  // Returns the next game, or nullopt at end of input.
  std::optional<RawPgnGame> next() {
    RawPgnGame game;
    bool saw_anything = false;
    std::string line;

    // Tag section.
    while (true) {
      if (!peek_line(line)) return saw_anything ? std::optional(game) : std::nullopt;
      std::string trimmed = trim(line);
      if (trimmed.empty()) {
        consume_line();
        if (saw_anything) break;  // blank line after tags
        continue;
      }
      if (trimmed[0] != '[') break;
      consume_line();
      saw_anything = true;
      parse_tag(trimmed, game);
    }

    // Movetext: token stream until a result token at nesting depth 0.
    int paren_depth = 0;
    bool in_brace = false;
    while (peek_line(line)) {
      std::string trimmed = trim(line);
      if (!in_brace && paren_depth == 0 && !trimmed.empty() && trimmed[0] == '[' &&
          !game.san_moves.empty()) {
        break;  // next game's tags; this movetext had no result token
      }
      consume_line();
      saw_anything = true;
      std::istringstream toks(trimmed);
      std::string tok;
      while (next_token(toks, tok, in_brace, paren_depth)) {
        if (is_result_token(tok)) {
          game.result_token = tok;
          return game;
        }
        if (!tok.empty()) game.san_moves.push_back(tok);
      }
    }
    if (!saw_anything) return std::nullopt;
    return game;
  }

 private:
  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static void parse_tag(const std::string& line, RawPgnGame& game) {
    size_t name_end = line.find(' ');
    size_t q1 = line.find('"');
    size_t q2 = line.rfind('"');
    if (name_end == std::string::npos || q1 == std::string::npos || q2 <= q1) return;
    std::string name = line.substr(1, name_end - 1);
    game.tags[name] = line.substr(q1 + 1, q2 - q1 - 1);
  }

  static bool is_result_token(const std::string& t) {
    return t == "1-0" || t == "0-1" || t == "1/2-1/2" || t == "*";
  }

  // Pulls the next SAN-ish token, skipping comments, variations, NAGs and
  // move numbers. Returns false at end of the line.
  static bool next_token(std::istringstream& in, std::string& out, bool& in_brace,
                         int& paren_depth) {
    std::string raw;
    while (in >> raw) {
      std::string cleaned;
      for (size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (in_brace) {
          if (c == '}') in_brace = false;
          continue;
        }
        if (c == '{') {
          in_brace = true;
          continue;
        }
        if (c == '(') {
          ++paren_depth;
          continue;
        }
        if (c == ')') {
          if (paren_depth > 0) --paren_depth;
          continue;
        }
        if (paren_depth > 0) continue;
        if (c == ';') {  // rest-of-line comment
          in.str("");
          in.clear(std::ios::eofbit);
          break;
        }
        cleaned += c;
      }
      if (cleaned.empty()) continue;
      if (cleaned[0] == '$') continue;       // NAG
      if (cleaned == "e.p." || cleaned == "ep") continue;  // old-style suffix
      if (is_result_token(cleaned)) {
        out = cleaned;
        return true;
      }
      // Strip leading move numbers: "12.", "12...", possibly fused "12.e4".
      size_t i = 0;
      while (i < cleaned.size() && std::isdigit(static_cast<unsigned char>(cleaned[i]))) ++i;
      if (i > 0 && i < cleaned.size() && cleaned[i] == '.') {
        while (i < cleaned.size() && cleaned[i] == '.') ++i;
        cleaned = cleaned.substr(i);
        if (cleaned.empty()) continue;
      } else if (i == cleaned.size()) {
        continue;  // bare number
      }
      out = cleaned;
      return true;
    }
    return false;
  }

  bool peek_line(std::string& out) {
    if (pending_) {
      out = *pending_;
      return true;
    }
    std::string line;
    if (!std::getline(in_, line)) return false;
    pending_ = line;
    out = line;
    return true;
  }

  void consume_line() { pending_.reset(); }

  std::istream& in_;
  std::optional<std::string> pending_;
};

}  // namespace

Dataset parse_pgn(const std::filesystem::path& path, const PgnFilters& filters,
                  PgnStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open PGN: " + path.string());

  Dataset ds;
  ds.kind = DatasetKind::kHumanPgn;
  ds.source_meta["source"] = path.string();
  PgnStats local;
  PgnStats& st = stats ? *stats : local;

  PgnReader reader(in);
  int index = 0;
  while (auto game = reader.next()) {
    ++index;
    std::optional<double> result;
    if (game->result_token == "1-0") result = 1.0;
    else if (game->result_token == "0-1") result = 0.0;
    else if (game->result_token == "1/2-1/2") result = 0.5;
    if (!result && filters.require_result) {
      ++st.skipped_no_result;
      continue;
    }

    auto elo_of = [&game](const char* tag) -> std::optional<int> {
      auto it = game->tags.find(tag);
      if (it == game->tags.end() || it->second.empty()) return std::nullopt;
      return std::atoi(it->second.c_str());
    };
    auto white_elo = elo_of("WhiteElo");
    auto black_elo = elo_of("BlackElo");
    if (filters.min_elo || filters.max_elo) {
      if (!white_elo || !black_elo) {
        ++st.skipped_filtered;
        continue;
      }
      int lo = std::min(*white_elo, *black_elo), hi = std::max(*white_elo, *black_elo);
      if ((filters.min_elo && lo < *filters.min_elo) ||
          (filters.max_elo && hi > *filters.max_elo)) {
        ++st.skipped_filtered;
        continue;
      }
    }

    // Legal replay converts SAN to coordinate notation and rejects bad games.
    Game replay;
    GameRecord record;
    bool ok = true;
    for (const auto& san : game->san_moves) {
      auto m = parse_san(replay.pos(), san);
      if (!m || !replay.play(*m)) {
        ok = false;
        break;
      }
    }
    if (!ok || game->san_moves.empty()) {
      ++st.skipped_unparseable;
      continue;
    }

    record.game_id = path.stem().string() + "#" + std::to_string(index);
    record.white_elo = white_elo.value_or(0);
    record.black_elo = black_elo.value_or(0);
    record.moves = replay.uci_moves();
    for (int ply = 0; ply < static_cast<int>(record.moves.size()); ply += 2) {
      MovePoint p;
      p.t = ply / 2 + 1;
      p.weak_move = record.moves[static_cast<size_t>(ply)];
      record.points.push_back(std::move(p));
    }
    record.result = result.value_or(0.5);
    if (replay.status() == BoardStatus::kCheckmate) record.termination = Termination::kCheckmate;
    else if (record.result == 0.5) record.termination = Termination::kDrawRule;
    else record.termination = Termination::kResignationProxy;

    // A mate on the board must agree with the result tag; otherwise the
    // movetext does not describe the tagged game.
    if (record.termination == Termination::kCheckmate) {
      double mate_result = replay.result();
      if (result && *result != mate_result) {
        ++st.skipped_unparseable;
        continue;
      }
      record.result = mate_result;
    }

    validate_record(record, DatasetKind::kHumanPgn);
    ds.records.push_back(std::move(record));
    ++st.accepted;
  }
  ds.source_meta["accepted"] = std::to_string(st.accepted);
  return ds;
}

AnnotateResult annotate(Dataset& dataset, EngineSession& weak, EngineSession& strong,
                        int samples_per_move, int resume_from) {
  if (samples_per_move < 1) throw DataError("samples_per_move must be >= 1");
  AnnotateResult result;
  result.completed_games = resume_from;
  for (size_t gi = static_cast<size_t>(resume_from); gi < dataset.records.size(); ++gi) {
    GameRecord& record = dataset.records[gi];
    try {
      weak.new_game();
      strong.new_game();
      for (MovePoint& point : record.points) {
        std::vector<std::string> prefix(record.moves.begin(),
                                        record.moves.begin() + 2 * (point.t - 1));
        double weak_sum = 0.0, strong_sum = 0.0;
        for (const auto& s : weak.sample_moves(prefix, samples_per_move))
          weak_sum += s.score_raw;
        for (const auto& s : strong.sample_moves(prefix, samples_per_move))
          strong_sum += s.score_raw;
        point.pw_raw = weak_sum / samples_per_move;
        point.ps_raw = strong_sum / samples_per_move;
        point.pw.reset();
        point.ps.reset();
        point.gap.reset();
      }
    } catch (const EngineError& e) {
      result.error = e.what();
      return result;
    }
    result.completed_games = static_cast<int>(gi) + 1;
  }
  return result;
}

}  // namespace chesslab
