#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chesslab/engine_bridge.hpp"

namespace chesslab {

inline constexpr int kSchemaVersion = 1;

// Per-White-move evaluation point. Raw values are means of engine samples
// taken from the position before the move; calibrated values appear once a
// calibration bank has been applied.
struct MovePoint {
  int t = 0;  // White move number, 1-based
  std::optional<double> pw_raw;
  std::optional<double> ps_raw;
  std::optional<double> pw;
  std::optional<double> ps;
  std::optional<double> gap;  // max(0, ps - pw)
  std::string weak_move;
  std::string strong_move;
};

struct InterventionEvent {
  int ordinal = 0;  // 1-based assist index k
  int t = 0;        // White move number
  double gap = 0.0;  // d at the decision
  std::string policy_tag;
  bool fired = true;  // false: planned but the game ended first
};

enum class Termination { kCheckmate, kDrawRule, kResignationProxy, kHorizon };

std::string to_string(Termination t);
std::optional<Termination> termination_from_string(std::string_view s);

struct GameRecord {
  std::string game_id;
  int white_elo = 0;
  int black_elo = 0;
  int oracle_elo = 0;
  std::vector<std::string> moves;  // coordinate notation, full game
  std::vector<MovePoint> points;   // one per White move, ordered by t
  std::vector<InterventionEvent> interventions;
  double result = 0.5;  // 1 / 0.5 / 0 from White's side
  Termination termination = Termination::kDrawRule;
};

enum class DatasetKind { kD0, kDI, kHumanPgn, kPlay };

std::string to_string(DatasetKind k);
std::optional<DatasetKind> dataset_kind_from_string(std::string_view s);

struct Dataset {
  DatasetKind kind = DatasetKind::kD0;
  std::vector<GameRecord> records;
  std::map<std::string, std::string> source_meta;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checks per-record invariants (intervention ordering/counts per kind,
// result-vs-termination consistency, gap consistency). Throws DataError.
void validate_record(const GameRecord& record, DatasetKind kind,
                     std::optional<int> budget = std::nullopt);

// JSONL persistence: one header line with dataset metadata, one line per
// record. read(write(x)) == x field for field; reads are validated and a
// bad line is reported with its line number.
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_jsonl(const std::filesystem::path& path);

struct PgnFilters {
  std::optional<int> min_elo;
  std::optional<int> max_elo;
  bool require_result = true;
};

struct PgnStats {
  int accepted = 0;
  int skipped_unparseable = 0;
  int skipped_no_result = 0;
  int skipped_filtered = 0;
};

// Ingests a (possibly multi-game) PGN file into Dataset(kind=human-pgn).
// Standard algebraic movetext is converted to coordinate notation by legal
// replay; games with unparseable or illegal movetext are skipped and counted.
Dataset parse_pgn(const std::filesystem::path& path, const PgnFilters& filters,
                  PgnStats* stats = nullptr);

struct AnnotateResult {
  int completed_games = 0;            // resume cursor on failure
  std::optional<std::string> error;  // engine failure message, if any
};

// Fills pw_raw / ps_raw on every point by sampling both engines from the
// position before each White move. Overwrites previous values and clears
// stale calibrated fields. On engine failure the dataset keeps all fully
// annotated games and the result carries the resume cursor.
AnnotateResult annotate(Dataset& dataset, EngineSession& weak, EngineSession& strong,
                        int samples_per_move, int resume_from = 0);

}  // namespace chesslab
