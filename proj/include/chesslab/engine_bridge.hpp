#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chesslab {

// Win/draw/loss probabilities in per-mille, always from White's point of
// view once it leaves the bridge. Components must sum to exactly 1000.
struct WdlTriple {
  int win = 0;
  int draw = 1000;
  int lose = 0;

  static WdlTriple checked(int win, int draw, int lose);
  double expected_score() const { return (win + 0.5 * draw) / 1000.0; }
  WdlTriple flipped() const { return WdlTriple{lose, draw, win}; }
  bool operator==(const WdlTriple&) const = default;
};

struct SearchLimit {
  enum class Kind { kMoveTime, kDepth };
  Kind kind = Kind::kMoveTime;
  int value = 100;  // milliseconds or plies

  static SearchLimit movetime(int ms) { return {Kind::kMoveTime, ms}; }
  static SearchLimit depth(int plies) { return {Kind::kDepth, plies}; }
};

struct EngineConfig {
  std::filesystem::path executable;
  int elo = 1500;
  bool limit_strength = true;
  bool show_wdl = true;
  SearchLimit limit = SearchLimit::movetime(100);
  int threads = 1;
  std::chrono::milliseconds handshake_timeout{10000};
  // Extra engine-specific options applied verbatim after the standard ones.
  std::vector<std::pair<std::string, std::string>> extra_options;
};

// One best-move query: the move the engine chose and the deepest WDL it
// reported while searching, converted to an expected score in [0,1].
struct MoveSample {
  std::string move_uci;
  WdlTriple wdl;
  double score_raw = 0.5;
};

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single UCI engine child process. Commands are strictly serialized; a
// session may be moved between threads but never shared concurrently.
class EngineSession {
 public:
  EngineSession(EngineSession&&) noexcept;
  EngineSession& operator=(EngineSession&&) noexcept;
  EngineSession(const EngineSession&) = delete;
  EngineSession& operator=(const EngineSession&) = delete;
  ~EngineSession();

  bool alive() const;
  const EngineConfig& config() const;
  const std::string& engine_name() const;

  // Sends `ucinewgame` and waits for the engine to settle.
  void new_game();

  // Evaluates the position reached from the start position by `moves`.
  // Terminal positions (mate/stalemate) are resolved locally with an empty
  // move and an exact WDL; otherwise the engine is queried once.
  MoveSample evaluate(const std::vector<std::string>& moves);

  // `count` independent best-move queries on the same position, order
  // preserved. Each query issues its own `go`.
  std::vector<MoveSample> sample_moves(const std::vector<std::string>& moves, int count);

  // Best effort: sends `quit`, waits briefly, then kills. Never throws.
  void shutdown();

 private:
  friend EngineSession start_engine(const EngineConfig&);
  EngineSession();

  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Spawns the engine process, completes the uci/isready handshake and applies
// all options from `config`. Throws EngineError on spawn failure, handshake
// timeout, or an option the engine cannot honor.
EngineSession start_engine(const EngineConfig& config);

}  // namespace chesslab
