#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chesslab {

// Minimal rules-complete chess model: mailbox board, legal move generation,
// SAN and UCI move parsing, and draw adjudication. This backs PGN ingestion,
// game-loop termination checks and the bundled sparring engine; it is not a
// performance-tuned move generator.

enum Piece : int8_t {
  kNone = 0,
  kPawn = 1,
  kKnight = 2,
  kBishop = 3,
  kRook = 4,
  kQueen = 5,
  kKing = 6,
};

enum class Color : int8_t { kWhite = 0, kBlack = 1 };

inline Color opposite(Color c) { return c == Color::kWhite ? Color::kBlack : Color::kWhite; }

inline int file_of(int sq) { return sq & 7; }
inline int rank_of(int sq) { return sq >> 3; }
inline int make_square(int file, int rank) { return rank * 8 + file; }

struct Move {
  int8_t from = -1;
  int8_t to = -1;
  int8_t promo = kNone;  // piece promoted to, kNone otherwise
  bool operator==(const Move&) const = default;
};

std::string to_uci(const Move& m);
std::optional<Move> move_from_uci(std::string_view s);

class Position {
 public:
  Position();  // standard start position

  static std::optional<Position> from_fen(std::string_view fen);
  std::string fen() const;

  Color side_to_move() const { return stm_; }
  int halfmove_clock() const { return halfmove_clock_; }
  int fullmove_number() const { return fullmove_; }
  // Signed piece code: positive white, negative black, 0 empty.
  int8_t piece_at(int sq) const { return board_[sq]; }

  std::vector<Move> legal_moves() const;
  bool is_legal(const Move& m) const;
  bool in_check() const;
  bool insufficient_material() const;

  // Generation without the legality filter, for search loops that validate
  // lazily: after make_move, the mover's king must not be attacked.
  void pseudo_moves_into(std::vector<Move>& out) const { pseudo_moves(out); }
  bool king_attacked(Color c) const;

  // Applies a legal move; behavior is undefined for illegal input.
  void make_move(const Move& m);

  // Zobrist-style key over board, side to move, castling rights and the
  // en-passant file; used for repetition detection.
  uint64_t key() const;

 private:
  friend std::optional<Move> parse_san(const Position&, std::string_view);

  bool square_attacked(int sq, Color by) const;
  int king_square(Color c) const;
  void pseudo_moves(std::vector<Move>& out) const;
  bool leaves_king_in_check(const Move& m) const;

  std::array<int8_t, 64> board_{};
  Color stm_ = Color::kWhite;
  uint8_t castling_ = 0;  // 1=WK 2=WQ 4=BK 8=BQ
  int8_t ep_square_ = -1;
  int halfmove_clock_ = 0;
  int fullmove_ = 1;
};

// Parses standard algebraic notation against the legal moves of `pos`.
// Returns nullopt when no legal move matches (or the match is ambiguous).
std::optional<Move> parse_san(const Position& pos, std::string_view san);

enum class BoardStatus : uint8_t {
  kOngoing,
  kCheckmate,     // side to move is mated
  kStalemate,
  kThreefold,
  kFiftyMove,
  kInsufficient,
};

// A position plus its move history; tracks keys for repetition and exposes
// the local draw adjudication the engines themselves do not announce.
class Game {
 public:
  Game();

  const Position& pos() const { return pos_; }
  const std::vector<std::string>& uci_moves() const { return moves_; }
  int plies() const { return static_cast<int>(moves_.size()); }
  // Number of White moves already played.
  int white_moves_played() const { return (plies() + 1) / 2; }

  // Applies a move; returns false (game unchanged) if it is not legal.
  bool play_uci(std::string_view uci);
  bool play(const Move& m);

  BoardStatus status() const;
  bool over() const { return status() != BoardStatus::kOngoing; }
  // 1 / 0.5 / 0 from White's point of view; only valid when over().
  double result() const;

 private:
  Position pos_;
  std::vector<std::string> moves_;
  std::vector<uint64_t> keys_;
};

// Node-count move-path enumeration, used to validate the move generator.
uint64_t perft(const Position& pos, int depth);

}  // namespace chesslab
