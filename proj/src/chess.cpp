#include "chesslab/chess.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

#include "chesslab/util.hpp"

namespace chesslab {

namespace {

constexpr int kKnightDelta[8][2] = {{1, 2},  {2, 1},  {2, -1}, {1, -2},
                                    {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2}};
constexpr int kKingDelta[8][2] = {{1, 0},  {1, 1},  {0, 1},  {-1, 1},
                                  {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
constexpr int kBishopDelta[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
constexpr int kRookDelta[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

enum CastleBits : uint8_t { kWK = 1, kWQ = 2, kBK = 4, kBQ = 8 };

struct Zobrist {
  uint64_t piece[13][64];  // index piece code + 6
  uint64_t black_to_move;
  uint64_t castling[16];
  uint64_t ep_file[8];
  Zobrist() {
    uint64_t s = 0x5eed0fcab0a7ULL;
    auto next = [&s]() { return s = splitmix64(s); };
    for (auto& row : piece)
      for (auto& v : row) v = next();
    black_to_move = next();
    for (auto& v : castling) v = next();
    for (auto& v : ep_file) v = next();
  }
};
const Zobrist kZobrist;

inline bool on_board(int file, int rank) {
  return file >= 0 && file < 8 && rank >= 0 && rank < 8;
}

inline Color color_of(int8_t piece) { return piece > 0 ? Color::kWhite : Color::kBlack; }

}  // namespace

std::string to_uci(const Move& m) {
  std::string s;
  s += static_cast<char>('a' + file_of(m.from));
  s += static_cast<char>('1' + rank_of(m.from));
  s += static_cast<char>('a' + file_of(m.to));
  s += static_cast<char>('1' + rank_of(m.to));
  switch (m.promo) {
    case kQueen: s += 'q'; break;
    case kRook: s += 'r'; break;
    case kBishop: s += 'b'; break;
    case kKnight: s += 'n'; break;
    default: break;
  }
  return s;
}

std::optional<Move> move_from_uci(std::string_view s) {
  if (s.size() < 4 || s.size() > 5) return std::nullopt;
  int ff = s[0] - 'a', fr = s[1] - '1', tf = s[2] - 'a', tr = s[3] - '1';
  if (!on_board(ff, fr) || !on_board(tf, tr)) return std::nullopt;
  Move m;
  m.from = static_cast<int8_t>(make_square(ff, fr));
  m.to = static_cast<int8_t>(make_square(tf, tr));
  if (s.size() == 5) {
    switch (std::tolower(s[4])) {
      case 'q': m.promo = kQueen; break;
      case 'r': m.promo = kRook; break;
      case 'b': m.promo = kBishop; break;
      case 'n': m.promo = kKnight; break;
      default: return std::nullopt;
    }
  }
  return m;
}

Position::Position() {
  static constexpr int8_t kBackRank[8] = {kRook, kKnight, kBishop, kQueen,
                                          kKing, kBishop, kKnight, kRook};
  board_.fill(0);
  for (int f = 0; f < 8; ++f) {
    board_[make_square(f, 0)] = kBackRank[f];
    board_[make_square(f, 1)] = kPawn;
    board_[make_square(f, 6)] = static_cast<int8_t>(-kPawn);
    board_[make_square(f, 7)] = static_cast<int8_t>(-kBackRank[f]);
  }
  castling_ = kWK | kWQ | kBK | kBQ;
}

std::optional<Position> Position::from_fen(std::string_view fen) {
  Position pos;
  pos.board_.fill(0);
  pos.castling_ = 0;
  std::istringstream in{std::string(fen)};
  std::string placement, stm, castling, ep;
  int halfmove = 0, fullmove = 1;
  in >> placement >> stm >> castling >> ep;
  if (!in) return std::nullopt;
  if (!(in >> halfmove)) halfmove = 0;
  if (!(in >> fullmove)) fullmove = 1;

  int rank = 7, file = 0;
  for (char c : placement) {
    if (c == '/') {
      if (file != 8 || rank == 0) return std::nullopt;
      --rank;
      file = 0;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      file += c - '0';
      if (file > 8) return std::nullopt;
    } else {
      int8_t piece;
      switch (std::tolower(c)) {
        case 'p': piece = kPawn; break;
        case 'n': piece = kKnight; break;
        case 'b': piece = kBishop; break;
        case 'r': piece = kRook; break;
        case 'q': piece = kQueen; break;
        case 'k': piece = kKing; break;
        default: return std::nullopt;
      }
      if (file > 7) return std::nullopt;
      pos.board_[make_square(file, rank)] = std::isupper(static_cast<unsigned char>(c))
                                                ? piece
                                                : static_cast<int8_t>(-piece);
      ++file;
    }
  }
  if (rank != 0 || file != 8) return std::nullopt;

  if (stm == "w") pos.stm_ = Color::kWhite;
  else if (stm == "b") pos.stm_ = Color::kBlack;
  else return std::nullopt;

  if (castling != "-") {
    for (char c : castling) {
      switch (c) {
        case 'K': pos.castling_ |= kWK; break;
        case 'Q': pos.castling_ |= kWQ; break;
        case 'k': pos.castling_ |= kBK; break;
        case 'q': pos.castling_ |= kBQ; break;
        default: return std::nullopt;
      }
    }
  }
  if (ep != "-") {
    if (ep.size() != 2 || ep[0] < 'a' || ep[0] > 'h' || (ep[1] != '3' && ep[1] != '6'))
      return std::nullopt;
    pos.ep_square_ = static_cast<int8_t>(make_square(ep[0] - 'a', ep[1] - '1'));
  } else {
    pos.ep_square_ = -1;
  }
  pos.halfmove_clock_ = halfmove;
  pos.fullmove_ = fullmove;
  return pos;
}

std::string Position::fen() const {
  std::string out;
  for (int rank = 7; rank >= 0; --rank) {
    int empty = 0;
    for (int file = 0; file < 8; ++file) {
      int8_t p = board_[make_square(file, rank)];
      if (p == 0) {
        ++empty;
        continue;
      }
      if (empty > 0) {
        out += static_cast<char>('0' + empty);
        empty = 0;
      }
      static const char* names = " pnbrqk";
      char c = names[std::abs(p)];
      out += p > 0 ? static_cast<char>(std::toupper(c)) : c;
    }
    if (empty > 0) out += static_cast<char>('0' + empty);
    if (rank > 0) out += '/';
  }
  out += stm_ == Color::kWhite ? " w " : " b ";
  if (castling_ == 0) {
    out += '-';
  } else {
    if (castling_ & kWK) out += 'K';
    if (castling_ & kWQ) out += 'Q';
    if (castling_ & kBK) out += 'k';
    if (castling_ & kBQ) out += 'q';
  }
  out += ' ';
  if (ep_square_ >= 0) {
    out += static_cast<char>('a' + file_of(ep_square_));
    out += static_cast<char>('1' + rank_of(ep_square_));
  } else {
    out += '-';
  }
  out += ' ' + std::to_string(halfmove_clock_) + ' ' + std::to_string(fullmove_);
  return out;
}

int Position::king_square(Color c) const {
  int8_t target = c == Color::kWhite ? kKing : -kKing;
  for (int sq = 0; sq < 64; ++sq)
    if (board_[sq] == target) return sq;
  return -1;
}

bool Position::square_attacked(int sq, Color by) const {
  int f = file_of(sq), r = rank_of(sq);
  int sign = by == Color::kWhite ? 1 : -1;

  // Pawns attack diagonally toward the enemy, so look one rank "behind" sq.
  for (int df : {-1, 1}) {
    int pf = f + df, pr = r - sign;
    if (on_board(pf, pr) && board_[make_square(pf, pr)] == sign * kPawn) return true;
  }
  for (auto& d : kKnightDelta) {
    int nf = f + d[0], nr = r + d[1];
    if (on_board(nf, nr) && board_[make_square(nf, nr)] == sign * kKnight) return true;
  }
  for (auto& d : kKingDelta) {
    int nf = f + d[0], nr = r + d[1];
    if (on_board(nf, nr) && board_[make_square(nf, nr)] == sign * kKing) return true;
  }
  for (auto& d : kBishopDelta) {
    int nf = f + d[0], nr = r + d[1];
    while (on_board(nf, nr)) {
      int8_t p = board_[make_square(nf, nr)];
      if (p != 0) {
        if (p == sign * kBishop || p == sign * kQueen) return true;
        break;
      }
      nf += d[0];
      nr += d[1];
    }
  }
  for (auto& d : kRookDelta) {
    int nf = f + d[0], nr = r + d[1];
    while (on_board(nf, nr)) {
      int8_t p = board_[make_square(nf, nr)];
      if (p != 0) {
        if (p == sign * kRook || p == sign * kQueen) return true;
        break;
      }
      nf += d[0];
      nr += d[1];
    }
  }
  return false;
}

bool Position::in_check() const {
  int ksq = king_square(stm_);
  return ksq >= 0 && square_attacked(ksq, opposite(stm_));
}

bool Position::king_attacked(Color c) const {
  int ksq = king_square(c);
  return ksq < 0 || square_attacked(ksq, opposite(c));
}

void Position::pseudo_moves(std::vector<Move>& out) const {
  int sign = stm_ == Color::kWhite ? 1 : -1;
  auto push = [&out](int from, int to, int8_t promo = kNone) {
    out.push_back(Move{static_cast<int8_t>(from), static_cast<int8_t>(to), promo});
  };

  for (int sq = 0; sq < 64; ++sq) {
    int8_t p = board_[sq];
    if (p == 0 || color_of(p) != stm_) continue;
    int f = file_of(sq), r = rank_of(sq);
    switch (std::abs(p)) {
      case kPawn: {
        int fwd = r + sign;
        int promo_rank = stm_ == Color::kWhite ? 7 : 0;
        int start_rank = stm_ == Color::kWhite ? 1 : 6;
        auto push_pawn = [&](int to) {
          if (rank_of(to) == promo_rank) {
            for (int8_t pr : {kQueen, kRook, kBishop, kKnight}) push(sq, to, pr);
          } else {
            push(sq, to);
          }
        };
        if (on_board(f, fwd) && board_[make_square(f, fwd)] == 0) {
          push_pawn(make_square(f, fwd));
          int fwd2 = r + 2 * sign;
          if (r == start_rank && board_[make_square(f, fwd2)] == 0)
            push(sq, make_square(f, fwd2));
        }
        for (int df : {-1, 1}) {
          int cf = f + df;
          if (!on_board(cf, fwd)) continue;
          int to = make_square(cf, fwd);
          int8_t victim = board_[to];
          if (victim != 0 && color_of(victim) != stm_) push_pawn(to);
          else if (to == ep_square_) push(sq, to);
        }
        break;
      }
      case kKnight:
        for (auto& d : kKnightDelta) {
          int nf = f + d[0], nr = r + d[1];
          if (!on_board(nf, nr)) continue;
          int to = make_square(nf, nr);
          if (board_[to] == 0 || color_of(board_[to]) != stm_) push(sq, to);
        }
        break;
      case kBishop:
      case kRook:
      case kQueen: {
        auto slide = [&](const int (*deltas)[2], int n) {
          for (int i = 0; i < n; ++i) {
            int nf = f + deltas[i][0], nr = r + deltas[i][1];
            while (on_board(nf, nr)) {
              int to = make_square(nf, nr);
              if (board_[to] == 0) {
                push(sq, to);
              } else {
                if (color_of(board_[to]) != stm_) push(sq, to);
                break;
              }
              nf += deltas[i][0];
              nr += deltas[i][1];
            }
          }
        };
        if (std::abs(p) != kRook) slide(kBishopDelta, 4);
        if (std::abs(p) != kBishop) slide(kRookDelta, 4);
        break;
      }
      case kKing: {
        for (auto& d : kKingDelta) {
          int nf = f + d[0], nr = r + d[1];
          if (!on_board(nf, nr)) continue;
          int to = make_square(nf, nr);
          if (board_[to] == 0 || color_of(board_[to]) != stm_) push(sq, to);
        }
        // Castling: rights intact, path empty, king not in or through check.
        Color enemy = opposite(stm_);
        int home = stm_ == Color::kWhite ? 0 : 7;
        if (sq == make_square(4, home) && !square_attacked(sq, enemy)) {
          uint8_t kbit = stm_ == Color::kWhite ? kWK : kBK;
          uint8_t qbit = stm_ == Color::kWhite ? kWQ : kBQ;
          if ((castling_ & kbit) && board_[make_square(5, home)] == 0 &&
              board_[make_square(6, home)] == 0 &&
              board_[make_square(7, home)] == sign * kRook &&
              !square_attacked(make_square(5, home), enemy) &&
              !square_attacked(make_square(6, home), enemy)) {
            push(sq, make_square(6, home));
          }
          if ((castling_ & qbit) && board_[make_square(3, home)] == 0 &&
              board_[make_square(2, home)] == 0 && board_[make_square(1, home)] == 0 &&
              board_[make_square(0, home)] == sign * kRook &&
              !square_attacked(make_square(3, home), enemy) &&
              !square_attacked(make_square(2, home), enemy)) {
            push(sq, make_square(2, home));
          }
        }
        break;
      }
      default:
        break;
    }
  }
}

bool Position::leaves_king_in_check(const Move& m) const {
  Position next = *this;
  next.make_move(m);
  int ksq = next.king_square(stm_);
  return ksq < 0 || next.square_attacked(ksq, next.stm_);
}

std::vector<Move> Position::legal_moves() const {
  std::vector<Move> pseudo;
  pseudo.reserve(64);
  pseudo_moves(pseudo);
  std::vector<Move> legal;
  legal.reserve(pseudo.size());
  for (const Move& m : pseudo)
    if (!leaves_king_in_check(m)) legal.push_back(m);
  return legal;
}

bool Position::is_legal(const Move& m) const {
  std::vector<Move> pseudo;
  pseudo_moves(pseudo);
  for (const Move& cand : pseudo)
    if (cand == m) return !leaves_king_in_check(m);
  return false;
}

void Position::make_move(const Move& m) {
  int8_t piece = board_[m.from];
  int8_t captured = board_[m.to];
  int sign = stm_ == Color::kWhite ? 1 : -1;
  bool is_pawn = std::abs(piece) == kPawn;

  // En passant: the captured pawn is not on the destination square.
  if (is_pawn && m.to == ep_square_ && captured == 0) {
    int victim_sq = make_square(file_of(m.to), rank_of(m.to) - sign);
    board_[victim_sq] = 0;
    captured = static_cast<int8_t>(-sign * kPawn);
  }

  board_[m.to] = m.promo != kNone ? static_cast<int8_t>(sign * m.promo) : piece;
  board_[m.from] = 0;

  if (std::abs(piece) == kKing) {
    int home = stm_ == Color::kWhite ? 0 : 7;
    if (m.from == make_square(4, home)) {
      if (m.to == make_square(6, home)) {
        board_[make_square(5, home)] = board_[make_square(7, home)];
        board_[make_square(7, home)] = 0;
      } else if (m.to == make_square(2, home)) {
        board_[make_square(3, home)] = board_[make_square(0, home)];
        board_[make_square(0, home)] = 0;
      }
    }
    castling_ &= stm_ == Color::kWhite ? static_cast<uint8_t>(~(kWK | kWQ))
                                       : static_cast<uint8_t>(~(kBK | kBQ));
  }

  auto drop_rook_right = [this](int sq) {
    if (sq == make_square(0, 0)) castling_ &= static_cast<uint8_t>(~kWQ);
    else if (sq == make_square(7, 0)) castling_ &= static_cast<uint8_t>(~kWK);
    else if (sq == make_square(0, 7)) castling_ &= static_cast<uint8_t>(~kBQ);
    else if (sq == make_square(7, 7)) castling_ &= static_cast<uint8_t>(~kBK);
  };
  drop_rook_right(m.from);
  drop_rook_right(m.to);

  ep_square_ = -1;
  if (is_pawn && std::abs(rank_of(m.to) - rank_of(m.from)) == 2)
    ep_square_ = static_cast<int8_t>(make_square(file_of(m.from), rank_of(m.from) + sign));

  halfmove_clock_ = (is_pawn || captured != 0) ? 0 : halfmove_clock_ + 1;
  if (stm_ == Color::kBlack) ++fullmove_;
  stm_ = opposite(stm_);
}

uint64_t Position::key() const {
  uint64_t h = 0;
  for (int sq = 0; sq < 64; ++sq)
    if (board_[sq] != 0) h ^= kZobrist.piece[board_[sq] + 6][sq];
  if (stm_ == Color::kBlack) h ^= kZobrist.black_to_move;
  h ^= kZobrist.castling[castling_];
  if (ep_square_ >= 0) h ^= kZobrist.ep_file[file_of(ep_square_)];
  return h;
}

bool Position::insufficient_material() const {
  int minor_count = 0;
  int bishop_color_mask = 0;  // bit 0 light squares, bit 1 dark
  for (int sq = 0; sq < 64; ++sq) {
    switch (std::abs(board_[sq])) {
      case kNone:
      case kKing:
        break;
      case kPawn:
      case kRook:
      case kQueen:
        return false;
      case kKnight:
        ++minor_count;
        bishop_color_mask |= 4;  // knight present: only K+N vs K is a dead draw
        break;
      case kBishop:
        ++minor_count;
        bishop_color_mask |= 1 << ((file_of(sq) + rank_of(sq)) & 1);
        break;
    }
  }
  if (minor_count == 0) return true;
  if (minor_count == 1) return true;
  // Bishops only, all on the same square color.
  return bishop_color_mask == 1 || bishop_color_mask == 2;
}

std::optional<Move> parse_san(const Position& pos, std::string_view san) {
  std::string s(san);
  // Strip decorations: checks, mate marks, annotation glyphs, e.p. suffix.
  while (!s.empty() && (s.back() == '+' || s.back() == '#' || s.back() == '!' || s.back() == '?'))
    s.pop_back();
  if (s.size() > 4 && s.compare(s.size() - 4, 4, "e.p.") == 0) s.resize(s.size() - 4);
  while (!s.empty() && s.back() == ' ') s.pop_back();
  if (s.empty()) return std::nullopt;

  std::vector<Move> legal = pos.legal_moves();

  if (s == "O-O" || s == "0-0" || s == "O-O-O" || s == "0-0-0") {
    bool kingside = s == "O-O" || s == "0-0";
    int home = pos.side_to_move() == Color::kWhite ? 0 : 7;
    Move want{static_cast<int8_t>(make_square(4, home)),
              static_cast<int8_t>(make_square(kingside ? 6 : 2, home)), kNone};
    for (const Move& m : legal)
      if (m == want) return m;
    return std::nullopt;
  }

  int8_t promo = kNone;
  if (s.size() >= 2) {
    size_t at = s.size() - 1;
    char pc = s[at];
    if (pc == 'Q' || pc == 'R' || pc == 'B' || pc == 'N') {
      size_t cut = (at >= 1 && s[at - 1] == '=') ? at - 1 : at;
      // Bare trailing piece letter is a promotion only if preceded by a rank-8/1 square.
      if (cut >= 2 && std::isdigit(static_cast<unsigned char>(s[cut - 1]))) {
        switch (pc) {
          case 'Q': promo = kQueen; break;
          case 'R': promo = kRook; break;
          case 'B': promo = kBishop; break;
          case 'N': promo = kKnight; break;
        }
        s.resize(cut);
      }
    }
  }

  if (s.size() < 2) return std::nullopt;
  char tr = s[s.size() - 1], tf = s[s.size() - 2];
  if (tf < 'a' || tf > 'h' || tr < '1' || tr > '8') return std::nullopt;
  int target = make_square(tf - 'a', tr - '1');
  std::string head = s.substr(0, s.size() - 2);

  int8_t piece = kPawn;
  size_t i = 0;
  if (!head.empty()) {
    switch (head[0]) {
      case 'K': piece = kKing; ++i; break;
      case 'Q': piece = kQueen; ++i; break;
      case 'R': piece = kRook; ++i; break;
      case 'B': piece = kBishop; ++i; break;
      case 'N': piece = kKnight; ++i; break;
      default: break;
    }
  }
  int dis_file = -1, dis_rank = -1;
  bool capture = false;
  for (; i < head.size(); ++i) {
    char c = head[i];
    if (c == 'x') capture = true;
    else if (c >= 'a' && c <= 'h') dis_file = c - 'a';
    else if (c >= '1' && c <= '8') dis_rank = c - '1';
    else return std::nullopt;
  }
  // SAN for a plain pawn push carries no file disambiguator; a pawn capture
  // always names the source file.
  if (piece == kPawn && !capture && dis_file == -1) dis_file = file_of(target);

  const Move* found = nullptr;
  for (const Move& m : legal) {
    if (m.to != target) continue;
    if (std::abs(pos.piece_at(m.from)) != piece) continue;
    if (m.promo != promo) continue;
    if (dis_file >= 0 && file_of(m.from) != dis_file) continue;
    if (dis_rank >= 0 && rank_of(m.from) != dis_rank) continue;
    if (found != nullptr) return std::nullopt;  // ambiguous
    found = &m;
  }
  if (found == nullptr) return std::nullopt;
  return *found;
}

Game::Game() { keys_.push_back(pos_.key()); }

bool Game::play(const Move& m) {
  if (!pos_.is_legal(m)) return false;
  moves_.push_back(to_uci(m));
  pos_.make_move(m);
  keys_.push_back(pos_.key());
  return true;
}

bool Game::play_uci(std::string_view uci) {
  auto m = move_from_uci(uci);
  return m && play(*m);
}

BoardStatus Game::status() const {
  if (pos_.legal_moves().empty())
    return pos_.in_check() ? BoardStatus::kCheckmate : BoardStatus::kStalemate;
  if (pos_.halfmove_clock() >= 100) return BoardStatus::kFiftyMove;
  if (pos_.insufficient_material()) return BoardStatus::kInsufficient;
  int repeats = 0;
  uint64_t current = keys_.back();
  for (uint64_t k : keys_)
    if (k == current) ++repeats;
  if (repeats >= 3) return BoardStatus::kThreefold;
  return BoardStatus::kOngoing;
}

double Game::result() const {
  BoardStatus st = status();
  if (st == BoardStatus::kCheckmate)
    return pos_.side_to_move() == Color::kBlack ? 1.0 : 0.0;
  return 0.5;
}

uint64_t perft(const Position& pos, int depth) {
  if (depth == 0) return 1;
  uint64_t nodes = 0;
  for (const Move& m : pos.legal_moves()) {
    if (depth == 1) {
      ++nodes;
    } else {
      Position next = pos;
      next.make_move(m);
      nodes += perft(next, depth - 1);
    }
  }
  return nodes;
}

}  // namespace chesslab
