// Self-contained UCI sparring engine. Alpha-beta with quiescence over the
// chesslab board, a material+piece-square evaluation, and ELO-limited play:
// lower UCI_Elo means shallower search and noisier move choice, while the
// reported evaluation stays clean. Speaks enough UCI for the bridge:
// uci/isready/ucinewgame/setoption/position/go/quit, WDL info lines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chesslab/chess.hpp"

using namespace chesslab;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kInf = 1000000;
constexpr int kMate = 100000;

// Piece values and piece-square tables (middlegame-ish, White POV; mirrored
// for Black).
constexpr int kPieceValue[7] = {0, 100, 320, 330, 500, 900, 0};

constexpr int kPawnPst[64] = {
    0,  0,  0,  0,   0,   0,  0,  0,   //
    5,  10, 10, -20, -20, 10, 10, 5,   //
    5,  -5, -10, 0,  0,   -10, -5, 5,  //
    0,  0,  0,  20,  20,  0,  0,  0,   //
    5,  5,  10, 25,  25,  10, 5,  5,   //
    10, 10, 20, 30,  30,  20, 10, 10,  //
    50, 50, 50, 50,  50,  50, 50, 50,  //
    0,  0,  0,  0,   0,   0,  0,  0,
};
constexpr int kKnightPst[64] = {
    -50, -40, -30, -30, -30, -30, -40, -50,  //
    -40, -20, 0,   5,   5,   0,   -20, -40,  //
    -30, 5,   10,  15,  15,  10,  5,   -30,  //
    -30, 0,   15,  20,  20,  15,  0,   -30,  //
    -30, 5,   15,  20,  20,  15,  5,   -30,  //
    -30, 0,   10,  15,  15,  10,  0,   -30,  //
    -40, -20, 0,   0,   0,   0,   -20, -40,  //
    -50, -40, -30, -30, -30, -30, -40, -50,
};
constexpr int kBishopPst[64] = {
    -20, -10, -10, -10, -10, -10, -10, -20,  //
    -10, 5,   0,   0,   0,   0,   5,   -10,  //
    -10, 10,  10,  10,  10,  10,  10,  -10,  //
    -10, 0,   10,  10,  10,  10,  0,   -10,  //
    -10, 5,   5,   10,  10,  5,   5,   -10,  //
    -10, 0,   5,   10,  10,  5,   0,   -10,  //
    -10, 0,   0,   0,   0,   0,   0,   -10,  //
    -20, -10, -10, -10, -10, -10, -10, -20,
};
constexpr int kRookPst[64] = {
    0,  0,  0,  5,  5,  0,  0,  0,   //
    -5, 0,  0,  0,  0,  0,  0,  -5,  //
    -5, 0,  0,  0,  0,  0,  0,  -5,  //
    -5, 0,  0,  0,  0,  0,  0,  -5,  //
    -5, 0,  0,  0,  0,  0,  0,  -5,  //
    -5, 0,  0,  0,  0,  0,  0,  -5,  //
    5,  10, 10, 10, 10, 10, 10, 5,   //
    0,  0,  0,  0,  0,  0,  0,  0,
};
constexpr int kQueenPst[64] = {
    -20, -10, -10, -5, -5, -10, -10, -20,  //
    -10, 0,   5,   0,  0,  0,   0,   -10,  //
    -10, 5,   5,   5,  5,  5,   0,   -10,  //
    0,   0,   5,   5,  5,  5,   0,   -5,   //
    -5,  0,   5,   5,  5,  5,   0,   -5,   //
    -10, 0,   5,   5,  5,  5,   0,   -10,  //
    -10, 0,   0,   0,  0,  0,   0,   -10,  //
    -20, -10, -10, -5, -5, -10, -10, -20,
};
constexpr int kKingPst[64] = {
    20,  30,  10,  0,   0,   10,  30,  20,   //
    20,  20,  0,   0,   0,   0,   20,  20,   //
    -10, -20, -20, -20, -20, -20, -20, -10,  //
    -20, -30, -30, -40, -40, -30, -30, -20,  //
    -30, -40, -40, -50, -50, -40, -40, -30,  //
    -30, -40, -40, -50, -50, -40, -40, -30,  //
    -30, -40, -40, -50, -50, -40, -40, -30,  //
    -30, -40, -40, -50, -50, -40, -40, -30,
};

int pst(int piece, int sq) {
  switch (piece) {
    case kPawn: return kPawnPst[sq];
    case kKnight: return kKnightPst[sq];
    case kBishop: return kBishopPst[sq];
    case kRook: return kRookPst[sq];
    case kQueen: return kQueenPst[sq];
    case kKing: return kKingPst[sq];
    default: return 0;
  }
}

// Static evaluation in centipawns from the side to move's point of view.
int evaluate(const Position& pos) {
  int score = 0;
  for (int sq = 0; sq < 64; ++sq) {
    int8_t p = pos.piece_at(sq);
    if (p == 0) continue;
    int abs_p = std::abs(p);
    if (p > 0) score += kPieceValue[abs_p] + pst(abs_p, sq);
    else score -= kPieceValue[abs_p] + pst(abs_p, sq ^ 56);
  }
  int stm_score = pos.side_to_move() == Color::kWhite ? score : -score;
  return stm_score + 10;  // tempo
}

struct TimeUp {};

// Small shared transposition table; entries store a depth-qualified score
// with its bound type. Cleared on ucinewgame.
struct TTEntry {
  uint64_t key = 0;
  int32_t score = 0;
  Move best{};
  int16_t depth = -1;
  uint8_t flag = 0;  // 0 exact, 1 lower bound, 2 upper bound
};

struct TransTable {
  static constexpr size_t kSize = 1u << 20;
  std::vector<TTEntry> entries{kSize};

  TTEntry* probe(uint64_t key) {
    TTEntry& e = entries[key & (kSize - 1)];
    return e.key == key ? &e : nullptr;
  }
  void store(uint64_t key, int score, int depth, uint8_t flag, Move best) {
    TTEntry& e = entries[key & (kSize - 1)];
    if (e.key == key && e.depth > depth) return;  // keep deeper results
    e = TTEntry{key, score, best, static_cast<int16_t>(depth), flag};
  }
  void clear() { std::fill(entries.begin(), entries.end(), TTEntry{}); }
};

struct Searcher {
  Clock::time_point deadline;
  bool use_deadline = false;
  uint64_t nodes = 0;
  std::array<std::vector<Move>, 48> move_buffers;
  TransTable* tt = nullptr;

  // Mate scores are ply-relative; normalize when storing/loading.
  static int score_to_tt(int score, int ply) {
    if (score > kMate - 1000) return score + ply;
    if (score < -(kMate - 1000)) return score - ply;
    return score;
  }
  static int score_from_tt(int score, int ply) {
    if (score > kMate - 1000) return score - ply;
    if (score < -(kMate - 1000)) return score + ply;
    return score;
  }

  void tick() {
    ++nodes;
    if (use_deadline && (nodes & 1023) == 0 && Clock::now() >= deadline) throw TimeUp{};
  }

  static bool is_capture(const Position& pos, const Move& m) {
    return pos.piece_at(m.to) != 0 || m.promo != kNone ||
           (std::abs(pos.piece_at(m.from)) == kPawn && file_of(m.from) != file_of(m.to));
  }

  static void order_moves(const Position& pos, std::vector<Move>& moves) {
    auto score_of = [&pos](const Move& m) {
      int s = 0;
      int victim = std::abs(pos.piece_at(m.to));
      if (victim != 0) s += 10 * kPieceValue[victim] - kPieceValue[std::abs(pos.piece_at(m.from))];
      if (m.promo != kNone) s += 8000 + kPieceValue[m.promo];
      return s;
    };
    std::stable_sort(moves.begin(), moves.end(), [&](const Move& a, const Move& b) {
      return score_of(a) > score_of(b);
    });
  }

  // Both loops generate pseudo-legal moves and validate lazily: make the
  // move, skip it if the mover's king ends up attacked.
  int qsearch(const Position& pos, int alpha, int beta, int ply) {
    tick();
    if (ply >= 47) return evaluate(pos);
    uint64_t key = 0;
    if (tt != nullptr) {
      key = pos.key();
      if (TTEntry* e = tt->probe(key); e != nullptr) {
        int score = score_from_tt(e->score, ply);
        if (e->flag == 0) return score;
        if (e->flag == 1 && score >= beta) return score;
        if (e->flag == 2 && score <= alpha) return score;
      }
    }
    int alpha_orig = alpha;
    bool in_check = pos.in_check();
    int stand = 0;
    if (!in_check) {
      stand = evaluate(pos);
      if (stand >= beta) return beta;
      if (stand > alpha) alpha = stand;
    }
    auto& moves = move_buffers[static_cast<size_t>(ply)];
    moves.clear();
    pos.pseudo_moves_into(moves);
    order_moves(pos, moves);
    Color mover = pos.side_to_move();
    bool any_legal = false;
    Move best_move{};
    for (const Move& m : moves) {
      if (!in_check) {
        if (!is_capture(pos, m)) continue;
        // Delta pruning: a capture that cannot lift alpha is not worth trying.
        int victim = std::abs(pos.piece_at(m.to));
        if (victim == 0) victim = kPawn;  // en passant
        if (m.promo == kNone && stand + kPieceValue[victim] + 200 <= alpha) continue;
      }
      Position child = pos;
      child.make_move(m);
      if (child.king_attacked(mover)) continue;
      any_legal = true;
      int score = -qsearch(child, -beta, -alpha, ply + 1);
      if (score >= beta) {
        if (tt != nullptr) tt->store(key, score_to_tt(beta, ply), 0, 1, m);
        return beta;
      }
      if (score > alpha) {
        alpha = score;
        best_move = m;
      }
    }
    if (in_check && !any_legal) return -(kMate - ply);
    if (tt != nullptr)
      tt->store(key, score_to_tt(alpha, ply), 0, alpha <= alpha_orig ? 2 : 0, best_move);
    return alpha;
  }

  int search(const Position& pos, int depth, int alpha, int beta, int ply) {
    tick();
    if (pos.halfmove_clock() >= 100 || pos.insufficient_material()) return 0;
    if (depth <= 0) return qsearch(pos, alpha, beta, ply);

    uint64_t key = pos.key();
    Move tt_move{};
    if (tt != nullptr) {
      if (TTEntry* e = tt->probe(key); e != nullptr) {
        if (e->depth >= depth) {
          int score = score_from_tt(e->score, ply);
          if (e->flag == 0) return score;
          if (e->flag == 1 && score >= beta) return score;
          if (e->flag == 2 && score <= alpha) return score;
        }
        tt_move = e->best;  // even shallow entries order the search well
      }
    }
    int alpha_orig = alpha;

    auto& moves = move_buffers[static_cast<size_t>(ply)];
    moves.clear();
    pos.pseudo_moves_into(moves);
    order_moves(pos, moves);
    if (tt_move.from >= 0) {
      for (size_t i = 0; i < moves.size(); ++i) {
        if (moves[i] == tt_move) {
          std::rotate(moves.begin(), moves.begin() + static_cast<long>(i),
                      moves.begin() + static_cast<long>(i) + 1);
          break;
        }
      }
    }
    Color mover = pos.side_to_move();
    bool any_legal = false;
    Move best_move{};
    for (const Move& m : moves) {
      Position child = pos;
      child.make_move(m);
      if (child.king_attacked(mover)) continue;
      any_legal = true;
      int score = -search(child, depth - 1, -beta, -alpha, ply + 1);
      if (score >= beta) {
        if (tt != nullptr) tt->store(key, score_to_tt(beta, ply), depth, 1, m);
        return beta;
      }
      if (score > alpha) {
        alpha = score;
        best_move = m;
      }
    }
    if (!any_legal) return pos.in_check() ? -(kMate - ply) : 0;
    if (tt != nullptr)
      tt->store(key, score_to_tt(alpha, ply), depth, alpha <= alpha_orig ? 2 : 0, best_move);
    return alpha;
  }

  // Scores every root move at `depth`. Moves within `window_cp` of the best
  // keep exact scores (noisy move choice needs alternatives); the rest are
  // classified with a cheap null-window probe and come back clamped at the
  // window edge.
  std::vector<std::pair<Move, int>> root_scores(const Position& pos, int depth,
                                                int window_cp,
                                                const std::vector<std::pair<Move, int>>* prev) {
    std::vector<Move> moves = pos.legal_moves();
    order_moves(pos, moves);
    if (prev != nullptr && prev->size() == moves.size()) {
      // Previous iteration's scores are the best root ordering available.
      std::vector<std::pair<Move, int>> sorted = *prev;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      for (size_t i = 0; i < sorted.size(); ++i) moves[i] = sorted[i].first;
    }
    std::vector<std::pair<Move, int>> scored;
    scored.reserve(moves.size());
    int best = -kInf;
    for (const Move& m : moves) {
      Position child = pos;
      child.make_move(m);
      int score;
      if (best == -kInf) {
        score = -search(child, depth - 1, -kInf, kInf, 1);
      } else {
        int clamp_at = best - std::max(window_cp, 1);
        score = -search(child, depth - 1, -clamp_at - 1, -clamp_at, 1);
        if (score > clamp_at) score = -search(child, depth - 1, -kInf, -clamp_at, 1);
      }
      scored.emplace_back(m, score);
      best = std::max(best, score);
    }
    return scored;
  }
};

struct WdlOut {
  int w, d, l;
};

// Centipawns (side to move) to per-mille WDL. Logistic win expectancy plus a
// draw bulge that decays with |cp|.
WdlOut wdl_from_cp(int cp) {
  if (cp >= kMate - 1000) return {1000, 0, 0};
  if (cp <= -(kMate - 1000)) return {0, 0, 1000};
  double expected = 1.0 / (1.0 + std::pow(10.0, -cp / 400.0));
  double draw = 0.55 * std::exp(-(cp / 350.0) * (cp / 350.0));
  double w = expected - 0.5 * draw;
  double l = (1.0 - expected) - 0.5 * draw;
  if (w < 0) {
    draw += 2 * w;
    w = 0;
  }
  if (l < 0) {
    draw += 2 * l;
    l = 0;
  }
  if (draw < 0) draw = 0;
  double total = w + draw + l;
  int wi = static_cast<int>(std::lround(1000.0 * w / total));
  int li = static_cast<int>(std::lround(1000.0 * l / total));
  wi = std::clamp(wi, 0, 1000);
  li = std::clamp(li, 0, 1000 - wi);
  return {wi, 1000 - wi - li, li};
}

struct Engine {
  Position pos;
  TransTable tt;
  bool limit_strength = false;
  int elo = 1320;
  bool show_wdl = false;
  std::mt19937_64 rng{std::random_device{}()};
  uint64_t fixed_seed = 0;

  double strength() const {
    if (!limit_strength) return 1.0;
    return std::clamp((elo - 1320) / double(3190 - 1320), 0.0, 1.0);
  }

  // Blunder-mixture model: ELO-limited play is mostly sensible with a small
  // perturbation, but occasionally lurches with a large one. Selectively
  // timed oracle moves are then much more valuable than randomly timed ones.
  double blunder_prob() const {
    if (!limit_strength) return 0.0;
    return 0.18 * std::pow(1.0 - strength(), 1.2);
  }
  double sigma_small_cp() const {
    if (!limit_strength) return 0.0;
    return 150.0 * (1.0 - strength());
  }
  double sigma_big_cp() const {
    if (!limit_strength) return 0.0;
    return 700.0 * std::sqrt(1.0 - strength());
  }
  bool noisy() const { return limit_strength && strength() < 1.0; }

  // Repeated `go` on the same position and limits re-derives identical root
  // scores; only the strength noise differs per query. Cache the last root.
  uint64_t cached_key = 0;
  int cached_depth = -1;
  std::vector<std::pair<Move, int>> cached_scores;

  void handle_position(const std::string& line) {
    std::istringstream in(line);
    std::string tok;
    in >> tok;  // "position"
    in >> tok;
    if (tok == "startpos") {
      pos = Position();
      in >> tok;  // maybe "moves"
    } else if (tok == "fen") {
      std::string fen, part;
      int fields = 0;
      while (fields < 6 && in >> part) {
        if (part == "moves") break;
        if (!fen.empty()) fen += ' ';
        fen += part;
        ++fields;
      }
      auto p = Position::from_fen(fen);
      if (p) pos = *p;
      tok = part;
    }
    if (tok == "moves") {
      std::string mv;
      while (in >> mv) {
        auto m = move_from_uci(mv);
        if (m && pos.is_legal(*m)) pos.make_move(*m);
      }
    }
  }

  void handle_go(const std::string& line) {
    std::istringstream in(line);
    std::string tok;
    int movetime_ms = -1, depth_limit = -1;
    in >> tok;
    while (in >> tok) {
      if (tok == "movetime") in >> movetime_ms;
      else if (tok == "depth") in >> depth_limit;
    }
    if (movetime_ms < 0 && depth_limit < 0) depth_limit = 4;

    std::vector<Move> legal = pos.legal_moves();
    if (legal.empty()) {
      int cp = pos.in_check() ? -kMate : 0;
      WdlOut wdl = wdl_from_cp(cp);
      std::cout << "info depth 0 score cp " << std::clamp(cp, -29999, 29999);
      if (show_wdl) std::cout << " wdl " << wdl.w << " " << wdl.d << " " << wdl.l;
      std::cout << "\nbestmove (none)\n" << std::flush;
      return;
    }

    Searcher searcher;
    searcher.tt = &tt;
    if (movetime_ms >= 0) {
      searcher.use_deadline = true;
      searcher.deadline = Clock::now() + std::chrono::milliseconds(movetime_ms);
    }
    int depth_cap = depth_limit > 0 ? depth_limit : 64;

    int window_cp = noisy() ? 300 : 0;
    bool cacheable = movetime_ms < 0;  // depth-limited searches are reproducible
    if (cacheable && cached_depth == depth_cap && cached_key == pos.key() &&
        !cached_scores.empty()) {
      choose_and_report(pos, depth_cap, cached_scores);
      return;
    }
    std::vector<std::pair<Move, int>> scored{{legal[0], 0}};
    auto started = Clock::now();
    for (int depth = 1; depth <= depth_cap; ++depth) {
      try {
        scored = searcher.root_scores(pos, depth, window_cp,
                                      depth > 1 ? &scored : nullptr);
      } catch (const TimeUp&) {
        break;
      }
      auto best = std::max_element(scored.begin(), scored.end(),
                                   [](auto& a, auto& b) { return a.second < b.second; });
      long ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started)
                    .count();
      WdlOut wdl = wdl_from_cp(best->second);
      std::cout << "info depth " << depth << " score cp "
                << std::clamp(best->second, -29999, 29999);
      if (show_wdl) std::cout << " wdl " << wdl.w << " " << wdl.d << " " << wdl.l;
      std::cout << " nodes " << searcher.nodes << " time " << ms << " pv "
                << to_uci(best->first) << "\n";
      if (searcher.use_deadline && Clock::now() >= searcher.deadline) break;
    }

    if (cacheable) {
      cached_key = pos.key();
      cached_depth = depth_cap;
      cached_scores = scored;
    }
    choose_and_report(pos, depth_cap, scored);
  }

  // ELO-limited choice: perturb root scores, play the noisy argmax, and
  // report the clean evaluation of the move actually chosen. Moves whose
  // root score was clamped by the search window are re-scored exactly so
  // the reported value is always the true one at this depth.
  void choose_and_report(const Position& position, int depth, const std::vector<std::pair<Move, int>>& scored) {
    size_t best_idx = 0;
    for (size_t i = 0; i < scored.size(); ++i)
      if (scored[i].second > scored[best_idx].second) best_idx = i;

    size_t choice = best_idx;
    if (noisy()) {
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      double sigma = u < blunder_prob() ? sigma_big_cp() : sigma_small_cp();
      std::normal_distribution<double> noise(0.0, sigma);
      double best_noisy = -1e18;
      for (size_t i = 0; i < scored.size(); ++i) {
        double v = scored[i].second + noise(rng);
        if (v > best_noisy) {
          best_noisy = v;
          choice = i;
        }
      }
    }

    int exact = scored[choice].second;
    if (noisy() && choice != best_idx && exact <= scored[best_idx].second - 295) {
      // Window-clamped score; re-search the chosen move with a bounded
      // window (wide enough for WDL purposes, narrow enough to prune).
      Searcher rescore;
      rescore.tt = &tt;
      Position child = position;
      child.make_move(scored[choice].first);
      int lo = exact - 2200, hi = exact + 60;
      exact = -rescore.search(child, depth - 1, -hi, -lo, 1);
    }

    WdlOut wdl = wdl_from_cp(exact);
    std::cout << "info depth 0 score cp " << std::clamp(exact, -29999, 29999);
    if (show_wdl) std::cout << " wdl " << wdl.w << " " << wdl.d << " " << wdl.l;
    std::cout << " pv " << to_uci(scored[choice].first) << "\n";
    std::cout << "bestmove " << to_uci(scored[choice].first) << "\n" << std::flush;
  }

  void handle_setoption(const std::string& line) {
    std::istringstream in(line);
    std::string tok, name, value;
    in >> tok;  // setoption
    while (in >> tok) {
      if (tok == "name") {
        while (in >> tok && tok != "value") {
          if (!name.empty()) name += ' ';
          name += tok;
        }
        if (tok == "value") in >> value;
      }
    }
    if (name == "UCI_LimitStrength") limit_strength = value == "true";
    else if (name == "UCI_Elo") elo = std::atoi(value.c_str());
    if (name == "UCI_LimitStrength" || name == "UCI_Elo") cached_depth = -1;
    else if (name == "UCI_ShowWDL") show_wdl = value == "true";
    else if (name == "Seed") {
      fixed_seed = static_cast<uint64_t>(std::atoll(value.c_str()));
      if (fixed_seed != 0) rng.seed(fixed_seed);
    }
  }

  int run() {
    std::string line;
    while (std::getline(std::cin, line)) {
      if (line == "uci") {
        std::cout << "id name refengine 1.0\n";
        std::cout << "id author chesslab\n";
        std::cout << "option name UCI_LimitStrength type check default false\n";
        std::cout << "option name UCI_Elo type spin default 1320 min 1320 max 3190\n";
        std::cout << "option name UCI_ShowWDL type check default false\n";
        std::cout << "option name Threads type spin default 1 min 1 max 1\n";
        std::cout << "option name Seed type spin default 0 min 0 max 2147483647\n";
        std::cout << "uciok\n" << std::flush;
      } else if (line == "isready") {
        std::cout << "readyok\n" << std::flush;
      } else if (line == "ucinewgame") {
        pos = Position();
        cached_depth = -1;
        tt.clear();
      } else if (line.rfind("position", 0) == 0) {
        handle_position(line);
      } else if (line.rfind("go", 0) == 0) {
        handle_go(line);
      } else if (line.rfind("setoption", 0) == 0) {
        handle_setoption(line);
      } else if (line == "quit") {
        break;
      }
    }
    return 0;
  }
};

}  // namespace

int main() { return Engine{}.run(); }
