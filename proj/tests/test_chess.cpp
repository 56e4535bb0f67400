#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "chesslab/chess.hpp"

using namespace chesslab;

namespace {

Position fen(const char* s) {
  auto p = Position::from_fen(s);
  REQUIRE(p.has_value());
  return *p;
}

Game replay(const std::vector<std::string>& ucis) {
  Game g;
  for (const auto& u : ucis) REQUIRE(g.play_uci(u));
  return g;
}

}  // namespace

// Published node counts for standard validation positions; these pin the
// move generator against an external reference without needing one at test
// time.
TEST_CASE("perft matches published node counts") {
  Position start;
  CHECK(perft(start, 1) == 20);
  CHECK(perft(start, 2) == 400);
  CHECK(perft(start, 3) == 8902);
  CHECK(perft(start, 4) == 197281);

  Position kiwipete =
      fen("r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1");
  CHECK(perft(kiwipete, 1) == 48);
  CHECK(perft(kiwipete, 2) == 2039);
  CHECK(perft(kiwipete, 3) == 97862);

  Position p3 = fen("8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1");
  CHECK(perft(p3, 1) == 14);
  CHECK(perft(p3, 2) == 191);
  CHECK(perft(p3, 3) == 2812);
  CHECK(perft(p3, 4) == 43238);
  CHECK(perft(p3, 5) == 674624);

  Position p4 = fen("r3k2r/Pppp1ppp/1b3nbN/nP6/BBP1P3/q4N2/Pp1P2PP/R2Q1RK1 w kq - 0 1");
  CHECK(perft(p4, 1) == 6);
  CHECK(perft(p4, 2) == 264);
  CHECK(perft(p4, 3) == 9467);
  CHECK(perft(p4, 4) == 422333);

  Position p5 = fen("rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8");
  CHECK(perft(p5, 1) == 44);
  CHECK(perft(p5, 2) == 1486);
  CHECK(perft(p5, 3) == 62379);

  Position p6 =
      fen("r4rk1/1pp1qppp/p1np1n2/2b1p1B1/2B1P1b1/P1NP1N2/1PP1QPPP/R4RK1 w - - 0 10");
  CHECK(perft(p6, 1) == 46);
  CHECK(perft(p6, 2) == 2079);
  CHECK(perft(p6, 3) == 89890);
}

TEST_CASE("deeper perft on the start position") {
  Position start;
  CHECK(perft(start, 5) == 4865609);
}

TEST_CASE("uci move round trip") {
  auto m = move_from_uci("e2e4");
  REQUIRE(m.has_value());
  CHECK(to_uci(*m) == "e2e4");
  auto promo = move_from_uci("e7e8q");
  REQUIRE(promo.has_value());
  CHECK(promo->promo == kQueen);
  CHECK(to_uci(*promo) == "e7e8q");
  CHECK(!move_from_uci("e9e4").has_value());
  CHECK(!move_from_uci("e2e4x").has_value());
}

TEST_CASE("san parsing covers castling en passant promotion and disambiguation") {
  // Kingside castle.
  Position p = fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1");
  auto oo = parse_san(p, "O-O");
  REQUIRE(oo.has_value());
  CHECK(to_uci(*oo) == "e1g1");
  auto ooo = parse_san(p, "O-O-O");
  REQUIRE(ooo.has_value());
  CHECK(to_uci(*ooo) == "e1c1");

  // En passant: after d5 exd6 the captured pawn is on d5, not d6.
  Position ep = fen("4k3/8/8/3pP3/8/8/8/4K3 w - d6 0 3");
  auto cap = parse_san(ep, "exd6");
  REQUIRE(cap.has_value());
  CHECK(to_uci(*cap) == "e5d6");
  Position after = ep;
  after.make_move(*cap);
  CHECK(after.piece_at(make_square(3, 4)) == 0);

  // Promotion, both "=Q" and bare-letter forms.
  Position pr = fen("8/P6k/8/8/8/8/8/4K3 w - - 0 1");
  auto q1 = parse_san(pr, "a8=Q+");
  REQUIRE(q1.has_value());
  CHECK(to_uci(*q1) == "a7a8q");
  auto q2 = parse_san(pr, "a8N");
  REQUIRE(q2.has_value());
  CHECK(to_uci(*q2) == "a7a8n");

  // File and rank disambiguation.
  Position two_rooks = fen("4k3/8/8/8/8/8/4K3/R4R2 w - - 0 1");
  CHECK(!parse_san(two_rooks, "Rd1").has_value());  // ambiguous
  auto rad1 = parse_san(two_rooks, "Rad1");
  REQUIRE(rad1.has_value());
  CHECK(to_uci(*rad1) == "a1d1");
  Position stacked = fen("4k3/8/8/8/R7/8/8/R3K3 w - - 0 1");
  auto r1a3 = parse_san(stacked, "R1a3");
  REQUIRE(r1a3.has_value());
  CHECK(to_uci(*r1a3) == "a1a3");

  // Pawn captures name their source file.
  Position pc = fen("4k3/8/8/2pp4/3P4/8/8/4K3 w - - 0 1");
  auto dxc5 = parse_san(pc, "dxc5");
  REQUIRE(dxc5.has_value());
  CHECK(to_uci(*dxc5) == "d4c5");
}

TEST_CASE("status detection") {
  SUBCASE("fools mate is checkmate") {
    Game g = replay({"f2f3", "e7e5", "g2g4", "d8h4"});
    CHECK(g.status() == BoardStatus::kCheckmate);
    CHECK(g.result() == 0.0);  // White to move is mated
  }
  SUBCASE("scholars mate scores 1 for white") {
    Game g = replay({"e2e4", "e7e5", "f1c4", "b8c6", "d1h5", "g8f6", "h5f7"});
    CHECK(g.status() == BoardStatus::kCheckmate);
    CHECK(g.result() == 1.0);
  }
  SUBCASE("stalemate") {
    Game g;
    // 10. ... stalemate trap (Sam Loyd line).
    for (const char* u : {"e2e3", "a7a5", "d1h5", "a8a6", "h5a5", "h7h5", "h2h4",
                          "a6h6", "a5c7", "f7f6", "c7d7", "e8f7", "d7b7", "d8d3",
                          "b7b8", "d3h7", "b8c8", "f7g6", "c8e6"})
      REQUIRE(g.play_uci(u));
    CHECK(g.status() == BoardStatus::kStalemate);
    CHECK(g.result() == 0.5);
  }
  SUBCASE("threefold repetition") {
    Game g = replay({"g1f3", "g8f6", "f3g1", "f6g8", "g1f3", "g8f6", "f3g1", "f6g8"});
    CHECK(g.status() == BoardStatus::kThreefold);
  }
  SUBCASE("insufficient material") {
    Game g;
    Position p = fen("4k3/8/8/8/8/8/4B3/4K3 w - - 0 1");
    CHECK(p.insufficient_material());
    CHECK(!fen("4k3/8/8/8/8/8/4P3/4K3 w - - 0 1").insufficient_material());
    CHECK(fen("4k3/8/2b5/8/8/8/4B3/4K3 w - - 0 1").insufficient_material());   // same color
    CHECK(!fen("4k3/8/3b4/8/8/8/4B3/4K3 w - - 0 1").insufficient_material());  // opposite
  }
  SUBCASE("illegal moves are rejected without state change") {
    Game g;
    CHECK(!g.play_uci("e2e5"));
    CHECK(g.plies() == 0);
    CHECK(g.play_uci("e2e4"));
  }
}

TEST_CASE("fen round trip") {
  const char* cases[] = {
      "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
      "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1",
      "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1",
      "rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8",
  };
  for (const char* f : cases) CHECK(fen(f).fen() == f);
  CHECK(!Position::from_fen("not a fen").has_value());
  CHECK(!Position::from_fen("8/8/8/8/8/8/8/9 w - - 0 1").has_value());
}
