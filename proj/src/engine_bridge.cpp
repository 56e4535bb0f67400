#include "chesslab/engine_bridge.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <deque>
#include <sstream>

#include "chesslab/chess.hpp"

namespace chesslab {

WdlTriple WdlTriple::checked(int win, int draw, int lose) {
  if (win < 0 || win > 1000 || draw < 0 || draw > 1000 || lose < 0 || lose > 1000 ||
      win + draw + lose != 1000) {
    throw EngineError("invalid wdl triple: " + std::to_string(win) + " " +
                      std::to_string(draw) + " " + std::to_string(lose));
  }
  return WdlTriple{win, draw, lose};
}

namespace {

struct SpinOption {
  int def = 0, min = 0, max = 0;
};

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

}  // namespace

struct EngineSession::Impl {
  EngineConfig config;
  pid_t pid = -1;
  int to_engine = -1;    // write end
  int from_engine = -1;  // read end
  bool dead = true;
  std::string name;
  std::string read_buf;
  std::deque<std::string> lines;
  std::map<std::string, SpinOption> spin_options;
  std::vector<std::string> check_options;

  ~Impl() { close_fds(); }

  void close_fds() {
    if (to_engine >= 0) ::close(to_engine);
    if (from_engine >= 0) ::close(from_engine);
    to_engine = from_engine = -1;
  }

  void mark_dead() {
    dead = true;
    close_fds();
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      pid = -1;
    }
  }

  void require_alive() const {
    if (dead) throw EngineError("engine session is dead: " + config.executable.string());
  }

  void send_line(const std::string& line) {
    require_alive();
    std::string out = line + "\n";
    size_t off = 0;
    while (off < out.size()) {
      ssize_t n = ::write(to_engine, out.data() + off, out.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        mark_dead();
        throw EngineError("write to engine failed: " + std::string(strerror(errno)));
      }
      off += static_cast<size_t>(n);
    }
  }

  // Reads one line, waiting up to `timeout`. Throws on EOF or timeout.
  std::string read_line(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (!lines.empty()) {
        std::string line = std::move(lines.front());
        lines.pop_front();
        return line;
      }
      require_alive();
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) {
        mark_dead();
        throw EngineError("engine timed out: " + config.executable.string());
      }
      struct pollfd pfd {
        from_engine, POLLIN, 0
      };
      int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        mark_dead();
        throw EngineError("poll failed: " + std::string(strerror(errno)));
      }
      if (rc == 0) continue;  // loop re-checks the deadline
      char chunk[4096];
      ssize_t n = ::read(from_engine, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        mark_dead();
        throw EngineError("read from engine failed: " + std::string(strerror(errno)));
      }
      if (n == 0) {
        mark_dead();
        throw EngineError("engine exited unexpectedly: " + config.executable.string());
      }
      read_buf.append(chunk, static_cast<size_t>(n));
      size_t pos;
      while ((pos = read_buf.find('\n')) != std::string::npos) {
        std::string line = read_buf.substr(0, pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        read_buf.erase(0, pos + 1);
      }
    }
  }

  // Waits for a line whose first token equals `token`; returns it.
  std::string wait_for(const std::string& token, std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) {
        mark_dead();
        throw EngineError("timed out waiting for '" + token + "'");
      }
      std::string line = read_line(remaining);
      auto tokens = split_ws(line);
      if (!tokens.empty() && tokens[0] == token) return line;
      on_passive_line(tokens);
    }
  }

  void on_passive_line(const std::vector<std::string>& tokens) {
    if (tokens.size() >= 3 && tokens[0] == "id" && tokens[1] == "name" && name.empty()) {
      name = tokens[2];
    }
    if (tokens.size() >= 2 && tokens[0] == "option") parse_option_line(tokens);
  }

  void parse_option_line(const std::vector<std::string>& tokens) {
    std::string opt_name, type;
    SpinOption spin;
    for (size_t i = 1; i + 1 < tokens.size(); ++i) {
      if (tokens[i] == "name") opt_name = tokens[i + 1];
      else if (tokens[i] == "type") type = tokens[i + 1];
      else if (tokens[i] == "default" && type == "spin") spin.def = std::atoi(tokens[i + 1].c_str());
      else if (tokens[i] == "min") spin.min = std::atoi(tokens[i + 1].c_str());
      else if (tokens[i] == "max") spin.max = std::atoi(tokens[i + 1].c_str());
    }
    if (opt_name.empty()) return;
    if (type == "spin") spin_options[opt_name] = spin;
    else check_options.push_back(opt_name);
  }

  bool has_option(const std::string& opt) const {
    if (spin_options.count(opt)) return true;
    for (const auto& c : check_options)
      if (c == opt) return true;
    return false;
  }

  void set_option(const std::string& opt, const std::string& value) {
    send_line("setoption name " + opt + " value " + value);
  }

  void sync_ready() {
    send_line("isready");
    wait_for("readyok", config.handshake_timeout);
  }

  std::chrono::milliseconds go_timeout() const {
    if (config.limit.kind == SearchLimit::Kind::kMoveTime)
      return std::chrono::milliseconds(10 * config.limit.value + 10000);
    return std::chrono::milliseconds(120000);
  }

  // Runs one `go` on the current position and collects (bestmove, last wdl).
  MoveSample run_go(bool white_to_move) {
    if (config.limit.kind == SearchLimit::Kind::kMoveTime)
      send_line("go movetime " + std::to_string(config.limit.value));
    else
      send_line("go depth " + std::to_string(config.limit.value));

    std::optional<WdlTriple> last_wdl;
    auto deadline = std::chrono::steady_clock::now() + go_timeout();
    for (;;) {
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) {
        mark_dead();
        throw EngineError("engine did not produce bestmove in time");
      }
      std::string line = read_line(remaining);
      auto tokens = split_ws(line);
      if (tokens.empty()) continue;
      if (tokens[0] == "info") {
        for (size_t i = 1; i + 3 < tokens.size(); ++i) {
          if (tokens[i] == "wdl") {
            last_wdl = WdlTriple::checked(std::atoi(tokens[i + 1].c_str()),
                                          std::atoi(tokens[i + 2].c_str()),
                                          std::atoi(tokens[i + 3].c_str()));
            break;
          }
        }
      } else if (tokens[0] == "bestmove") {
        if (tokens.size() < 2) throw EngineError("malformed bestmove line");
        if (!last_wdl) {
          throw EngineError(config.show_wdl ? "engine reported no WDL despite UCI_ShowWDL"
                                            : "engine reported no WDL; enable show_wdl");
        }
        WdlTriple white_pov = white_to_move ? *last_wdl : last_wdl->flipped();
        return MoveSample{tokens[1], white_pov, white_pov.expected_score()};
      } else {
        on_passive_line(tokens);
      }
    }
  }
};

EngineSession::EngineSession() : impl_(std::make_unique<Impl>()) {}
EngineSession::EngineSession(EngineSession&&) noexcept = default;
EngineSession& EngineSession::operator=(EngineSession&&) noexcept = default;

EngineSession::~EngineSession() {
  if (impl_) shutdown();
}

bool EngineSession::alive() const { return impl_ && !impl_->dead; }
const EngineConfig& EngineSession::config() const { return impl_->config; }
const std::string& EngineSession::engine_name() const { return impl_->name; }

void EngineSession::new_game() {
  impl_->require_alive();
  impl_->send_line("ucinewgame");
  impl_->sync_ready();
}

MoveSample EngineSession::evaluate(const std::vector<std::string>& moves) {
  impl_->require_alive();

  Game game;
  for (const auto& u : moves)
    if (!game.play_uci(u)) throw EngineError("illegal move in position: " + u);

  // Mate and stalemate have exact values; do not ask the engine.
  BoardStatus st = game.status();
  if (st == BoardStatus::kCheckmate || st == BoardStatus::kStalemate) {
    double score = game.result();
    int w = st == BoardStatus::kCheckmate ? (score == 1.0 ? 1000 : 0) : 0;
    int d = st == BoardStatus::kStalemate ? 1000 : 0;
    WdlTriple wdl{w, d, 1000 - w - d};
    return MoveSample{"", wdl, wdl.expected_score()};
  }

  std::string cmd = "position startpos";
  if (!moves.empty()) {
    cmd += " moves";
    for (const auto& u : moves) cmd += " " + u;
  }
  impl_->send_line(cmd);
  bool white_to_move = game.pos().side_to_move() == Color::kWhite;
  return impl_->run_go(white_to_move);
}

std::vector<MoveSample> EngineSession::sample_moves(const std::vector<std::string>& moves,
                                                    int count) {
  if (count < 1) throw EngineError("sample_moves: count must be >= 1");
  std::vector<MoveSample> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(evaluate(moves));
  return out;
}

void EngineSession::shutdown() {
  Impl& s = *impl_;
  if (s.pid <= 0) return;
  if (!s.dead) {
    try {
      s.send_line("quit");
    } catch (const EngineError&) {
      // fall through to the kill path
    }
  }
  if (s.pid > 0) {
    // ~500 ms grace, then SIGKILL.
    for (int i = 0; i < 50; ++i) {
      int status = 0;
      pid_t r = ::waitpid(s.pid, &status, WNOHANG);
      if (r == s.pid || r < 0) {
        s.pid = -1;
        break;
      }
      ::usleep(10000);
    }
    if (s.pid > 0) {
      ::kill(s.pid, SIGKILL);
      ::waitpid(s.pid, nullptr, 0);
      s.pid = -1;
    }
  }
  s.dead = true;
  s.close_fds();
}

EngineSession start_engine(const EngineConfig& config) {
  namespace fs = std::filesystem;
  if (!fs::exists(config.executable))
    throw EngineError("engine executable not found: " + config.executable.string());
  if (::access(config.executable.c_str(), X_OK) != 0)
    throw EngineError("engine executable not runnable: " + config.executable.string());
  if (config.threads < 1) throw EngineError("threads must be positive");

  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw EngineError("pipe() failed: " + std::string(strerror(errno)));

  pid_t pid = ::fork();
  if (pid < 0) throw EngineError("fork() failed: " + std::string(strerror(errno)));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    std::string path = config.executable.string();
    char* argv[] = {path.data(), nullptr};
    ::execv(path.c_str(), argv);
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);

  EngineSession session;
  EngineSession::Impl& s = *session.impl_;
  s.config = config;
  s.pid = pid;
  s.to_engine = to_child[1];
  s.from_engine = from_child[0];
  s.dead = false;

  s.send_line("uci");
  s.wait_for("uciok", config.handshake_timeout);

  if (config.limit_strength) {
    auto it = s.spin_options.find("UCI_Elo");
    if (it == s.spin_options.end())
      throw EngineError("engine does not support UCI_Elo strength limiting");
    if (config.elo < it->second.min || config.elo > it->second.max)
      throw EngineError("elo " + std::to_string(config.elo) + " outside engine range [" +
                        std::to_string(it->second.min) + ", " +
                        std::to_string(it->second.max) + "]");
    s.set_option("UCI_LimitStrength", "true");
    s.set_option("UCI_Elo", std::to_string(config.elo));
  } else if (s.has_option("UCI_LimitStrength")) {
    s.set_option("UCI_LimitStrength", "false");
  }
  if (config.show_wdl) {
    if (!s.has_option("UCI_ShowWDL"))
      throw EngineError("engine does not support UCI_ShowWDL");
    s.set_option("UCI_ShowWDL", "true");
  }
  if (s.spin_options.count("Threads")) {
    s.set_option("Threads", std::to_string(config.threads));
  } else if (config.threads != 1) {
    throw EngineError("engine does not support a Threads option");
  }
  for (const auto& [k, v] : config.extra_options) s.set_option(k, v);

  s.sync_ready();
  return session;
}

}  // namespace chesslab
