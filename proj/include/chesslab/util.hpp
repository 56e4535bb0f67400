#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace chesslab {

// splitmix64; used both as a mixer and to derive independent RNG streams.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive a child RNG stream from (seed, index). Streams for distinct indices
// are independent for our purposes, so parallel schedules cannot change what
// any one game or run draws.
inline std::mt19937_64 derive_rng(uint64_t seed, uint64_t index) {
  uint64_t s = splitmix64(seed ^ splitmix64(index + 0x51ed2701ULL));
  return std::mt19937_64(s);
}

inline uint64_t fnv1a(std::string_view data) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Standard error of the mean.
inline double sem_of(const std::vector<double>& xs) {
  size_t n = xs.size();
  if (n < 2) return 0.0;
  double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

// Write `content` to `path` atomically (temp file in the same directory, then
// rename). A crashed process never leaves a partial file under the final name.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

struct StopWatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace chesslab
