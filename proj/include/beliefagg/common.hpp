#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace beliefagg {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// splitmix64 counter stream. Construction is O(1), which matters because
/// rollout simulations open a fresh stream per (decision, control, branch,
/// sim) tuple.
class Rng {
public:
  using result_type = uint64_t;
  explicit Rng(uint64_t seed = 0) : state_(seed) {}
  static constexpr uint64_t min() { return 0; }
  static constexpr uint64_t max() { return ~0ull; }
  uint64_t operator()() { return splitmix64(state_ += 0x9e3779b97f4a7c15ull); }

private:
  uint64_t state_;
};

/// Errors that map to CLI exit code 3.
class CapacityExceededError : public std::runtime_error {
public:
  explicit CapacityExceededError(const std::string& what) : std::runtime_error(what) {}
};

class NonConvergenceError : public std::runtime_error {
public:
  explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Errors that map to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Independent RNG stream derived from a root seed and a path of indices.
inline Rng make_stream(uint64_t seed, std::initializer_list<uint64_t> path) {
  uint64_t h = splitmix64(seed);
  for (uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x51ed270b0a1ceull));
  return Rng(h);
}

/// C(n, k) with overflow saturation to +inf-like sentinel via double.
inline double binomial_double(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (k > n - k) k = n - k;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

/// Static-partition parallel map over [0, count). Deterministic: worker w owns
/// a contiguous chunk, results are written by index.
template <typename Fn>
void parallel_for(long count, int threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  int nw = std::min<long>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  long chunk = (count + nw - 1) / nw;
  for (int w = 0; w < nw; ++w) {
    long lo = w * chunk, hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (long i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace beliefagg
