#pragma once
// Small shared utilities: error types, locale-independent numeric formatting,
// a deterministic content hash, and a slot-ordered parallel loop.

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace spincool {

inline constexpr const char* kToolVersion = "0.1.0";

// configuration problems (bad keys, violated constraints) -> exit code 2
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// numerical failures (non-finite results, solver breakdown) -> exit code 3
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Format with 9 significant digits, locale-independent (std::to_chars never
// consults the locale). All file output goes through this.
inline std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
}

// FNV-1a 64-bit; used for config digests and determinism checks.
struct Fnv1a64 {
  std::uint64_t h = 1469598103934665603ull;
  void update(std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
  void update_bytes(const void* p, std::size_t n) {
    update(std::string_view(static_cast<const char*>(p), n));
  }
  std::string hex() const {
    static const char* d = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = h;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = d[v & 0xf];
      v >>= 4;
    }
    return out;
  }
};

// Run fn(i) for i in [0, n) on up to `threads` workers. Work items are claimed
// from an atomic counter; callers write results into pre-sized slots so the
// final aggregation order never depends on scheduling.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  int nw = threads;
  if (nw < 1) nw = 1;
  if (static_cast<std::size_t>(nw) > n) nw = static_cast<int>(n);
  if (nw == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(nw));
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= n) break;
          fn(i);
        }
      } catch (...) {
        errs[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

inline int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace spincool
