#ifndef GMCS_COMMON_HPP
#define GMCS_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gmcs {

// Malformed or inconsistent input (files, dimensions, weights). CLI exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure (non-PD covariance, non-finite value). CLI exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Counter-style generator with keyed substreams. A substream is derived from the
// parent's immutable key, not from its draw position, so stream layout is fixed
// by (seed, tag path) alone and never depends on how many values were consumed
// or on thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ull)), state_(key_) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // N(0,1). Box-Muller without a cached spare: replay only depends on call count.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  Rng substream(std::uint64_t tag) const {
    return Rng(key_ ^ mix(tag * 0xd1342543de82ef95ull + 0x9e6c63d0876a9a47ull), 0);
  }

  std::uint64_t key() const { return key_; }

 private:
  Rng(std::uint64_t key, int) : key_(mix(key)), state_(key_) {}

  static std::uint64_t mix(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t key_;
  std::uint64_t state_;
};

// Adjacent-pair halving reduction. Consumes the buffer.
inline double halving_reduce(std::vector<double>& p) {
  if (p.empty()) return 0.0;
  std::size_t len = p.size();
  while (len > 1) {
    std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) p[i] = p[2 * i] + p[2 * i + 1];
    if (len & 1) p[half++] = p[len - 1];
    len = half;
  }
  return p[0];
}

inline constexpr std::ptrdiff_t kSumLeaf = 64;     // serial leaf width for scalar sums
inline constexpr std::ptrdiff_t kStatBlock = 4096; // block width for vector/matrix stats

// Deterministic sum of term(0..n-1): serial within 64-wide leaves, adjacent-pair
// halving above them. The association depends only on n, never on thread count,
// and the tree keeps rounding error O(log n).
template <class F>
double block_sum(std::ptrdiff_t n, F&& term) {
  if (n <= 0) return 0.0;
  const std::ptrdiff_t nb = (n + kSumLeaf - 1) / kSumLeaf;
  std::vector<double> partial(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::ptrdiff_t lo = b * kSumLeaf;
    const std::ptrdiff_t hi = std::min(n, lo + kSumLeaf);
    double acc = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) acc += term(i);
    partial[static_cast<std::size_t>(b)] = acc;
  }
  return halving_reduce(partial);
}

// log(sum_i exp(v_i)) over finite-or-(-inf) entries; -inf if all entries are -inf.
double log_sum_exp(const double* v, std::ptrdiff_t n);

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64_file(const std::string& path);  // throws DataError if unreadable
std::string hex64(std::uint64_t v);

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };
LogLevel log_level();  // parsed once from GMCS_LOG (error|warn|info|debug)
void log_line(LogLevel lv, std::string_view msg);

template <class... Ts>
void logf(LogLevel lv, const Ts&... parts) {
  if (static_cast<int>(lv) > static_cast<int>(log_level())) return;
  std::ostringstream os;
  (os << ... << parts);
  log_line(lv, os.str());
}

}  // namespace gmcs

#endif
