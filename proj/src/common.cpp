#include "gmcs/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>

namespace gmcs {

double log_sum_exp(const double* v, std::ptrdiff_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::ptrdiff_t i = 0; i < n; ++i) hi = std::max(hi, v[i]);
  if (!std::isfinite(hi)) return hi;  // all -inf (or a stray +inf propagates)
  double acc = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) acc += std::exp(v[i] - hi);
  return hi + std::log(acc);
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

LogLevel log_level() {
  static const LogLevel lv = [] {
    const char* e = std::getenv("GMCS_LOG");
    if (!e) return LogLevel::warn;
    std::string s(e);
    if (s == "error") return LogLevel::error;
    if (s == "warn") return LogLevel::warn;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return lv;
}

void log_line(LogLevel lv, std::string_view msg) {
  static std::mutex mu;
  static const char* tag[] = {"error", "warn", "info", "debug"};
  std::scoped_lock lock(mu);
  std::fprintf(stderr, "gmcs [%s] %.*s\n", tag[static_cast<int>(lv)],
               static_cast<int>(msg.size()), msg.data());
}

}  // namespace gmcs
