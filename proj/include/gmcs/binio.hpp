#ifndef GMCS_BINIO_HPP
#define GMCS_BINIO_HPP

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

namespace gmcs::binio {

// explicit little-endian field IO, independent of host byte order

inline void put_bytes(std::ostream& os, const void* p, std::size_t len) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 8);
}

inline void put_i32(std::ostream& os, std::int32_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline bool get_bytes(std::istream& is, void* p, std::size_t len) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
  return static_cast<std::size_t>(is.gcount()) == len;
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!get_bytes(is, b, 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

inline bool get_i32(std::istream& is, std::int32_t& v) {
  std::uint32_t u;
  if (!get_u32(is, u)) return false;
  v = static_cast<std::int32_t>(u);
  return true;
}

inline bool get_f64(std::istream& is, double& v) {
  std::uint64_t u;
  if (!get_u64(is, u)) return false;
  v = std::bit_cast<double>(u);
  return true;
}

}  // namespace gmcs::binio

#endif
