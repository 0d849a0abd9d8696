#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hire/linalg.hpp"

namespace hire {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary file formats. All integers are little-endian u32, all reals are
// 32-bit IEEE-754 little-endian, matrices are column-major.
//
//   HIRM  magic "HIRM", u32 rows, u32 cols, rows*cols f32
//   HIRV  magic "HIRV", u32 dim, dim f32
//   HIRQ  magic "HIRQ", u32 d, u32 l, l f32 scales, then d*l signed 4-bit
//         codes packed two per byte, low nibble first, column-major,
//         zero-padded to a whole byte
//   HIRL  magic "HIRL", u32 d, u32 l, u32 r, Z1 (d x r) then Z2 (l x r)
//         payloads, HIRM-style
//   HIRF  magic "HIRF", u32 d, u32 m, u32 g, u32 m1, U (d x m) then
//         V (d x m) payloads, HIRM-style

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {
      static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
      static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(bytes, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char bytes[4];
  is.read(reinterpret_cast<char*>(bytes), 4);
  if (!is) throw IoError("io: truncated file (u32)");
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void put_f32(std::ostream& os, float f) {
  put_u32(os, std::bit_cast<std::uint32_t>(f));
}

inline float get_f32(std::istream& is) {
  return std::bit_cast<float>(get_u32(is));
}

inline void put_magic(std::ostream& os, const char* magic) {
  os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char* magic) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw IoError(std::string("io: bad magic, expected ") + magic);
}

inline void put_f32_block(std::ostream& os, const std::vector<float>& v) {
  for (float f : v) put_f32(os, f);
}

inline std::vector<float> get_f32_block(std::istream& is, std::size_t n) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = get_f32(is);
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("io: cannot open for write: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("io: cannot open for read: " + path);
  return is;
}

}  // namespace detail

inline void write_matrix(std::ostream& os, const ScoreMatrix& z) {
  detail::put_magic(os, "HIRM");
  detail::put_u32(os, static_cast<std::uint32_t>(z.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(z.cols()));
  detail::put_f32_block(os, z.values());
}

inline ScoreMatrix read_matrix(std::istream& is) {
  detail::expect_magic(is, "HIRM");
  const std::uint32_t rows = detail::get_u32(is);
  const std::uint32_t cols = detail::get_u32(is);
  return ScoreMatrix(rows, cols,
                     detail::get_f32_block(is, std::size_t(rows) * cols));
}

inline void write_vector(std::ostream& os, const std::vector<float>& v) {
  detail::put_magic(os, "HIRV");
  detail::put_u32(os, static_cast<std::uint32_t>(v.size()));
  detail::put_f32_block(os, v);
}

inline std::vector<float> read_vector(std::istream& is) {
  detail::expect_magic(is, "HIRV");
  const std::uint32_t dim = detail::get_u32(is);
  return detail::get_f32_block(is, dim);
}

inline void write_matrix_file(const std::string& path, const ScoreMatrix& z) {
  auto os = detail::open_out(path);
  write_matrix(os, z);
  if (!os) throw IoError("io: write failed: " + path);
}

inline ScoreMatrix read_matrix_file(const std::string& path) {
  auto is = detail::open_in(path);
  return read_matrix(is);
}

inline void write_vector_file(const std::string& path,
                              const std::vector<float>& v) {
  auto os = detail::open_out(path);
  write_vector(os, v);
  if (!os) throw IoError("io: write failed: " + path);
}

inline std::vector<float> read_vector_file(const std::string& path) {
  auto is = detail::open_in(path);
  return read_vector(is);
}

}  // namespace hire
