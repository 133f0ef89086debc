#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace weakrank {

// Little-endian binary encoding, independent of host byte order.

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_u64(out, bits);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("unexpected end of binary stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("unexpected end of binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("unexpected end of binary stream");
  return s;
}

inline void expect_magic(std::istream& in, const char* magic) {
  const std::size_t n = std::strlen(magic);
  std::string got(n, '\0');
  in.read(got.data(), static_cast<std::streamsize>(n));
  if (!in || got != magic)
    throw std::runtime_error(std::string("bad file magic, expected ") + magic);
}

// Stage outputs go to `<path>.tmp` and are renamed into place on success, so
// a crashed run never leaves a truncated file under the final name.
template <typename WriteFn>
void write_file_atomic(const std::string& path, WriteFn&& write_fn, bool binary = false) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc
                                  : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    write_fn(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " -> " + path);
}

inline std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace weakrank
