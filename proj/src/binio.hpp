#pragma once

// Little helpers for the binary checkpoint formats. Host byte order; files are
// not meant to move between architectures.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dghl/error.hpp"

namespace dghl::binio {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64s(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_magic(std::ostream& out, const char (&magic)[9]) { out.write(magic, 8); }

inline void expect(std::istream& in, const char* what) {
  if (!in) throw ParseError(std::string("truncated or unreadable ") + what);
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  expect(in, what);
  return v;
}

inline double read_f64(std::istream& in, const char* what) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  expect(in, what);
  return v;
}

inline void read_f64s(std::istream& in, std::span<double> v, const char* what) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  expect(in, what);
}

inline std::string read_string(std::istream& in, const char* what) {
  const std::uint64_t n = read_u64(in, what);
  if (n > (1u << 30)) throw ParseError(std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  expect(in, what);
  return s;
}

inline void read_magic(std::istream& in, const char (&magic)[9], const char* what) {
  char buf[8] = {};
  in.read(buf, 8);
  expect(in, what);
  if (std::string(buf, 8) != std::string(magic, 8)) {
    throw ParseError(std::string("bad magic in ") + what);
  }
}

}  // namespace dghl::binio
