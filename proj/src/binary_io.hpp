#pragma once

// Little-endian primitives shared by the checkpoint and feature-file codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "senti/errors.hpp"

namespace senti::binary {

template <typename U>
void write_uint(std::ostream& os, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes, sizeof(U));
}

inline void write_f64(std::ostream& os, double v) { write_uint(os, std::bit_cast<std::uint64_t>(v)); }
inline void write_f32(std::ostream& os, float v) { write_uint(os, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  template <typename U>
  U read_uint(const char* what) {
    unsigned char bytes[sizeof(U)];
    read_bytes(reinterpret_cast<char*>(bytes), sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
  }

  double read_f64(const char* what) { return std::bit_cast<double>(read_uint<std::uint64_t>(what)); }
  float read_f32(const char* what) { return std::bit_cast<float>(read_uint<std::uint32_t>(what)); }

  std::string read_string(std::size_t n, const char* what) {
    std::string s(n, '\0');
    read_bytes(s.data(), n, what);
    return s;
  }

  void read_bytes(char* out, std::size_t n, const char* what) {
    is_.read(out, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) fail(std::string("truncated while reading ") + what);
    offset_ += n;
  }

  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }
  std::uint64_t offset() const { return offset_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(source_ + ": " + message + " at byte offset " + std::to_string(offset_));
  }

 private:
  std::istream& is_;
  std::string source_;
  std::uint64_t offset_ = 0;
};

}  // namespace senti::binary
