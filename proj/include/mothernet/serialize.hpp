// Little-endian binary primitives shared by the dataset, checkpoint and child
// containers. All on-disk integers are little-endian; floats are IEEE-754
// binary32 in native byte order (the build targets little-endian hosts only).
#pragma once

#include "mothernet/types.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace mothernet {

static_assert(std::endian::native == std::endian::little,
              "serialized containers assume a little-endian host");

inline void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f32(std::ostream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

// Readers throw FormatError with the stream offset so a truncated or
// corrupted container points at where it went wrong.
inline void read_bytes(std::istream& is, void* p, size_t n, const char* what) {
  const auto at = is.tellg();
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) {
    throw FormatError("truncated container while reading " + std::string(what) +
                      " at offset " + std::to_string(static_cast<long long>(at)));
  }
}

inline uint32_t read_u32(std::istream& is, const char* what) {
  uint32_t v = 0;
  read_bytes(is, &v, sizeof v, what);
  return v;
}

inline uint64_t read_u64(std::istream& is, const char* what) {
  uint64_t v = 0;
  read_bytes(is, &v, sizeof v, what);
  return v;
}

inline float read_f32(std::istream& is, const char* what) {
  float v = 0;
  read_bytes(is, &v, sizeof v, what);
  return v;
}

inline std::string read_string(std::istream& is, const char* what) {
  const uint32_t n = read_u32(is, what);
  if (n > (1u << 20)) throw FormatError(std::string("implausible string length for ") + what);
  std::string s(n, '\0');
  read_bytes(is, s.data(), n, what);
  return s;
}

inline void expect_magic(std::istream& is, const char* magic) {
  char buf[8] = {};
  const size_t n = std::strlen(magic);
  read_bytes(is, buf, n, "magic");
  if (std::memcmp(buf, magic, n) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

// Bitmap helpers: bit i of the stream is bit (i % 8) of byte (i / 8).
inline std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& bits) {
  std::vector<uint8_t> out((bits.size() + 7) / 8, 0);
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  }
  return out;
}

inline std::vector<uint8_t> unpack_bits(const std::vector<uint8_t>& bytes, size_t n_bits) {
  std::vector<uint8_t> out(n_bits, 0);
  for (size_t i = 0; i < n_bits; ++i) {
    out[i] = (bytes[i / 8] >> (i % 8)) & 1u;
  }
  return out;
}

}  // namespace mothernet
