#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "ctxtag/errors.hpp"
#include "ctxtag/matrix.hpp"

namespace ctxtag {

// Little-endian binary serialization for model files.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw DataError("cannot write file: " + path);
  }

  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v),
                         static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16),
                         static_cast<std::uint8_t>(v >> 24)};
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void real_value(real v) {
    if constexpr (sizeof(real) == 8) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      u64(bits);
    } else {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      u32(bits);
    }
  }
  void matrix(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (real v : m.data()) real_value(v);
  }
  void close() {
    out_.close();
    if (!out_) throw DataError("write failed: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open file: " + path);
  }

  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw FormatError("truncated file: " + path_);
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }
  real real_value() {
    real v;
    if constexpr (sizeof(real) == 8) {
      const std::uint64_t bits = u64();
      std::memcpy(&v, &bits, 8);
    } else {
      const std::uint32_t bits = u32();
      std::memcpy(&v, &bits, 4);
    }
    return v;
  }
  Matrix matrix() {
    const int rows = static_cast<int>(u32());
    const int cols = static_cast<int>(u32());
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = real_value();
    return m;
  }
  void expect_magic(const char* magic, size_t len, const std::string& what) {
    std::string got(len, '\0');
    bytes(got.data(), len);
    if (std::memcmp(got.data(), magic, len) != 0)
      throw FormatError("bad magic in " + path_ + ": not a " + what + " file");
  }
  // Precision byte is sizeof(real) at save time; mixing builds is an error.
  void expect_precision(std::uint8_t stored) {
    if (stored != sizeof(real))
      throw FormatError("precision mismatch in " + path_ + ": file has " +
                        std::to_string(stored * 8) + "-bit floats, build uses " +
                        std::to_string(sizeof(real) * 8) + "-bit");
  }
  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace ctxtag
