#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace avood {

// Little-endian stream writer. All binary formats in the library go through
// this so the on-disk layout is byte-identical across platforms.
class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    offset_ += n;
  }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u32(uint32_t v) { store(static_cast<uint64_t>(v), 4); }
  void u64(uint64_t v) { store(v, 8); }
  void f64(double v) { store(std::bit_cast<uint64_t>(v), 8); }
  void f64_array(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) f64(p[i]);
  }
  // u32 length prefix + UTF-8 bytes.
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  size_t offset() const { return offset_; }
  bool good() const { return out_.good(); }

 private:
  void store(uint64_t v, int n) {
    uint8_t buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
    bytes(buf, static_cast<size_t>(n));
  }
  std::ostream& out_;
  size_t offset_ = 0;
};

// Little-endian stream reader tracking the byte offset for error messages.
class LeReader {
 public:
  LeReader(std::istream& in, std::string label) : in_(in), label_(std::move(label)) {}

  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw FormatError(label_ + ": truncated file", offset_);
    offset_ += n;
  }
  uint8_t u8() {
    uint8_t v;
    bytes(&v, 1);
    return v;
  }
  uint32_t u32() { return static_cast<uint32_t>(load(4)); }
  uint64_t u64() { return load(8); }
  double f64() { return std::bit_cast<double>(load(8)); }
  void f64_array(double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) p[i] = f64();
  }
  std::string str(size_t max_len = 1 << 20) {
    const size_t at = offset_;
    const uint32_t len = u32();
    if (len > max_len) throw FormatError(label_ + ": implausible string length", at);
    std::string s(len, '\0');
    if (len > 0) bytes(s.data(), len);
    return s;
  }
  // Reads `n` magic bytes and compares.
  void expect_magic(const char* magic, size_t n) {
    const size_t at = offset_;
    std::vector<char> buf(n);
    bytes(buf.data(), n);
    if (std::memcmp(buf.data(), magic, n) != 0)
      throw FormatError(label_ + ": bad magic", at);
  }
  void expect_eof() {
    char c;
    in_.read(&c, 1);
    if (in_.gcount() != 0) throw FormatError(label_ + ": trailing bytes", offset_);
  }
  size_t offset() const { return offset_; }
  const std::string& label() const { return label_; }

 private:
  uint64_t load(int n) {
    uint8_t buf[8];
    bytes(buf, static_cast<size_t>(n));
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string label_;
  size_t offset_ = 0;
};

// FNV-1a 64-bit; content hashing for checkpoint provenance.
inline uint64_t fnv1a(const void* data, size_t n) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = 14695981039346656037ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace avood
