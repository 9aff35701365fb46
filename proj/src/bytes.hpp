#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace smoekit {

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

// Little-endian append-only byte buffer for the binary file formats.
class ByteWriter {
 public:
  std::vector<uint8_t>& bytes() { return buf_; }
  const std::vector<uint8_t>& bytes() const { return buf_; }
  size_t size() const { return buf_.size(); }

  void raw(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void raw(const uint8_t* p, size_t n) { raw(std::span<const uint8_t>(p, n)); }
  void raw(const char* s, size_t n) {
    raw({reinterpret_cast<const uint8_t*>(s), n});
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void pad_to(size_t alignment) {
    while (buf_.size() % alignment != 0) buf_.push_back(0);
  }

 private:
  std::vector<uint8_t> buf_;
};

// Bounds-checked little-endian reader; out-of-bounds reads raise a format
// error mentioning the bounds so truncated files fail loudly.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

  void require(size_t n, const char* what) const {
    if (n > remaining()) {
      throw Error(ErrorCategory::format,
                  std::string("file out of bounds reading ") + what +
                      " (need " + std::to_string(n) + " bytes, have " +
                      std::to_string(remaining()) + ")");
    }
  }

  std::span<const uint8_t> raw(size_t n, const char* what) {
    require(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  uint32_t u32(const char* what) {
    auto s = raw(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(s[i]) << (8 * i);
    return v;
  }
  uint64_t u64(const char* what) {
    auto s = raw(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(s[i]) << (8 * i);
    return v;
  }
  float f32(const char* what) {
    const uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void seek(size_t pos, const char* what) {
    if (pos > bytes_.size()) {
      throw Error(ErrorCategory::format,
                  std::string("seek out of bounds for ") + what);
    }
    pos_ = pos;
  }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace smoekit
