#include "bytes.hpp"

#include <cstdio>

namespace smoekit {

std::vector<uint8_t> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    throw Error(ErrorCategory::io, "cannot open " + path + " for reading");
  }
  std::fseek(f, 0, SEEK_END);
  const long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<uint8_t> bytes(size > 0 ? static_cast<size_t>(size) : 0);
  if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
    std::fclose(f);
    throw Error(ErrorCategory::io, "short read from " + path);
  }
  std::fclose(f);
  return bytes;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) {
    throw Error(ErrorCategory::io, "cannot open " + path + " for writing");
  }
  if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
    std::fclose(f);
    throw Error(ErrorCategory::io, "short write to " + path);
  }
  if (std::fclose(f) != 0) {
    throw Error(ErrorCategory::io, "failed to flush " + path);
  }
}

}  // namespace smoekit
