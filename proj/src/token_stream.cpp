#include "token_stream.hpp"

#include "bytes.hpp"

namespace smoekit {

std::vector<uint32_t> load_token_stream(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorCategory::format,
                "token stream " + path + " has size " +
                    std::to_string(bytes.size()) +
                    ", not a multiple of 4 bytes");
  }
  std::vector<uint32_t> ids(bytes.size() / 4);
  for (size_t i = 0; i < ids.size(); ++i) {
    ids[i] = static_cast<uint32_t>(bytes[4 * i]) |
             (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
             (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) |
             (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
  }
  return ids;
}

void save_token_stream(const std::vector<uint32_t>& ids,
                       const std::string& path) {
  ByteWriter w;
  for (uint32_t id : ids) w.u32(id);
  write_file(path, w.bytes());
}

}  // namespace smoekit
