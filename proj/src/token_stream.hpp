#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace smoekit {

// Reads a raw token stream: little-endian unsigned 32-bit ids, no header.
std::vector<uint32_t> load_token_stream(const std::string& path);

void save_token_stream(const std::vector<uint32_t>& ids,
                       const std::string& path);

}  // namespace smoekit
