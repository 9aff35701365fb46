#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace smoekit {

using Digest = std::array<uint8_t, 32>;

// SHA-256 of the given bytes.
Digest sha256(std::span<const uint8_t> bytes);

std::string digest_hex(const Digest& d);

}  // namespace smoekit
