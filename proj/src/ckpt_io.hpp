#pragma once

#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "digest.hpp"

namespace smoekit {

// .smoe container: magic "SMOE", format version u32, header length u64, JSON
// header (config + tensor directory), then 64-byte-aligned little-endian f32
// tensor sections, then a 32-byte SHA-256 footer over everything before it.
// Directory offsets are relative to the start of the payload section, which
// begins at the first 64-byte boundary after the header.

inline constexpr uint32_t kCheckpointVersion = 1;

struct SerializedCheckpoint {
  std::vector<uint8_t> bytes;
  Digest digest;
};

// Canonical byte serialization; two calls on the same checkpoint produce
// identical bytes.
SerializedCheckpoint serialize_checkpoint(const SmoeCheckpoint& ckpt);

// The checkpoint's content digest (the same value save_checkpoint returns and
// traces embed as model_hash).
Digest checkpoint_digest(const SmoeCheckpoint& ckpt);

Digest save_checkpoint(const SmoeCheckpoint& ckpt, const std::string& path);

SmoeCheckpoint load_checkpoint(const std::string& path);

}  // namespace smoekit
