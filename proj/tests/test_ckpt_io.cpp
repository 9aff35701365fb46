#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "bytes.hpp"
#include "checkpoint.hpp"
#include "ckpt_io.hpp"
#include "error.hpp"
#include "testutil.hpp"

using namespace smoekit;
using namespace testutil;

namespace {

SmoeCheckpoint sample_model() {
  const ModelConfig cfg = tiny_config(4, 16, 3);
  Rng rng(99);
  return init_random(cfg, rng);
}

ErrorCategory load_failure(const std::string& path) {
  try {
    load_checkpoint(path);
  } catch (const Error& e) {
    return e.category();
  }
  FAIL(("expected load to fail for " + path).c_str());
  return ErrorCategory::internal;
}

}  // namespace

TEST_SUITE("ckpt_io") {
  TEST_CASE("save/load round trip preserves every tensor at f32 precision") {
    const SmoeCheckpoint ckpt = sample_model();
    const std::string dir = scratch_dir("ckpt");
    const std::string path = dir + "/m.smoe";
    const Digest digest = save_checkpoint(ckpt, path);
    CHECK(digest == checkpoint_digest(ckpt));

    const SmoeCheckpoint back = load_checkpoint(path);
    CHECK(back.config.d_model == ckpt.config.d_model);
    CHECK(back.config.moe_layer_indices == ckpt.config.moe_layer_indices);
    REQUIRE(back.layers.size() == ckpt.layers.size());
    for (size_t i = 0; i < ckpt.token_embedding.data().size(); ++i) {
      CHECK(back.token_embedding.data()[i] ==
            double(float(ckpt.token_embedding.data()[i])));
    }
    const auto& e0 = ckpt.layers[0].ffn.experts[1];
    const auto& b0 = back.layers[0].ffn.experts[1];
    for (size_t i = 0; i < e0.w_in.data().size(); ++i) {
      CHECK(b0.w_in.data()[i] == double(float(e0.w_in.data()[i])));
    }
  }

  TEST_CASE("two saves produce identical bytes and digest") {
    const SmoeCheckpoint ckpt = sample_model();
    const auto s1 = serialize_checkpoint(ckpt);
    const auto s2 = serialize_checkpoint(ckpt);
    CHECK(s1.bytes == s2.bytes);
    CHECK(s1.digest == s2.digest);
  }

  TEST_CASE("truncated file fails with a bounds error") {
    const SmoeCheckpoint ckpt = sample_model();
    const std::string dir = scratch_dir("trunc");
    const std::string path = dir + "/m.smoe";
    const auto s = serialize_checkpoint(ckpt);
    std::vector<uint8_t> cut(s.bytes.begin(),
                             s.bytes.begin() + s.bytes.size() / 2);
    write_file(path, cut);
    try {
      load_checkpoint(path);
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::format);
      CHECK(std::string(e.what()).find("bounds") != std::string::npos);
    }
  }

  TEST_CASE("flipped payload byte fails the digest check") {
    const SmoeCheckpoint ckpt = sample_model();
    const std::string dir = scratch_dir("corrupt");
    const std::string path = dir + "/m.smoe";
    auto s = serialize_checkpoint(ckpt);
    s.bytes[s.bytes.size() - 200] ^= 0x40;  // inside the payload
    write_file(path, s.bytes);
    CHECK(load_failure(path) == ErrorCategory::digest);
  }

  TEST_CASE("wrong magic fails as a format error") {
    const SmoeCheckpoint ckpt = sample_model();
    const std::string dir = scratch_dir("magic");
    const std::string path = dir + "/m.smoe";
    auto s = serialize_checkpoint(ckpt);
    s.bytes[0] = 'X';
    write_file(path, s.bytes);
    CHECK(load_failure(path) == ErrorCategory::format);
  }

  TEST_CASE("unknown version is reported as a version error") {
    const SmoeCheckpoint ckpt = sample_model();
    const std::string dir = scratch_dir("version");
    const std::string path = dir + "/m.smoe";
    auto s = serialize_checkpoint(ckpt);
    s.bytes[4] = 99;  // version field follows the magic
    write_file(path, s.bytes);
    CHECK(load_failure(path) == ErrorCategory::version);
  }

  TEST_CASE("missing file is an io error") {
    CHECK(load_failure("/nonexistent/path/m.smoe") == ErrorCategory::io);
  }
}
