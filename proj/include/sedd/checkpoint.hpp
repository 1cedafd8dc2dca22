#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sedd/config.hpp"

namespace sedd {

// Checkpoint bytes: "SEDD", a version byte, a little-endian u32 header
// length, a compact JSON header (run config, step, seq_len, rng state, param
// count), raw and EMA parameters as little-endian float32, and a trailing
// CRC-32 (IEEE) of every prior byte. Loading distinguishes truncation, bad
// framing, unsupported version, and checksum mismatch.
inline constexpr uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  int64_t step = 0;
  int seq_len = 0;
  std::array<uint64_t, 4> rng_state{};
  std::vector<float> params;
  std::vector<float> ema;
};

uint32_t crc32_ieee(const void* data, size_t len);

std::string serialize_checkpoint(const Checkpoint& cp);
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sedd
