#include "sedd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "sedd/errors.hpp"

static_assert(std::numeric_limits<float>::is_iec559, "float32 storage assumes IEEE-754");

namespace sedd {

using nlohmann::json;

uint32_t crc32_ieee(const void* data, size_t len) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'S', 'E', 'D', 'D'};
constexpr size_t kPrelude = 4 + 1 + 4;  // magic, version, header length

void put_u32(std::string& out, uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>(v >> 8 * k & 0xFF));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

float read_f32(const unsigned char* p) {
  const uint32_t bits = read_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

json header_json(const Checkpoint& cp) {
  return json{{"config", json::parse(serialize_run_config(cp.config))},
              {"param_count", cp.params.size()},
              {"rng_state", cp.rng_state},
              {"seq_len", cp.seq_len},
              {"step", cp.step}};
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& cp) {
  if (cp.ema.size() != cp.params.size())
    throw ArgumentError("checkpoint EMA/parameter size mismatch");
  const std::string header = header_json(cp).dump();  // compact, sorted keys
  std::string out;
  out.reserve(kPrelude + header.size() + cp.params.size() * 8 + 4);
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<uint32_t>(header.size()));
  out += header;
  for (float v : cp.params) put_f32(out, v);
  for (float v : cp.ema) put_f32(out, v);
  put_u32(out, crc32_ieee(out.data(), out.size()));
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kPrelude + 4)
    throw CheckpointTruncatedError("checkpoint shorter than its fixed prelude");
  if (std::memcmp(p, kMagic, 4) != 0)
    throw CheckpointFormatError("checkpoint magic mismatch");
  if (p[4] != kCheckpointVersion)
    throw CheckpointVersionError("unsupported checkpoint version " + std::to_string(p[4]));
  const uint32_t hlen = read_u32(p + 5);
  if (bytes.size() < kPrelude + hlen + 4)
    throw CheckpointTruncatedError("checkpoint truncated inside the header");

  json header;
  try {
    header = json::parse(bytes.substr(kPrelude, hlen));
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("invalid checkpoint header: ") + e.what());
  }

  Checkpoint cp;
  size_t param_count = 0;
  try {
    cp.config = parse_run_config(header.at("config").dump());
    param_count = header.at("param_count").get<size_t>();
    cp.rng_state = header.at("rng_state").get<std::array<uint64_t, 4>>();
    cp.seq_len = header.at("seq_len").get<int>();
    cp.step = header.at("step").get<int64_t>();
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("invalid checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointFormatError(std::string("invalid checkpoint config: ") + e.what());
  }
  if (cp.seq_len != cp.config.seq_len)
    throw CheckpointFormatError("checkpoint seq_len disagrees with its config");

  const size_t expected = kPrelude + hlen + param_count * 8 + 4;
  if (bytes.size() < expected)
    throw CheckpointTruncatedError("checkpoint truncated inside the parameters");
  if (bytes.size() > expected) throw CheckpointFormatError("checkpoint has trailing bytes");

  const uint32_t stored = read_u32(p + expected - 4);
  if (crc32_ieee(bytes.data(), expected - 4) != stored)
    throw CheckpointChecksumError("checkpoint checksum mismatch");

  cp.params.resize(param_count);
  cp.ema.resize(param_count);
  const unsigned char* body = p + kPrelude + hlen;
  for (size_t i = 0; i < param_count; ++i) cp.params[i] = read_f32(body + i * 4);
  body += param_count * 4;
  for (size_t i = 0; i < param_count; ++i) cp.ema[i] = read_f32(body + i * 4);
  return cp;
}

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  const std::string bytes = serialize_checkpoint(cp);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace sedd
