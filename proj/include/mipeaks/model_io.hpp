#pragma once

// Toy-model weights: an MITW binary of little-endian binary32 values plus a
// JSON manifest (same basename, .json) carrying config and tensor shapes.
//
//   "MITW" | version=1 | count | count * f32 | CRC-32 of preceding bytes

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipeaks/error.hpp"
#include "mipeaks/toy_model.hpp"
#include "mipeaks/trace_io.hpp"

namespace mipeaks::io {

inline constexpr char kWeightsMagic[4] = {'M', 'I', 'T', 'W'};
inline constexpr std::uint32_t kWeightsVersion = 1;

inline nlohmann::json config_json(const toy::ToyConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"model_dim", c.model_dim}, {"layers", c.layers},
          {"heads", c.heads},           {"context", c.context},     {"ffn_mult", c.ffn_mult},
          {"seed", c.seed}};
}

inline toy::ToyConfig config_from_json(const nlohmann::json& j) {
  toy::ToyConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.model_dim = j.at("model_dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.context = j.at("context").get<std::size_t>();
  c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

inline std::vector<std::uint8_t> encode_weights(const toy::ToyTransformer& m) {
  ByteWriter w;
  w.raw(kWeightsMagic, 4);
  w.u32(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(m.params().size()));
  for (double v : m.params()) w.f32(static_cast<float>(v));
  w.u32(crc32_of(w.buffer()));
  return std::move(w.buffer());
}

inline std::vector<double> decode_weights(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kWeightsMagic)) throw BadMagic("not an MITW file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kWeightsVersion) throw BadVersion("unsupported MITW version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  const std::uint64_t expected = 12 + 4ull * count + 4;
  if (bytes.size() < expected) {
    throw Truncated(expected, bytes.size(), "truncated MITW file: expected " + std::to_string(expected) + " bytes");
  }
  if (bytes.size() != expected) throw SizeMismatch("MITW size disagrees with header");
  ByteReader tail(bytes.subspan(bytes.size() - 4));
  const std::uint32_t stored = tail.u32();
  const std::uint32_t actual = crc32_of(bytes.first(bytes.size() - 4));
  if (stored != actual) throw ChecksumMismatch(stored, actual, "MITW checksum mismatch");
  std::vector<double> params(count);
  for (double& v : params) v = r.f32();
  return params;
}

inline nlohmann::json weights_manifest(const toy::ToyTransformer& m, std::uint32_t crc) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : m.layout().tensors) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}});
  }
  return {{"format", "MITW"},
          {"version", kWeightsVersion},
          {"dtype", "float32-le"},
          {"config", config_json(m.config())},
          {"parameter_count", m.params().size()},
          {"tensors", tensors},
          {"crc32", crc}};
}

// Writes <path> (MITW) and its manifest; returns the MITW byte count.
inline std::size_t save_weights(const toy::ToyTransformer& m, const std::filesystem::path& path) {
  const auto bytes = encode_weights(m);
  ByteReader tail{std::span<const std::uint8_t>(bytes).subspan(bytes.size() - 4)};
  write_file_bytes(path, bytes);
  write_file_text(sidecar_path(path), weights_manifest(m, tail.u32()).dump(2) + "\n");
  return bytes.size();
}

inline toy::ToyTransformer load_weights(const std::filesystem::path& path) {
  const auto manifest_path = sidecar_path(path);
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("weights manifest '" + manifest_path.string() + "' is missing");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file_bytes(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad weights manifest: " + std::string(e.what()));
  }
  toy::ToyConfig config;
  try {
    config = config_from_json(manifest.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad weights manifest config: " + std::string(e.what()));
  }
  return toy::ToyTransformer(config, decode_weights(read_file_bytes(path)));
}

}  // namespace mipeaks::io
