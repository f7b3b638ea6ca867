#pragma once

// MITC binary trace container, its JSON sidecar, and the MI CSV export.
//
// Layout (all integers little-endian u32, floats IEEE-754 binary32 LE):
//   "MITC" | version=1 | T | d | m | V | flags
//   step matrix (T*d, row-major) | gold matrix (m*d, row-major)
//   [flags bit0] T token ids
//   [flags bit1] count, then per entry: byte length + UTF-8 bytes
//   CRC-32 of every preceding byte

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipeaks/error.hpp"
#include "mipeaks/hsic.hpp"
#include "mipeaks/trace.hpp"
#include "mipeaks/trajectory.hpp"

namespace mipeaks::io {

inline constexpr char kTraceMagic[4] = {'M', 'I', 'T', 'C'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::uint32_t kFlagTokenIds = 1u << 0;
inline constexpr std::uint32_t kFlagStrings = 1u << 1;
inline constexpr std::size_t kHeaderBytes = 4 + 6 * 4;

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void raw(const char* s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(s[i]));
  }
  std::vector<std::uint8_t>& buffer() noexcept { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw Truncated(pos_ + n, b_.size(),
                      "truncated input: need at least " + std::to_string(pos_ + n) + " bytes, have " +
                          std::to_string(b_.size()));
    }
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

// Serialises a trace to MITC bytes. Refuses invalid traces before writing.
inline std::vector<std::uint8_t> encode_trace(const RepresentationTrace& trace) {
  validate(trace);
  const auto T = static_cast<std::uint32_t>(trace.steps.rows());
  const auto d = static_cast<std::uint32_t>(trace.steps.cols());
  const auto m = static_cast<std::uint32_t>(trace.gold.rows());
  std::uint32_t flags = 0;
  if (trace.token_ids) flags |= kFlagTokenIds;
  if (trace.token_strings) flags |= kFlagStrings;

  ByteWriter w;
  w.raw(kTraceMagic, 4);
  w.u32(kTraceVersion);
  w.u32(T);
  w.u32(d);
  w.u32(m);
  w.u32(trace.vocab_size);
  w.u32(flags);
  for (float v : trace.steps.flat()) w.f32(v);
  for (float v : trace.gold.flat()) w.f32(v);
  if (trace.token_ids) {
    for (std::uint32_t id : *trace.token_ids) w.u32(id);
  }
  if (trace.token_strings) {
    w.u32(static_cast<std::uint32_t>(trace.token_strings->size()));
    for (const auto& s : *trace.token_strings) {
      w.u32(static_cast<std::uint32_t>(s.size()));
      w.raw(s.data(), s.size());
    }
  }
  const std::uint32_t crc = crc32_of(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

// Parses MITC bytes. Header, size arithmetic and checksum are validated
// before any trace is constructed.
inline RepresentationTrace decode_trace(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kTraceMagic)) throw BadMagic("not an MITC file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kTraceVersion) {
    throw BadVersion("unsupported MITC version " + std::to_string(version));
  }
  const std::uint32_t T = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint32_t m = r.u32();
  const std::uint32_t V = r.u32();
  const std::uint32_t flags = r.u32();
  if ((flags & ~(kFlagTokenIds | kFlagStrings)) != 0) throw ParseError("unknown MITC flag bits");

  // Fixed part of the payload; the string table is sized as it is read.
  const std::uint64_t matrix_bytes = 4ull * (std::uint64_t{T} * d + std::uint64_t{m} * d);
  const std::uint64_t ids_bytes = (flags & kFlagTokenIds) ? 4ull * T : 0;
  const std::uint64_t fixed = kHeaderBytes + matrix_bytes + ids_bytes + ((flags & kFlagStrings) ? 4 : 0) + 4;
  auto truncated = [&](std::uint64_t expected) {
    return Truncated(expected, bytes.size(),
                     "truncated MITC file: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(bytes.size()));
  };
  if (bytes.size() < fixed) throw truncated(fixed);
  std::uint64_t expected = fixed;
  if (flags & kFlagStrings) {
    // Walk the string table lengths so truncation is reported as such rather
    // than as a checksum failure.
    std::uint64_t pos = kHeaderBytes + matrix_bytes + ids_bytes;
    auto u32_at = [&](std::uint64_t at) {
      std::uint32_t v = 0;
      for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[at + k]) << (8 * k);
      return v;
    };
    const std::uint32_t count = u32_at(pos);
    pos += 4;
    for (std::uint32_t i = 0; i < count; ++i) {
      if (bytes.size() < pos + 4 + 4) throw truncated(pos + 4 + 4);
      pos += 4 + std::uint64_t{u32_at(pos)};
      if (bytes.size() < pos + 4) throw truncated(pos + 4);
    }
    expected = pos + 4;
  }
  if (bytes.size() != expected) {
    throw SizeMismatch("MITC size disagrees with header: expected " + std::to_string(expected) + " bytes, got " +
                       std::to_string(bytes.size()));
  }
  const std::uint32_t stored_crc = [&] {
    const auto tail = bytes.subspan(bytes.size() - 4);
    return static_cast<std::uint32_t>(tail[0]) | static_cast<std::uint32_t>(tail[1]) << 8 |
           static_cast<std::uint32_t>(tail[2]) << 16 | static_cast<std::uint32_t>(tail[3]) << 24;
  }();
  const std::uint32_t actual_crc = crc32_of(bytes.first(bytes.size() - 4));
  if (stored_crc != actual_crc) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "MITC checksum mismatch: expected 0x%08x, actual 0x%08x", stored_crc,
                  actual_crc);
    throw ChecksumMismatch(stored_crc, actual_crc, msg);
  }

  RepresentationTrace t;
  t.vocab_size = V;
  std::vector<float> steps(std::size_t{T} * d);
  for (float& v : steps) v = r.f32();
  std::vector<float> gold(std::size_t{m} * d);
  for (float& v : gold) v = r.f32();
  t.steps = MatrixF(T, d, std::move(steps));
  t.gold = MatrixF(m, d, std::move(gold));
  if (flags & kFlagTokenIds) {
    std::vector<std::uint32_t> ids(T);
    for (auto& id : ids) id = r.u32();
    t.token_ids = std::move(ids);
  }
  if (flags & kFlagStrings) {
    const std::uint32_t count = r.u32();
    std::vector<std::string> strings;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t len = r.u32();
      auto s = r.take(len);
      strings.emplace_back(s.begin(), s.end());
    }
    t.token_strings = std::move(strings);
  }
  validate(t);
  return t;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& trace_path) {
  auto p = trace_path;
  p.replace_extension(".json");
  return p;
}

inline nlohmann::json sidecar_json(const RepresentationTrace& t) {
  nlohmann::json j;
  j["gold_pooling"] = to_string(t.gold_pooling);
  j["metadata"] = t.metadata;
  return j;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_file_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Writes the MITC file and, when the trace carries metadata or non-default
// pooling, a JSON sidecar next to it. Returns the MITC byte count.
inline std::size_t write_trace(const RepresentationTrace& trace, const std::filesystem::path& destination) {
  const auto bytes = encode_trace(trace);
  write_file_bytes(destination, bytes);
  if (!trace.metadata.empty() || trace.gold_pooling != GoldPooling::last_token) {
    write_file_text(sidecar_path(destination), sidecar_json(trace).dump(2) + "\n");
  }
  return bytes.size();
}

inline RepresentationTrace read_trace(const std::filesystem::path& source) {
  RepresentationTrace t = decode_trace(read_file_bytes(source));
  const auto side = sidecar_path(source);
  if (std::filesystem::exists(side)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file_bytes(side));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("bad sidecar '" + side.string() + "': " + e.what());
    }
    if (j.contains("gold_pooling")) t.gold_pooling = parse_gold_pooling(j["gold_pooling"].get<std::string>());
    if (j.contains("metadata")) t.metadata = j["metadata"].get<std::map<std::string, std::string>>();
  }
  return t;
}

// "step,mi,is_peak" CSV, LF endings, 9 significant digits.
inline std::string mi_csv(const MiSequence& mi, const PeakReport& report) {
  if (report.length != mi.values.size()) throw ShapeError("peak report length differs from MI sequence");
  std::vector<char> peak(mi.values.size(), 0);
  for (std::size_t i : report.indices) {
    if (i >= peak.size()) throw ShapeError("peak index beyond MI sequence");
    peak[i] = 1;
  }
  std::string out = "step,mi,is_peak\n";
  char buf[64];
  for (std::size_t t = 0; t < mi.values.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%d\n", t, mi.values[t], peak[t] ? 1 : 0);
    out += buf;
  }
  return out;
}

inline std::size_t export_mi_csv(const MiSequence& mi, const PeakReport& report,
                                 const std::filesystem::path& destination) {
  const std::string text = mi_csv(mi, report);
  write_file_text(destination, text);
  return text.size();
}

}  // namespace mipeaks::io
