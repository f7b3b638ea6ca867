#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "mipeaks/trace_io.hpp"
#include "support.hpp"

using namespace mipeaks;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mipeaks_trace_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RepresentationTrace tiny() {
  RepresentationTrace t;
  t.steps = MatrixF(1, 1, 0.5f);
  t.gold = MatrixF(1, 1, -1.25f);
  return t;
}

bool same_bits(const MatrixF& a, const MatrixF& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.flat().data(), b.flat().data(), a.flat().size() * sizeof(float)) == 0;
}

}  // namespace

TEST(TraceIo, MinimalLayoutSize) {
  // magic + six u32 header fields + one step value + one gold value + CRC.
  const auto bytes = io::encode_trace(tiny());
  EXPECT_EQ(bytes.size(), 4u + 6u * 4u + 4u + 4u + 4u);
  EXPECT_EQ(bytes.size(), 40u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MITC");
}

TEST(TraceIo, HeaderIsLittleEndian) {
  RepresentationTrace t;
  t.steps = MatrixF(3, 2, 1.0f);
  t.gold = MatrixF(1, 2, 1.0f);
  t.vocab_size = 0x01020304;
  t.token_ids = std::vector<std::uint32_t>{1, 2, 3};
  const auto b = io::encode_trace(t);
  EXPECT_EQ(b[4], 1);   // version
  EXPECT_EQ(b[8], 3);   // T
  EXPECT_EQ(b[12], 2);  // d
  EXPECT_EQ(b[16], 1);  // m
  EXPECT_EQ(b[20], 0x04);
  EXPECT_EQ(b[23], 0x01);
  EXPECT_EQ(b[24], 1);  // flags: ids only
  // 1.0f = 0x3f800000 little-endian.
  EXPECT_EQ(b[28], 0x00);
  EXPECT_EQ(b[31], 0x3f);
}

TEST(TraceIo, FileRoundTripWithSidecar) {
  const auto dir = scratch_dir("roundtrip");
  std::mt19937_64 rng(4);
  auto t = testsupport::random_trace(rng, 7);
  t.gold_pooling = GoldPooling::mean;
  t.metadata = {{"model", "toy"}, {"sample", "17"}};
  const auto n = io::write_trace(t, dir / "a.mitc");
  EXPECT_EQ(n, fs::file_size(dir / "a.mitc"));
  EXPECT_TRUE(fs::exists(dir / "a.json"));
  const auto back = io::read_trace(dir / "a.mitc");
  EXPECT_EQ(back, t);
  EXPECT_TRUE(same_bits(back.steps, t.steps));
  EXPECT_TRUE(same_bits(back.gold, t.gold));
}

TEST(TraceIo, NoSidecarForDefaults) {
  const auto dir = scratch_dir("nosidecar");
  io::write_trace(tiny(), dir / "b.mitc");
  EXPECT_FALSE(fs::exists(dir / "b.json"));
}

TEST(TraceIo, InvalidTraceRefusedBeforeWriting) {
  const auto dir = scratch_dir("refuse");
  auto t = tiny();
  t.token_ids = std::vector<std::uint32_t>{};  // flag would be set but ids missing
  EXPECT_THROW(io::write_trace(t, dir / "c.mitc"), InvalidInput);
  EXPECT_FALSE(fs::exists(dir / "c.mitc"));
}

TEST(TraceIo, RandomRoundTripsAreBitExact) {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 100; ++i) {
    const auto t = testsupport::random_trace(rng, i % 8);
    const auto bytes = io::encode_trace(t);
    const auto back = io::decode_trace(bytes);
    EXPECT_EQ(back, t);
    EXPECT_EQ(io::encode_trace(back), bytes);
  }
}

TEST(TraceIo, CorruptPayloadByteIsChecksumError) {
  auto bytes = io::encode_trace(tiny());
  bytes[30] ^= 0x01;
  try {
    io::decode_trace(bytes);
    FAIL() << "expected a checksum error";
  } catch (const ChecksumMismatch& e) {
    EXPECT_NE(e.expected(), e.actual());
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 0x"), std::string::npos);
    EXPECT_NE(msg.find("actual 0x"), std::string::npos);
  }
}

TEST(TraceIo, TruncatedFileNamesExpectedSize) {
  const auto bytes = io::encode_trace(tiny());
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 5);
  try {
    io::decode_trace(cut);
    FAIL() << "expected a truncation error";
  } catch (const Truncated& e) {
    EXPECT_EQ(e.expected_bytes(), 40u);
    EXPECT_EQ(e.actual_bytes(), 35u);
  }
  const std::vector<std::uint8_t> header_only(bytes.begin(), bytes.begin() + 10);
  EXPECT_THROW(io::decode_trace(header_only), Truncated);
}

TEST(TraceIo, TruncatedStringTable) {
  auto t = tiny();
  t.token_strings = std::vector<std::string>{"alpha", "beta"};
  const auto bytes = io::encode_trace(t);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 6);
  EXPECT_THROW(io::decode_trace(cut), Truncated);
}

TEST(TraceIo, BadMagicAndVersion) {
  auto bytes = io::encode_trace(tiny());
  auto m = bytes;
  m[0] = 'X';
  EXPECT_THROW(io::decode_trace(m), BadMagic);
  auto v = bytes;
  v[4] = 2;
  EXPECT_THROW(io::decode_trace(v), BadVersion);
}

TEST(TraceIo, TrailingBytesAreSizeMismatch) {
  auto bytes = io::encode_trace(tiny());
  bytes.push_back(0);
  EXPECT_THROW(io::decode_trace(bytes), SizeMismatch);
}

TEST(TraceIo, ParseErrorsAreReproducible) {
  auto bytes = io::encode_trace(tiny());
  bytes[33] ^= 0xff;
  std::string first, second;
  try {
    io::decode_trace(bytes);
  } catch (const ParseError& e) {
    first = e.what();
  }
  try {
    io::decode_trace(bytes);
  } catch (const ParseError& e) {
    second = e.what();
  }
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, second);
}

TEST(PooledGold, Modes) {
  RepresentationTrace t;
  t.steps = MatrixF(1, 2, 0.0f);
  t.gold = MatrixF(2, 2, std::vector<float>{0, 0, 2, 4});
  t.gold_pooling = GoldPooling::mean;
  EXPECT_EQ(pooled_gold(t), (std::vector<double>{1, 2}));
  t.gold_pooling = GoldPooling::last_token;
  EXPECT_EQ(pooled_gold(t), (std::vector<double>{2, 4}));

  RepresentationTrace s;
  s.steps = MatrixF(1, 1, 0.0f);
  s.gold = MatrixF(3, 1, std::vector<float>{1, 2, 3});
  EXPECT_EQ(pooled_gold(s), std::vector<double>{3});
  s.gold = MatrixF(1, 1, 5.0f);
  EXPECT_EQ(pooled_gold(s), std::vector<double>{5});
  s.gold_pooling = GoldPooling::mean;
  EXPECT_EQ(pooled_gold(s), std::vector<double>{5});
}

TEST(MiCsv, Format) {
  MiSequence mi;
  mi.values = {0.1, 0.123456789012, 1e-20};
  PeakReport r;
  r.length = 3;
  r.indices = {1};
  const std::string csv = io::mi_csv(mi, r);
  EXPECT_EQ(csv, "step,mi,is_peak\n0,0.1,0\n1,0.123456789,1\n2,1e-20,0\n");
  r.indices.clear();
  EXPECT_EQ(io::mi_csv(mi, r), "step,mi,is_peak\n0,0.1,0\n1,0.123456789,0\n2,1e-20,0\n");
}

TEST(MiCsv, ExportIsDeterministic) {
  const auto dir = scratch_dir("csv");
  MiSequence mi;
  mi.values = {0.5, 0.25};
  PeakReport r;
  r.length = 2;
  const auto n = io::export_mi_csv(mi, r, dir / "a.csv");
  io::export_mi_csv(mi, r, dir / "b.csv");
  EXPECT_EQ(n, fs::file_size(dir / "a.csv"));
  EXPECT_EQ(io::read_file_bytes(dir / "a.csv"), io::read_file_bytes(dir / "b.csv"));
}

TEST(MiCsv, LengthMismatchThrows) {
  MiSequence mi;
  mi.values = {0.5, 0.25};
  PeakReport r;
  r.length = 3;
  EXPECT_THROW(io::mi_csv(mi, r), ShapeError);
}
