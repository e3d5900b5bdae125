#include "pdd/attention_dump.h"

#include <gtest/gtest.h>

#include <sstream>

#include "pdd/errors.h"
#include "support.h"

namespace pdd {
namespace {

Matrix filled(std::size_t rows, std::size_t cols, double start) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = start + 0.25 * static_cast<double>(r * cols + c);
  }
  return m;
}

TEST(AttentionDump, HeaderLayout) {
  AttentionDump d;
  d.window = 2;
  d.keys = 3;
  d.weights = {filled(2, 3, 0.0)};
  std::ostringstream out;
  write_attention_dump(out, d);
  const std::string bytes = out.str();
  ASSERT_EQ(bytes.size(), 28u + 6 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "PDAW");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(12, 4), std::string("\x01\x00\x00\x00", 4));  // heads
  EXPECT_EQ(bytes.substr(20, 4), std::string("\x03\x00\x00\x00", 4));  // l_k
  // second weight, 0.25f = 0x3e800000 little-endian
  EXPECT_EQ(bytes.substr(32, 4), std::string("\x00\x00\x80\x3e", 4));
}

TEST(AttentionDump, RoundTripWeights) {
  AttentionDump d;
  d.window = 3;
  d.keys = 5;
  d.weights = {filled(3, 5, 0.0), filled(3, 5, 1.0)};
  std::stringstream io;
  write_attention_dump(io, d);
  const auto back = read_attention_dump(io);
  EXPECT_EQ(back.kind, AttentionDump::Kind::kWeights);
  ASSERT_EQ(back.weights.size(), 2u);
  EXPECT_DOUBLE_EQ(back.weights[1](2, 4), 1.0 + 0.25 * 14);
}

TEST(AttentionDump, QueryKeyDumpComputesSoftmax) {
  AttentionDump d;
  d.kind = AttentionDump::Kind::kQueryKey;
  d.window = 2;
  d.keys = 4;
  d.hidden = 3;
  d.qk.push_back(AttentionInputs{filled(2, 3, -0.5), filled(4, 3, -1.0), std::nullopt});
  std::stringstream io;
  write_attention_dump(io, d);
  const auto heads = read_attention_dump(io).head_weights();
  ASSERT_EQ(heads.size(), 1u);
  const auto want = attention_weights(d.qk[0]).weights;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(heads[0](r, c), want(r, c), 1e-7);
  }
}

TEST(AttentionDump, RejectsMalformedInput) {
  std::istringstream bad_magic("XXXX");
  EXPECT_THROW(read_attention_dump(bad_magic), CodecError);

  AttentionDump d;
  d.window = 2;
  d.keys = 2;
  d.weights = {filled(2, 2, 0.0)};
  std::ostringstream out;
  write_attention_dump(out, d);
  std::string bytes = out.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_attention_dump(truncated), CodecError);

  std::string huge = bytes.substr(0, 28);
  huge[16] = huge[17] = huge[18] = '\x7f';  // w ~ 2^31
  std::istringstream too_big(huge);
  EXPECT_THROW(read_attention_dump(too_big), CodecError);

  std::string kind = bytes;
  kind[8] = 7;
  std::istringstream bad_kind(kind);
  EXPECT_THROW(read_attention_dump(bad_kind), CodecError);
}

}  // namespace
}  // namespace pdd
