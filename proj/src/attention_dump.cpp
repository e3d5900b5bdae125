#include "pdd/attention_dump.h"

#include <array>
#include <bit>
#include <istream>
#include <ostream>

#include "pdd/errors.h"

namespace pdd {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'D', 'A', 'W'};
constexpr std::uint32_t kVersion = 1;
// Refuses headers that would allocate more than ~1 GiB of doubles.
constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 27;

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw CodecError("attention dump truncated");
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
         std::uint32_t{b[3]} << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

Matrix read_matrix(std::istream& in, std::uint32_t rows, std::uint32_t cols) {
  Matrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      m(r, c) = static_cast<double>(std::bit_cast<float>(read_u32(in)));
    }
  }
  return m;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double v : m.row(r)) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

}  // namespace

std::vector<Matrix> AttentionDump::head_weights() const {
  if (kind == Kind::kWeights) return weights;
  std::vector<Matrix> out;
  out.reserve(qk.size());
  for (const auto& head : qk) out.push_back(attention_weights(head).weights);
  return out;
}

AttentionDump read_attention_dump(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw CodecError("not an attention dump");
  if (read_u32(in) != kVersion) throw CodecError("unsupported attention dump version");

  AttentionDump d;
  const std::uint32_t kind = read_u32(in);
  if (kind > 1) throw CodecError("unknown attention dump kind");
  d.kind = static_cast<AttentionDump::Kind>(kind);
  const std::uint32_t heads = read_u32(in);
  d.window = read_u32(in);
  d.keys = read_u32(in);
  d.hidden = read_u32(in);
  if (heads == 0) throw CodecError("attention dump has no heads");

  const std::uint64_t per_head =
      d.kind == AttentionDump::Kind::kWeights
          ? std::uint64_t{d.window} * d.keys
          : (std::uint64_t{d.window} + d.keys) * d.hidden;
  if (per_head * heads > kMaxEntries) throw CodecError("attention dump too large");

  for (std::uint32_t i = 0; i < heads; ++i) {
    if (d.kind == AttentionDump::Kind::kWeights) {
      d.weights.push_back(read_matrix(in, d.window, d.keys));
    } else {
      AttentionInputs head;
      head.q_window = read_matrix(in, d.window, d.hidden);
      head.k_full = read_matrix(in, d.keys, d.hidden);
      d.qk.push_back(std::move(head));
    }
  }
  return d;
}

void write_attention_dump(std::ostream& out, const AttentionDump& d) {
  out.write(kMagic.data(), 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(d.kind));
  const std::size_t heads = d.kind == AttentionDump::Kind::kWeights ? d.weights.size() : d.qk.size();
  write_u32(out, static_cast<std::uint32_t>(heads));
  write_u32(out, d.window);
  write_u32(out, d.keys);
  write_u32(out, d.hidden);
  if (d.kind == AttentionDump::Kind::kWeights) {
    for (const auto& m : d.weights) write_matrix(out, m);
  } else {
    for (const auto& head : d.qk) {
      write_matrix(out, head.q_window);
      write_matrix(out, head.k_full);
    }
  }
}

}  // namespace pdd
