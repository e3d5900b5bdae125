#include "pdd/maskcodec.h"

#include <zlib.h>

#include <array>
#include <limits>

#include "pdd/errors.h"

namespace pdd {

namespace {

constexpr int kLevel = 9;
constexpr std::size_t kHeaderBytes = 4;

std::vector<std::uint8_t> deflate_bytes(const std::vector<std::uint8_t>& raw) {
  z_stream zs{};
  if (deflateInit2(&zs, kLevel, Z_DEFLATED, 15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw CodecError("deflateInit failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())));
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw CodecError("deflate did not finish");
  out.resize(produced);
  return out;
}

// Inflates the whole stream, refusing to grow past `expected` bytes so a forged
// header or stream cannot force a large allocation.
std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> stream,
                                        std::size_t expected) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw CodecError("inflateInit failed");
  std::vector<std::uint8_t> out;
  out.reserve(std::min<std::size_t>(expected, 1 << 20));
  std::array<std::uint8_t, 4096> chunk{};
  zs.next_in = const_cast<Bytef*>(stream.data());
  zs.avail_in = static_cast<uInt>(stream.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw CodecError(rc == Z_BUF_ERROR ? "mask stream truncated" : "mask stream corrupt");
    }
    const std::size_t got = chunk.size() - zs.avail_out;
    if (out.size() + got > expected) {
      inflateEnd(&zs);
      throw CodecError("mask stream longer than declared bit length");
    }
    out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(got));
    if (rc == Z_OK && got == 0 && zs.avail_in == 0) {
      inflateEnd(&zs);
      throw CodecError("mask stream truncated");
    }
  }
  const bool trailing = zs.avail_in != 0;
  inflateEnd(&zs);
  if (trailing) throw CodecError("bytes after end of mask stream");
  return out;
}

}  // namespace

std::vector<std::uint8_t> pack_bits(const SelectionMask& mask) {
  std::vector<std::uint8_t> raw((mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) raw[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return raw;
}

CompressedMask pack(const SelectionMask& mask) {
  if (mask.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("mask longer than 2^32-1 bits");
  }
  const auto bits = static_cast<std::uint32_t>(mask.size());
  CompressedMask out;
  out.bit_length = bits;
  out.payload = {static_cast<std::uint8_t>(bits & 0xff), static_cast<std::uint8_t>(bits >> 8),
                 static_cast<std::uint8_t>(bits >> 16), static_cast<std::uint8_t>(bits >> 24)};
  const auto stream = deflate_bytes(pack_bits(mask));
  out.payload.insert(out.payload.end(), stream.begin(), stream.end());
  return out;
}

CompressedMask compressed_mask_from_container(std::vector<std::uint8_t> container) {
  if (container.size() < kHeaderBytes) throw CodecError("mask container shorter than header");
  CompressedMask out;
  out.bit_length = std::uint32_t{container[0]} | std::uint32_t{container[1]} << 8 |
                   std::uint32_t{container[2]} << 16 | std::uint32_t{container[3]} << 24;
  out.payload = std::move(container);
  return out;
}

SelectionMask unpack(const CompressedMask& c) {
  const CompressedMask parsed = compressed_mask_from_container(c.payload);
  if (parsed.bit_length != c.bit_length) {
    throw LengthError("container header disagrees with declared bit length");
  }
  const std::size_t expected = (std::size_t{c.bit_length} + 7) / 8;
  const auto raw = inflate_bytes(std::span(c.payload).subspan(kHeaderBytes), expected);
  if (raw.size() < expected) {
    throw LengthError("mask stream holds " + std::to_string(raw.size() * 8) +
                      " bits, header declares " + std::to_string(c.bit_length));
  }
  const std::size_t tail = c.bit_length % 8;
  if (tail != 0 && (raw.back() & (0xffu >> tail)) != 0) {
    throw CodecError("nonzero padding bits in mask stream");
  }
  std::vector<bool> bits(c.bit_length);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (raw[i / 8] >> (7 - i % 8)) & 1u;
  return SelectionMask(std::move(bits));
}

}  // namespace pdd
