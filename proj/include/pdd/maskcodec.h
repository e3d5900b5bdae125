#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pdd/refiner.h"

namespace pdd {

// Wire form of a SelectionMask:
//
//   bytes 0..3  bit_length, little-endian uint32
//   bytes 4..   zlib (RFC 1950) stream, level 9, of the bits packed MSB-first
//               and zero-padded to a byte boundary
//
// The container is self-describing; bit_length is kept alongside for callers
// that want it without parsing.
struct CompressedMask {
  std::vector<std::uint8_t> payload;
  std::uint32_t bit_length = 0;

  friend bool operator==(const CompressedMask&, const CompressedMask&) = default;
};

// Bits packed MSB-first, zero-padded. No compression.
std::vector<std::uint8_t> pack_bits(const SelectionMask& mask);

CompressedMask pack(const SelectionMask& mask);

// Throws CodecError on a corrupt or truncated stream and LengthError when the
// stream decodes to fewer bits than declared. Never returns a partial mask.
SelectionMask unpack(const CompressedMask& compressed);

// Reads bit_length from the container header. Throws CodecError if the
// container is shorter than the header.
CompressedMask compressed_mask_from_container(std::vector<std::uint8_t> container);

}  // namespace pdd
