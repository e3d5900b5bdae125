#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pdd {

// Standard alphabet with '=' padding.
std::string base64_encode(const std::vector<std::uint8_t>& bytes);

// Strict decode: rejects non-alphabet bytes, bad padding and non-canonical
// trailing bits. Throws CodecError.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace pdd
