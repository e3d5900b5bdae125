#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pdd {

using Token = std::string;

// Reference tokenizer shared by cloud and device: words are maximal runs of
// non-space, non-ASCII-punctuation bytes; every ASCII punctuation character is
// its own token. Bytes >= 0x80 count as word bytes so UTF-8 stays intact.
std::vector<Token> tokenize(std::string_view text);

struct SentenceTokens {
  std::vector<Token> tokens;
  std::vector<std::uint32_t> sentence_ids;  // one per token, contiguous from 0
};

// Tokenizes and assigns sentence ids. A sentence ends after '.', '!' or '?'
// and at every newline.
SentenceTokens tokenize_sentences(std::string_view text);

// Joins tokens with single spaces, omitting the space before punctuation.
std::string detokenize(const std::vector<Token>& tokens);

}  // namespace pdd
