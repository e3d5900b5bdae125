#include "pdd/tokenizer.h"

namespace pdd {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(unsigned char c) {
  return c < 0x80 && ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
                      (c >= 123 && c <= 126));
}

bool ends_sentence(const Token& t) { return t == "." || t == "!" || t == "?"; }

template <typename OnToken, typename OnNewline>
void scan(std::string_view text, OnToken on_token, OnNewline on_newline) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      if (c == '\n') on_newline();
      ++i;
    } else if (is_punct(c)) {
      on_token(Token(1, text[i]));
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && !is_space(static_cast<unsigned char>(text[j])) &&
             !is_punct(static_cast<unsigned char>(text[j]))) {
        ++j;
      }
      on_token(Token(text.substr(i, j - i)));
      i = j;
    }
  }
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  scan(text, [&](Token t) { out.push_back(std::move(t)); }, [] {});
  return out;
}

SentenceTokens tokenize_sentences(std::string_view text) {
  SentenceTokens out;
  std::uint32_t sentence = 0;
  bool open = false;  // current sentence has at least one token
  auto close = [&] {
    if (open) {
      ++sentence;
      open = false;
    }
  };
  scan(
      text,
      [&](Token t) {
        const bool terminal = ends_sentence(t);
        out.tokens.push_back(std::move(t));
        out.sentence_ids.push_back(sentence);
        open = true;
        if (terminal) close();
      },
      close);
  return out;
}

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    const bool punct = t.size() == 1 && is_punct(static_cast<unsigned char>(t[0]));
    if (!out.empty() && !punct) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace pdd
