#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pdd/tokenizer.h"

namespace pdd {

// Dense row-major matrix. Only what the refiner needs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct TokenizedPrompt {
  std::vector<Token> prefix;
  std::vector<Token> content;
  std::vector<std::uint32_t> sentence_ids;  // parallel to content
  std::vector<Token> suffix;

  std::size_t size() const { return prefix.size() + content.size() + suffix.size(); }
  std::size_t sentence_count() const {
    return sentence_ids.empty() ? 0 : static_cast<std::size_t>(sentence_ids.back()) + 1;
  }
  // Throws InvalidArgument if sentence ids are not contiguous from 0.
  void validate() const;
};

TokenizedPrompt tokenize_prompt(std::string_view prefix, std::string_view content,
                                std::string_view suffix);

class SelectionMask {
 public:
  SelectionMask() = default;
  explicit SelectionMask(std::vector<bool> bits) : bits_(std::move(bits)) {}
  static SelectionMask all_ones(std::size_t l) { return SelectionMask(std::vector<bool>(l, true)); }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  std::size_t popcount() const;
  const std::vector<bool>& bits() const { return bits_; }

  friend bool operator==(const SelectionMask&, const SelectionMask&) = default;

 private:
  std::vector<bool> bits_;
};

struct AttentionInputs {
  Matrix q_window;           // w x h
  Matrix k_full;             // l_k x h
  std::optional<Matrix> v_full;  // l_k x h
};

struct AttentionOutput {
  Matrix weights;                // w x l_k, rows are softmax distributions
  std::optional<Matrix> values;  // weights * V when V was supplied
};

// softmax(Q K^T / sqrt(h)) for one head.
AttentionOutput attention_weights(const AttentionInputs& inputs);

enum class HeadAggregation {
  kSum,        // add pooled scores across heads
  kHeadVotes,  // count heads whose top-k contains the token
};

struct ScoreOptions {
  std::size_t window = 32;  // trailing query rows used for scoring
  std::size_t kernel = 7;   // odd max-pooling width
  HeadAggregation aggregation = HeadAggregation::kSum;
  double vote_ratio = 0.25;  // top-k fraction per head for kHeadVotes
};

struct TokenScores {
  std::vector<double> scores;  // one per content token
  std::size_t pooling_kernel = 1;
};

// Sums each head's last `window` rows over the query axis, restricts to the
// content columns [content_begin, content_begin + content_len), max-pools with
// an edge-truncated window and aggregates heads.
TokenScores score_tokens(std::span<const Matrix> weights_per_head, std::size_t content_begin,
                         std::size_t content_len, const ScoreOptions& options);

// Selected content tokens needed to honour ratio r.
std::size_t content_budget(double r, std::size_t content_len);

// Whole-sentence greedy selection by mean token score (ties to the earlier
// sentence) until the budget is met. Prefix and suffix are always kept.
SelectionMask select_sentences(const TokenizedPrompt& prompt, const TokenScores& scores, double r);

// prefix ++ selected content (original order) ++ suffix.
std::vector<Token> refined_text(const TokenizedPrompt& prompt, const SelectionMask& mask);

}  // namespace pdd
