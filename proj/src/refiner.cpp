#include "pdd/refiner.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdd/errors.h"

namespace pdd {

namespace {

void require_finite(const Matrix& m, const char* name) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double v : m.row(r)) {
      if (!std::isfinite(v)) throw InvalidArgument(std::string(name) + " has a non-finite entry");
    }
  }
}

std::vector<double> max_pool(const std::vector<double>& in, std::size_t kernel) {
  const std::size_t half = kernel / 2;
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(in.size() - 1, i + half);
    out[i] = *std::max_element(in.begin() + static_cast<std::ptrdiff_t>(lo),
                               in.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  }
  return out;
}

}  // namespace

void TokenizedPrompt::validate() const {
  if (sentence_ids.size() != content.size()) {
    throw InvalidArgument("sentence ids must be parallel to content tokens");
  }
  for (std::size_t i = 0; i < sentence_ids.size(); ++i) {
    const std::uint32_t expected_lo = i == 0 ? 0 : sentence_ids[i - 1];
    if (sentence_ids[i] != expected_lo && sentence_ids[i] != expected_lo + 1) {
      throw InvalidArgument("sentence ids must be contiguous and nondecreasing");
    }
  }
  if (!sentence_ids.empty() && sentence_ids.front() != 0) {
    throw InvalidArgument("sentence ids must start at 0");
  }
}

TokenizedPrompt tokenize_prompt(std::string_view prefix, std::string_view content,
                                std::string_view suffix) {
  TokenizedPrompt p;
  p.prefix = tokenize(prefix);
  auto body = tokenize_sentences(content);
  p.content = std::move(body.tokens);
  p.sentence_ids = std::move(body.sentence_ids);
  p.suffix = tokenize(suffix);
  return p;
}

std::size_t SelectionMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

AttentionOutput attention_weights(const AttentionInputs& in) {
  const Matrix& q = in.q_window;
  const Matrix& k = in.k_full;
  const std::size_t h = q.cols();
  if (h == 0) throw DimensionMismatch("hidden size must be positive");
  if (k.cols() != h) throw DimensionMismatch("Q and K hidden sizes differ");
  if (q.rows() > k.rows()) throw DimensionMismatch("observation window longer than key set");
  if (in.v_full && (in.v_full->rows() != k.rows() || in.v_full->cols() != h)) {
    throw DimensionMismatch("V must be l_k x h");
  }
  require_finite(q, "Q");
  require_finite(k, "K");
  if (in.v_full) require_finite(*in.v_full, "V");

  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  AttentionOutput out{Matrix(q.rows(), k.rows()), std::nullopt};
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto logits = out.weights.row(i);
    const auto qi = q.row(i);
    for (std::size_t j = 0; j < k.rows(); ++j) {
      const auto kj = k.row(j);
      logits[j] = std::inner_product(qi.begin(), qi.end(), kj.begin(), 0.0) * scale;
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& v : logits) {
      v = std::exp(v - peak);
      total += v;
    }
    for (double& v : logits) v /= total;
  }

  if (in.v_full) {
    const Matrix& v = *in.v_full;
    Matrix values(q.rows(), h);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      for (std::size_t j = 0; j < v.rows(); ++j) {
        const double w = out.weights(i, j);
        for (std::size_t c = 0; c < h; ++c) values(i, c) += w * v(j, c);
      }
    }
    out.values = std::move(values);
  }
  return out;
}

TokenScores score_tokens(std::span<const Matrix> heads, std::size_t content_begin,
                         std::size_t content_len, const ScoreOptions& options) {
  if (heads.empty()) throw InvalidArgument("score_tokens needs at least one head");
  if (options.kernel == 0 || options.kernel % 2 == 0) {
    throw InvalidArgument("pooling kernel must be odd and positive");
  }
  if (options.window == 0) throw InvalidArgument("observation window must be positive");
  const std::size_t l_k = heads.front().cols();
  if (content_begin + content_len > l_k) {
    throw DimensionMismatch("content range exceeds key length");
  }

  std::vector<std::vector<double>> pooled;
  pooled.reserve(heads.size());
  for (const Matrix& m : heads) {
    if (m.cols() != l_k) throw DimensionMismatch("heads disagree on key length");
    const std::size_t rows = std::min(options.window, m.rows());
    std::vector<double> col_sum(content_len, 0.0);
    for (std::size_t r = m.rows() - rows; r < m.rows(); ++r) {
      const auto row = m.row(r);
      for (std::size_t j = 0; j < content_len; ++j) col_sum[j] += row[content_begin + j];
    }
    pooled.push_back(max_pool(col_sum, options.kernel));
  }

  TokenScores out{std::vector<double>(content_len, 0.0), options.kernel};
  if (options.aggregation == HeadAggregation::kSum) {
    for (const auto& p : pooled) {
      for (std::size_t j = 0; j < content_len; ++j) out.scores[j] += p[j];
    }
    return out;
  }

  const std::size_t k = content_budget(options.vote_ratio, content_len);
  std::vector<std::size_t> order(content_len);
  for (const auto& p : pooled) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    for (std::size_t i = 0; i < k; ++i) out.scores[order[i]] += 1.0;
  }
  return out;
}

std::size_t content_budget(double r, std::size_t content_len) {
  // The small slack keeps products like 0.07 * 100 = 7.000000000000001 from
  // rounding up a whole token.
  const double raw = r * static_cast<double>(content_len);
  const auto budget = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(budget, content_len);
}

SelectionMask select_sentences(const TokenizedPrompt& prompt, const TokenScores& scores,
                               double r) {
  if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("ratio r must lie in (0, 1]");
  prompt.validate();
  if (scores.scores.size() != prompt.content.size()) {
    throw DimensionMismatch("one score per content token required");
  }

  const std::size_t n_content = prompt.content.size();
  const std::size_t n_sent = prompt.sentence_count();
  std::vector<double> sum(n_sent, 0.0);
  std::vector<std::size_t> len(n_sent, 0);
  for (std::size_t i = 0; i < n_content; ++i) {
    sum[prompt.sentence_ids[i]] += scores.scores[i];
    ++len[prompt.sentence_ids[i]];
  }

  std::vector<std::size_t> order(n_sent);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sum[a] / static_cast<double>(len[a]) > sum[b] / static_cast<double>(len[b]);
  });

  const std::size_t budget = content_budget(r, n_content);
  std::vector<bool> chosen(n_sent, false);
  std::size_t taken = 0;
  for (std::size_t s : order) {
    if (taken >= budget) break;
    chosen[s] = true;
    taken += len[s];
  }

  std::vector<bool> bits(prompt.size(), true);
  const std::size_t base = prompt.prefix.size();
  for (std::size_t i = 0; i < n_content; ++i) bits[base + i] = chosen[prompt.sentence_ids[i]];
  return SelectionMask(std::move(bits));
}

std::vector<Token> refined_text(const TokenizedPrompt& prompt, const SelectionMask& mask) {
  if (mask.size() != prompt.size()) {
    throw DimensionMismatch("mask length " + std::to_string(mask.size()) +
                            " does not match prompt length " + std::to_string(prompt.size()));
  }
  std::vector<Token> out;
  out.reserve(mask.popcount());
  std::size_t pos = 0;
  for (const auto* part : {&prompt.prefix, &prompt.content, &prompt.suffix}) {
    for (const auto& t : *part) {
      if (mask[pos++]) out.push_back(t);
    }
  }
  return out;
}

}  // namespace pdd
