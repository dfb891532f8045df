// SPDX-License-Identifier: Apache-2.0
#include "cers/text_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "cers/errors.hpp"

namespace cers {

namespace {

// n-gram key: tokens joined with an unprintable separator.
std::unordered_map<std::string, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += tokens[i + static_cast<std::size_t>(k)];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!std::ispunct(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const std::size_t m = candidate.size();
  const std::size_t n = reference.size();

  // LCS length with a rolling row.
  std::vector<std::size_t> prev(n + 1, 0), curr(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        curr[j] = prev[j - 1] + 1;
      else
        curr[j] = std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  const double lcs = static_cast<double>(prev[n]);
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(m);
  const double recall = lcs / static_cast<double>(n);
  return 2.0 * precision * recall / (precision + recall);
}

double rouge_l_text(std::string_view candidate, std::string_view reference) {
  return rouge_l(tokenize(candidate), tokenize(reference));
}

double bleu_n(const std::vector<std::vector<std::string>>& candidates,
              const std::vector<std::vector<std::string>>& references, int n) {
  if (n < 1) throw ConfigError("BLEU order must be >= 1");
  if (candidates.empty()) throw DataError("BLEU: empty corpus");
  if (candidates.size() != references.size())
    throw DataError("BLEU: candidate/reference count mismatch");

  std::vector<std::int64_t> matched(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> total(static_cast<std::size_t>(n), 0);
  std::int64_t cand_len = 0, ref_len = 0;

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += static_cast<std::int64_t>(candidates[i].size());
    ref_len += static_cast<std::int64_t>(references[i].size());
    for (int order = 1; order <= n; ++order) {
      const auto cand_counts = ngram_counts(candidates[i], order);
      const auto ref_counts = ngram_counts(references[i], order);
      for (const auto& [key, count] : cand_counts) {
        const auto it = ref_counts.find(key);
        const int clip = it == ref_counts.end() ? 0 : it->second;
        matched[static_cast<std::size_t>(order - 1)] += std::min(count, clip);
        total[static_cast<std::size_t>(order - 1)] += count;
      }
    }
  }

  double log_sum = 0.0;
  for (int order = 0; order < n; ++order) {
    if (total[static_cast<std::size_t>(order)] == 0 ||
        matched[static_cast<std::size_t>(order)] == 0)
      return 0.0;  // defined-zero, no smoothing
    log_sum += std::log(static_cast<double>(matched[static_cast<std::size_t>(order)]) /
                        static_cast<double>(total[static_cast<std::size_t>(order)]));
  }
  const double geo_mean = std::exp(log_sum / n);
  double brevity = 1.0;
  if (cand_len < ref_len && cand_len > 0)
    brevity = std::exp(1.0 - static_cast<double>(ref_len) /
                                 static_cast<double>(cand_len));
  return brevity * geo_mean;
}

double bleu_n_text(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references, int n) {
  std::vector<std::vector<std::string>> cand_tokens, ref_tokens;
  cand_tokens.reserve(candidates.size());
  ref_tokens.reserve(references.size());
  for (const auto& line : candidates) cand_tokens.push_back(tokenize(line));
  for (const auto& line : references) ref_tokens.push_back(tokenize(line));
  return bleu_n(cand_tokens, ref_tokens, n);
}

}  // namespace cers
