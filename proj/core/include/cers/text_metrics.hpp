// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cers {

/// Shared caption tokenization: lowercase, punctuation stripped,
/// whitespace split. Tokens emptied by stripping are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// ROUGE-L F1 (beta = 1) from the longest common subsequence. Returns 0
/// when either side is empty or the LCS is empty.
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference);
double rouge_l_text(std::string_view candidate, std::string_view reference);

/// Corpus-level BLEU-n: modified n-gram precisions with uniform weights,
/// geometric mean, brevity penalty exp(1 - r/c) when c < r, and no
/// smoothing (any zero precision zeroes the score).
double bleu_n(const std::vector<std::vector<std::string>>& candidates,
              const std::vector<std::vector<std::string>>& references, int n);
double bleu_n_text(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references, int n);

}  // namespace cers
