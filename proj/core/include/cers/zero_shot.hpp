// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

namespace cers {

/// Class-specific prompt embeddings for similarity-based classification.
struct PromptSet {
  std::vector<std::string> class_names;
  Eigen::MatrixXd embeddings;  // C x M, rows unit-normalized
  double temperature = 0.07;
};

/// Enforces the invariants: >= 2 classes, unit-norm rows (1e-6), tau > 0.
void validate(const PromptSet& prompts);

struct ZeroShotResult {
  int label = 0;
  Eigen::VectorXd probs;         // softmax(similarity / tau)
  Eigen::VectorXd similarities;  // cosine per class
};

/// Cosine similarity against every prompt; argmax wins, ties resolve to the
/// lowest class index. Zero-norm image embeddings are rejected.
ZeroShotResult zero_shot_classify(const Eigen::VectorXd& image_embedding,
                                  const PromptSet& prompts);

enum class AnswerLabel { positive, negative, unparseable };

/// Maps a free-text answer onto a binary label: lowercase, strip
/// punctuation, whitespace split, first token in either lexicon wins.
AnswerLabel map_answer_to_label(std::string_view text);

}  // namespace cers
