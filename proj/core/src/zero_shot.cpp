// SPDX-License-Identifier: Apache-2.0
#include "cers/zero_shot.hpp"

#include <cmath>

#include "cers/errors.hpp"
#include "cers/text_metrics.hpp"

namespace cers {

void validate(const PromptSet& prompts) {
  if (prompts.embeddings.rows() < 2)
    throw ConfigError("prompt set needs at least two classes");
  if (prompts.class_names.size() !=
      static_cast<std::size_t>(prompts.embeddings.rows()))
    throw ConfigError("class name / embedding count mismatch");
  if (!(prompts.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  for (Eigen::Index i = 0; i < prompts.embeddings.rows(); ++i) {
    const double norm = prompts.embeddings.row(i).norm();
    if (std::abs(norm - 1.0) > 1e-6)
      throw DataError("prompt embedding for class " +
                      prompts.class_names[static_cast<std::size_t>(i)] +
                      " is not unit-normalized");
  }
}

ZeroShotResult zero_shot_classify(const Eigen::VectorXd& image_embedding,
                                  const PromptSet& prompts) {
  validate(prompts);
  if (image_embedding.size() != prompts.embeddings.cols())
    throw DataError("image embedding dimension mismatch");
  const double norm = image_embedding.norm();
  if (norm == 0.0) throw DataError("image embedding has zero norm");

  ZeroShotResult out;
  out.similarities = prompts.embeddings * (image_embedding / norm);

  const Eigen::VectorXd scaled = out.similarities / prompts.temperature;
  const double m = scaled.maxCoeff();
  Eigen::VectorXd e = (scaled.array() - m).exp();
  out.probs = e / e.sum();

  // Strictly-greater scan keeps ties on the lowest class index.
  out.label = 0;
  for (Eigen::Index i = 1; i < out.similarities.size(); ++i)
    if (out.similarities(i) > out.similarities(out.label)) out.label = static_cast<int>(i);
  return out;
}

AnswerLabel map_answer_to_label(std::string_view text) {
  for (const std::string& token : tokenize(text)) {
    if (token == "yes") return AnswerLabel::positive;
    if (token == "no") return AnswerLabel::negative;
  }
  return AnswerLabel::unparseable;
}

}  // namespace cers
