// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cers/errors.hpp"
#include "cers/text_metrics.hpp"
#include "cers/zero_shot.hpp"

using namespace cers;

namespace {

PromptSet two_class_prompts(double temperature = 0.07) {
  PromptSet prompts;
  prompts.class_names = {"benign", "malignant"};
  prompts.embeddings.resize(2, 3);
  prompts.embeddings << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
  prompts.temperature = temperature;
  return prompts;
}

}  // namespace

TEST_CASE("matching prompt wins with the larger probability") {
  const PromptSet prompts = two_class_prompts();
  Eigen::VectorXd image(3);
  image << 0.0, 1.0, 0.0;  // equals prompt 1, orthogonal to prompt 0
  const ZeroShotResult result = zero_shot_classify(image, prompts);
  CHECK(result.label == 1);
  CHECK(result.probs(1) > result.probs(0));
  CHECK(result.similarities(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact ties resolve to the lowest class index") {
  PromptSet prompts = two_class_prompts();
  prompts.embeddings.row(1) = prompts.embeddings.row(0);  // identical prompts
  Eigen::VectorXd image(3);
  image << 0.3, 0.4, 0.5;
  CHECK(zero_shot_classify(image, prompts).label == 0);
}

TEST_CASE("softmax of similarities matches the hand value at tau = 1") {
  // Cosines (0.8, 0.2) give softmax (0.6457, 0.3543).
  PromptSet prompts = two_class_prompts(1.0);
  Eigen::VectorXd image(3);
  image << 0.8, 0.2, std::sqrt(1.0 - 0.64 - 0.04);
  const ZeroShotResult result = zero_shot_classify(image, prompts);
  CHECK(result.similarities(0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(result.similarities(1) == doctest::Approx(0.2).epsilon(1e-12));
  const double p0 = std::exp(0.8) / (std::exp(0.8) + std::exp(0.2));
  CHECK(result.probs(0) == doctest::Approx(p0).epsilon(1e-9));
  CHECK(result.probs(0) == doctest::Approx(0.6457).epsilon(1e-3));
}

TEST_CASE("zero-norm image embeddings are rejected") {
  const PromptSet prompts = two_class_prompts();
  CHECK_THROWS_AS(zero_shot_classify(Eigen::VectorXd::Zero(3), prompts), DataError);
}

TEST_CASE("classification is invariant to positive rescaling of the image") {
  const PromptSet prompts = two_class_prompts();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd image(3);
    for (int i = 0; i < 3; ++i) image(i) = normal(rng);
    if (image.norm() == 0.0) continue;
    const ZeroShotResult a = zero_shot_classify(image, prompts);
    const ZeroShotResult b = zero_shot_classify(17.5 * image, prompts);
    CHECK(a.label == b.label);
    CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("prompt sets are validated") {
  PromptSet bad = two_class_prompts();
  bad.embeddings(0, 0) = 2.0;  // no longer unit norm
  Eigen::VectorXd image(3);
  image << 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(zero_shot_classify(image, bad), DataError);

  PromptSet cold = two_class_prompts(0.0);
  CHECK_THROWS_AS(zero_shot_classify(image, cold), ConfigError);
}

TEST_CASE("answer mapping follows the lexicon") {
  CHECK(map_answer_to_label("Yes") == AnswerLabel::positive);
  CHECK(map_answer_to_label("  no.") == AnswerLabel::negative);
  CHECK(map_answer_to_label("possibly malignant") == AnswerLabel::unparseable);
  CHECK(map_answer_to_label("YES, definitely") == AnswerLabel::positive);
  CHECK(map_answer_to_label("No, wait, yes") == AnswerLabel::negative);
  CHECK(map_answer_to_label("") == AnswerLabel::unparseable);
}

TEST_CASE("tokenization lowercases, strips punctuation, and is idempotent") {
  const auto tokens = tokenize("The CAT, sat!  ");
  REQUIRE(tokens.size() == 3);
  CHECK(tokens[0] == "the");
  CHECK(tokens[1] == "cat");
  CHECK(tokens[2] == "sat");

  std::string rejoined;
  for (const auto& t : tokens) rejoined += t + " ";
  CHECK(tokenize(rejoined) == tokens);
}

TEST_CASE("rouge-l hand cases") {
  CHECK(rouge_l_text("the cat sat", "the cat sat") == doctest::Approx(1.0));
  CHECK(rouge_l_text("alpha beta", "gamma delta") == 0.0);
  // LCS("the cat sat", "the cat ate") = 2 -> P = R = 2/3 -> F1 = 2/3.
  CHECK(rouge_l_text("the cat sat", "the cat ate") ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(rouge_l_text("", "the cat") == 0.0);
  CHECK(rouge_l_text("the cat", "") == 0.0);
}

TEST_CASE("rouge-l stays within [0,1] on random token streams") {
  std::mt19937_64 rng(5);
  const char* vocab[] = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> cand, ref;
    for (std::size_t i = 0; i < 1 + rng() % 8; ++i) cand.push_back(vocab[rng() % 4]);
    for (std::size_t i = 0; i < 1 + rng() % 8; ++i) ref.push_back(vocab[rng() % 4]);
    const double score = rouge_l(cand, ref);
    CHECK(score >= 0.0);
    CHECK(score <= 1.0);
    CHECK(rouge_l(cand, cand) == doctest::Approx(1.0));
  }
}

TEST_CASE("bleu hand cases") {
  SUBCASE("identical corpus scores 1") {
    const std::vector<std::string> lines = {"a b c d", "e f g"};
    for (int n : {1, 3}) CHECK(bleu_n_text(lines, lines, n) == doctest::Approx(1.0));
  }
  SUBCASE("two-token candidate has no trigram, so BLEU-3 is zero") {
    CHECK(bleu_n_text({"a b"}, {"a b c"}, 3) == 0.0);
  }
  SUBCASE("three of four unigrams match with no brevity penalty") {
    CHECK(bleu_n_text({"a b c d"}, {"a b c e"}, 1) == doctest::Approx(0.75));
  }
  SUBCASE("brevity penalty applies when the candidate is shorter") {
    // p1 = 1, c = 2, r = 4 -> BLEU = exp(1 - 2).
    CHECK(bleu_n_text({"a b"}, {"a b c d"}, 1) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  }
  SUBCASE("empty corpus is rejected") {
    CHECK_THROWS_AS(bleu_n_text({}, {}, 1), DataError);
  }
  SUBCASE("misaligned corpora are rejected") {
    CHECK_THROWS_AS(bleu_n_text({"a"}, {"a", "b"}, 1), DataError);
  }
}

TEST_CASE("bleu clips repeated n-grams") {
  // Candidate repeats "a" seven times; the reference has two. Clipped
  // precision is 2/7, and the long candidate draws no brevity penalty.
  CHECK(bleu_n_text({"a a a a a a a"}, {"a a b"}, 1) ==
        doctest::Approx(2.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("bleu stays within [0,1] on random corpora") {
  std::mt19937_64 rng(6);
  const char* vocab[] = {"a", "b", "c"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> cand, ref;
    const std::size_t lines = 1 + rng() % 4;
    for (std::size_t l = 0; l < lines; ++l) {
      std::string c, r;
      for (std::size_t i = 0; i < 1 + rng() % 6; ++i) {
        c += vocab[rng() % 3];
        c += ' ';
      }
      for (std::size_t i = 0; i < 1 + rng() % 6; ++i) {
        r += vocab[rng() % 3];
        r += ' ';
      }
      cand.push_back(c);
      ref.push_back(r);
    }
    for (int n : {1, 3, 5}) {
      const double score = bleu_n_text(cand, ref, n);
      CHECK(score >= 0.0);
      CHECK(score <= 1.0 + 1e-12);
    }
    CHECK(bleu_n_text(cand, cand, 1) == doctest::Approx(1.0));
  }
}
