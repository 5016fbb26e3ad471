#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <gcst/scoring.hpp>

#include "support/toy.hpp"

using namespace gcst;

TEST_CASE("score is one similarity per label") {
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  std::vector<EmbeddingVector> prompts(2, Eigen::VectorXd::Zero(2));
  prompts[0] << 2.0, 0.0;
  prompts[1] << 0.0, 3.0;

  const auto row = score(x, prompts, SimilarityKind::dot);
  CHECK(row[0] == doctest::Approx(2.0));
  CHECK(row[1] == doctest::Approx(0.0));

  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  std::vector<EmbeddingVector> orth(2, Eigen::VectorXd::Zero(2));
  orth[0] << 1.0, 0.0;
  orth[1] = y;
  const auto cos_row = score(y, orth, SimilarityKind::cosine);
  CHECK(cos_row[1] == doctest::Approx(1.0));
}

TEST_CASE("predict takes the argmax with the lowest-index tie break") {
  SimilarityRow row(2);
  row << 0.1, 0.9;
  CHECK(predict(row) == 1);
  row << 0.5, 0.5;
  CHECK(predict(row) == 0);
  row << 2.0, 0.0;
  CHECK(predict(row) == 0);
}

TEST_CASE("prediction distribution is a stable softmax") {
  SimilarityRow row(2);
  row << 0.0, 0.0;
  auto dist = prediction_distribution(row);
  CHECK(dist.probs[0] == doctest::Approx(0.5));
  CHECK(dist.probs[1] == doctest::Approx(0.5));
  CHECK(dist.predicted == 0);

  row << std::log(3.0), 0.0;
  dist = prediction_distribution(row);
  CHECK(dist.probs[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(dist.probs[1] == doctest::Approx(0.25).epsilon(1e-12));

  row << 1000.0, 0.0;
  dist = prediction_distribution(row);
  CHECK(dist.probs.allFinite());
  CHECK(dist.probs[0] == doctest::Approx(1.0));
  CHECK(dist.probs.sum() == doctest::Approx(1.0));
}

TEST_CASE("soft target sharpens the prediction distribution") {
  SimilarityRow row(2);
  row << 2.0, 1.0;

  const auto at_one = soft_target(row, 1.0);
  const auto probs = prediction_distribution(row).probs;
  CHECK((at_one.weights - probs).lpNorm<Eigen::Infinity>() < 1e-15);

  const auto sharp = soft_target(row, 0.5);
  CHECK(sharp.weights[0] == doctest::Approx(0.88079707797788244).epsilon(1e-14));
  CHECK(sharp.weights[1] == doctest::Approx(0.11920292202211756).epsilon(1e-14));

  CHECK_THROWS_AS(soft_target(row, 0.0), Error);
  CHECK_THROWS_AS(soft_target(row, 1.5), Error);
  CHECK_THROWS_AS(soft_target(row, -0.1), Error);
}

TEST_CASE("distributions sum to one and share their argmax") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const int labels = 2 + static_cast<int>(uniform_index(rng, 5));
    SimilarityRow row(labels);
    for (int i = 0; i < labels; ++i) {
      row[i] = uniform_range(rng, -4.0, 4.0);
    }
    const double tau = 0.05 + 0.95 * uniform_unit(rng);

    const auto dist = prediction_distribution(row);
    const auto target = soft_target(row, tau);
    CHECK(std::abs(dist.probs.sum() - 1.0) < 1e-12);
    CHECK(std::abs(target.weights.sum() - 1.0) < 1e-12);
    CHECK(argmax_lowest_index(target.weights) == dist.predicted);
    CHECK(predict(row) == dist.predicted);
    if (tau < 1.0) {
      CHECK(target.weights.maxCoeff() >= dist.probs.maxCoeff() - 1e-12);
    }
  }
}

TEST_CASE("softmax is shift invariant") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    SimilarityRow row(3);
    row << uniform_range(rng, -3, 3), uniform_range(rng, -3, 3),
        uniform_range(rng, -3, 3);
    const double shift = uniform_range(rng, -50, 50);
    const auto base = prediction_distribution(row).probs;
    const auto shifted =
        prediction_distribution(row.array() + shift).probs;
    CHECK((base - shifted).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("sharpening is monotone in tau") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    SimilarityRow row(4);
    for (int i = 0; i < 4; ++i) {
      row[i] = uniform_range(rng, -2.0, 2.0);
    }
    double t1 = 0.05 + 0.9 * uniform_unit(rng);
    double t2 = 0.05 + 0.9 * uniform_unit(rng);
    if (t1 > t2) {
      std::swap(t1, t2);
    }
    CHECK(soft_target(row, t1).weights.maxCoeff() >=
          soft_target(row, t2).weights.maxCoeff() - 1e-12);
  }
}

namespace {

struct MergeFixture {
  ToyEncoderParams params;
  Tokenizer tokenizer;
  Document doc;

  MergeFixture() {
    tokenizer = testing::indexed_tokenizer(8);
    std::vector<Eigen::VectorXd> rows;
    std::mt19937_64 rng(3);
    for (int r = 0; r < 8; ++r) {
      Eigen::VectorXd row(3);
      row << uniform_range(rng, -1, 1), uniform_range(rng, -1, 1),
          uniform_range(rng, -1, 1);
      rows.push_back(row);
    }
    params = testing::hand_params(rows);
    doc = {"doc-1", "w1 w2", {}};
  }
};

AugmentationSet input_set(std::vector<std::string> texts) {
  AugmentationSet set;
  set.doc_id = "doc-1";
  set.kind = AugmentationKind::input;
  set.texts = std::move(texts);
  return set;
}

}  // namespace

TEST_CASE("merged embedding with an empty augmentation equals plain encode") {
  MergeFixture fx;
  const auto merged = merged_embedding(fx.doc, input_set({""}), fx.params,
                                       fx.tokenizer);
  const auto plain = encode(fx.params, fx.tokenizer.tokenize(fx.doc.text));
  CHECK((merged - plain).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("merged embedding of duplicate texts equals the single text") {
  MergeFixture fx;
  const auto once = merged_embedding(fx.doc, input_set({"w3 w4"}), fx.params,
                                     fx.tokenizer);
  const auto twice = merged_embedding(fx.doc, input_set({"w3 w4", "w3 w4"}),
                                      fx.params, fx.tokenizer);
  CHECK((once - twice).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("merged embedding is the component-wise mean of the variants") {
  MergeFixture fx;
  const auto merged = merged_embedding(fx.doc, input_set({"w3", "w4 w5"}),
                                       fx.params, fx.tokenizer);
  const auto a =
      encode(fx.params, fx.tokenizer.tokenize(concat_text(fx.doc.text, "w3")));
  const auto b = encode(fx.params,
                        fx.tokenizer.tokenize(concat_text(fx.doc.text, "w4 w5")));
  CHECK((merged - 0.5 * (a + b)).lpNorm<Eigen::Infinity>() < 1e-15);

  CHECK_THROWS_AS(
      merged_embedding(fx.doc, input_set({}), fx.params, fx.tokenizer), Error);
}

TEST_CASE("merged embedding can include the bare original") {
  MergeFixture fx;
  MergeOptions opts;
  opts.include_original = true;
  const auto merged = merged_embedding(fx.doc, input_set({"w3"}), fx.params,
                                       fx.tokenizer, opts);
  const auto bare = encode(fx.params, fx.tokenizer.tokenize(fx.doc.text));
  const auto with_aug =
      encode(fx.params, fx.tokenizer.tokenize(concat_text(fx.doc.text, "w3")));
  CHECK((merged - 0.5 * (bare + with_aug)).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("pseudo labeling matches a nearest-prompt sweep") {
  // Three separable documents around three prompt anchors.
  auto tokenizer = testing::indexed_tokenizer(10);
  std::vector<Eigen::VectorXd> rows(10, Eigen::VectorXd::Zero(2));
  rows[1] << 1.0, 0.0;   // prompt anchors
  rows[2] << 0.0, 1.0;
  rows[3] << -1.0, -1.0;
  rows[4] << 0.9, 0.1;   // documents
  rows[5] << -0.1, 1.1;
  rows[6] << -0.8, -0.9;
  const auto params = testing::hand_params(rows);
  const auto schema = testing::single_token_schema({1, 2, 3});

  std::vector<Document> corpus = {{"a", "w4", tokenizer.tokenize("w4")},
                                  {"b", "w5", tokenizer.tokenize("w5")},
                                  {"c", "w6", tokenizer.tokenize("w6")}};

  const auto outcomes =
      pseudo_label_corpus(corpus, schema, params, tokenizer,
                          disabled_augmentations(corpus), SimilarityKind::dot,
                          0.5);
  REQUIRE(outcomes.size() == 3);

  // Independent oracle: exhaustive nearest prompt by direct dot products.
  const auto prompts = encode_label_prompts(params, tokenizer, schema);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto emb = encode(params, corpus[i].tokens);
    int best = 0;
    double best_sim = -1e300;
    for (std::size_t c = 0; c < prompts.size(); ++c) {
      const double s = emb.dot(prompts[c]);
      if (s > best_sim) {
        best_sim = s;
        best = static_cast<int>(c);
      }
    }
    CHECK(outcomes[i].pair.pseudo_label == best);
    CHECK(outcomes[i].pair.doc_id == corpus[i].id);
    CHECK(outcomes[i].pair.confidence > 0.0);
    CHECK(outcomes[i].pair.confidence < 1.0);
  }
}

TEST_CASE("symmetric similarities give the first label at half confidence") {
  auto tokenizer = testing::indexed_tokenizer(6);
  std::vector<Eigen::VectorXd> rows(6, Eigen::VectorXd::Zero(2));
  rows[1] << 1.0, 1.0;  // document equidistant from both prompts
  rows[2] << 1.0, 0.0;
  rows[3] << 0.0, 1.0;
  const auto params = testing::hand_params(rows);
  const auto schema = testing::single_token_schema({2, 3});
  std::vector<Document> corpus = {{"a", "w1", tokenizer.tokenize("w1")}};

  const auto outcomes =
      pseudo_label_corpus(corpus, schema, params, tokenizer,
                          disabled_augmentations(corpus), SimilarityKind::dot,
                          0.5);
  CHECK(outcomes[0].pair.pseudo_label == 0);
  CHECK(outcomes[0].pair.confidence == doctest::Approx(0.5));
}

TEST_CASE("disabling augmentation reproduces the direct encode path") {
  MergeFixture fx;
  auto schema = testing::single_token_schema({3, 4});
  std::vector<Document> corpus = {
      {"doc-1", "w1 w2", fx.tokenizer.tokenize("w1 w2")}};

  const auto outcomes =
      pseudo_label_corpus(corpus, schema, fx.params, fx.tokenizer,
                          disabled_augmentations(corpus), SimilarityKind::dot,
                          0.7);
  const auto prompts = encode_label_prompts(fx.params, fx.tokenizer, schema);
  const auto row = score(encode(fx.params, corpus[0].tokens), prompts,
                         SimilarityKind::dot);
  CHECK(outcomes[0].pair.pseudo_label == predict(row));
  CHECK(outcomes[0].target.weights.isApprox(soft_target(row, 0.7).weights));
}
