#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include <gcst/losses.hpp>

#include "support/finite_diff.hpp"
#include "support/toy.hpp"

using namespace gcst;

namespace {

// Two labels on tokens 3 and 4, document rows set by hand, identity
// projection: similarities are plain dot products of the listed rows.
struct HandSetup {
  Tokenizer tokenizer = testing::indexed_tokenizer(8);
  ToyEncoderParams params;
  LabelSchema schema = testing::single_token_schema({3, 4});

  HandSetup() {
    std::vector<Eigen::VectorXd> rows(8, Eigen::VectorXd::Zero(2));
    rows[1] << 0.2, 0.1;
    rows[2] << -0.1, 0.3;
    rows[3] << 1.0, 0.5;   // prompt 0
    rows[4] << -0.5, 1.0;  // prompt 1
    rows[5] << 0.4, -0.3;
    rows[6] << -0.2, 0.6;
    params = testing::hand_params(rows);
  }
};

SoftTarget one_hot(int index, int labels, double tau) {
  SoftTarget target;
  target.tau = tau;
  target.weights = Eigen::VectorXd::Zero(labels);
  target.weights[index] = 1.0;
  return target;
}

}  // namespace

TEST_CASE("t2l of a one-hot target against a uniform model is log L") {
  // Four labels whose prompts all embed identically -> P is uniform.
  auto tokenizer = testing::indexed_tokenizer(8);
  std::vector<Eigen::VectorXd> rows(8, Eigen::VectorXd::Zero(2));
  rows[1] << 0.3, 0.4;
  for (int t = 3; t <= 6; ++t) {
    rows[t] << 0.5, 0.5;
  }
  const auto params = testing::hand_params(rows);
  const auto schema = testing::single_token_schema({3, 4, 5, 6});

  std::vector<TargetedInstance> batch = {{{1}, one_hot(2, 4, 0.5)}};
  const auto report =
      loss_t2l(batch, params, tokenizer, schema, SimilarityKind::dot, 0.5);
  CHECK(report.value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(report.components.at("t2l") == report.value);
}

TEST_CASE("t2l at tau = 1 is the conditional entropy of the batch") {
  HandSetup hs;
  const auto prompts =
      encode_label_prompts(hs.params, hs.tokenizer, hs.schema);

  std::vector<TargetedInstance> batch;
  double entropy = 0.0;
  for (int token : {1, 2, 5, 6}) {
    const auto row = score(encode(hs.params, {token}), prompts,
                           SimilarityKind::dot);
    batch.push_back({{token}, soft_target(row, 1.0)});
    const auto p = prediction_distribution(row).probs;
    for (Eigen::Index c = 0; c < p.size(); ++c) {
      entropy -= p[c] * std::log(p[c]);
    }
  }
  const auto report = loss_t2l(batch, hs.params, hs.tokenizer, hs.schema,
                               SimilarityKind::dot, 1.0);
  CHECK(std::abs(report.value - entropy) < 1e-10);
}

TEST_CASE("t2l at vanishing tau matches the hard pseudo-label loss") {
  // Rows chosen so every similarity gap is at least 0.5.
  auto tokenizer = testing::indexed_tokenizer(8);
  std::vector<Eigen::VectorXd> rows(8, Eigen::VectorXd::Zero(2));
  rows[1] << 1.0, 0.0;
  rows[2] << 0.0, 1.2;
  rows[3] << 1.5, 0.0;  // prompt 0
  rows[4] << 0.0, 1.5;  // prompt 1
  const auto params = testing::hand_params(rows);
  const auto schema = testing::single_token_schema({3, 4});
  const auto prompts = encode_label_prompts(params, tokenizer, schema);

  const double tau = 1e-4;
  std::vector<TargetedInstance> batch;
  double hard_loss = 0.0;
  for (int token : {1, 2}) {
    const auto row = score(encode(params, {token}), prompts,
                           SimilarityKind::dot);
    REQUIRE(std::abs(row[0] - row[1]) >= 0.5);
    batch.push_back({{token}, soft_target(row, tau)});
    const auto dist = prediction_distribution(row);
    hard_loss -= std::log(dist.probs[dist.predicted]);
  }
  const auto report = loss_t2l(batch, params, tokenizer, schema,
                               SimilarityKind::dot, tau);
  CHECK(std::abs(report.value - hard_loss) < 1e-3);
}

TEST_CASE("t2l is nonnegative and rejects bad tau") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = testing::random_instance(rng);
    const auto report = loss_t2l(inst.targeted, inst.params, inst.tokenizer,
                                 inst.schema, SimilarityKind::dot, inst.tau);
    CHECK(report.value >= -1e-12);
  }

  HandSetup hs;
  std::vector<TargetedInstance> batch = {{{1}, one_hot(0, 2, 0.5)}};
  CHECK_THROWS_AS(loss_t2l(batch, hs.params, hs.tokenizer, hs.schema,
                           SimilarityKind::dot, 0.0),
                  Error);
  CHECK_THROWS_AS(loss_t2l(batch, hs.params, hs.tokenizer, hs.schema,
                           SimilarityKind::dot, 1.5),
                  Error);
  // Target built with a different tau than the loss is called with.
  CHECK_THROWS_AS(loss_t2l(batch, hs.params, hs.tokenizer, hs.schema,
                           SimilarityKind::dot, 0.25),
                  Error);
}

TEST_CASE("t2l is invariant to a constant shift of one instance's row") {
  HandSetup hs;
  // A perturbation q of the document embedding with q . p_c == 1 for both
  // prompts shifts every similarity of that instance by the same amount.
  Eigen::Matrix2d prompt_rows;
  prompt_rows << 1.0, 0.5, -0.5, 1.0;
  const Eigen::Vector2d q = prompt_rows.inverse() * Eigen::Vector2d::Ones();

  const double tau = 0.6;
  auto run = [&](double shift) {
    ToyEncoderParams params = hs.params;
    params.embedding_table.row(1) += shift * q.transpose();
    std::vector<TargetedInstance> batch = {{{1}, one_hot(0, 2, tau)}};
    return loss_t2l(batch, params, hs.tokenizer, hs.schema,
                    SimilarityKind::dot, tau)
        .value;
  };
  CHECK(std::abs(run(0.0) - run(7.0)) < 1e-10);
  CHECK(std::abs(run(0.0) - run(-3.0)) < 1e-10);
}

TEST_CASE("g2l equals t2l when the conditional text is the original") {
  HandSetup hs;
  const auto prompts =
      encode_label_prompts(hs.params, hs.tokenizer, hs.schema);
  const double tau = 0.5;

  const auto row = score(encode(hs.params, {1}), prompts, SimilarityKind::dot);
  const auto target = soft_target(row, tau);

  BatchSpec batch;
  batch.tau = tau;
  BatchItem item;
  item.doc_id = "d0";
  item.pseudo_label = 0;
  item.tokens = {1};
  item.target = target;
  item.augmented = {{1}};
  item.conditionals = {{{1}, target}};
  batch.items.push_back(item);

  const auto g2l =
      loss_g2l(batch, hs.params, hs.tokenizer, hs.schema, SimilarityKind::dot);
  std::vector<TargetedInstance> as_t2l = {{{1}, target}};
  const auto t2l = loss_t2l(as_t2l, hs.params, hs.tokenizer, hs.schema,
                            SimilarityKind::dot, tau);
  CHECK(g2l.value == doctest::Approx(t2l.value).epsilon(1e-14));
  CHECK(g2l.components.count("g2l") == 1);
}

TEST_CASE("g2l sums over conditional instances") {
  HandSetup hs;
  const double tau = 0.5;
  const auto prompts =
      encode_label_prompts(hs.params, hs.tokenizer, hs.schema);
  auto target_for = [&](const std::vector<int>& tokens) {
    return soft_target(score(encode(hs.params, tokens), prompts,
                             SimilarityKind::dot),
                       tau);
  };

  BatchSpec both;
  both.tau = tau;
  BatchItem item;
  item.doc_id = "d0";
  item.pseudo_label = 0;
  item.tokens = {1};
  item.target = target_for({1});
  item.augmented = {{1}};
  item.conditionals = {{{1, 5}, target_for({1, 5})},
                       {{1, 6}, target_for({1, 6})}};
  both.items.push_back(item);

  auto single = [&](std::size_t which) {
    BatchSpec one = both;
    one.items[0].conditionals = {both.items[0].conditionals[which]};
    return loss_g2l(one, hs.params, hs.tokenizer, hs.schema,
                    SimilarityKind::dot)
        .value;
  };
  const auto total =
      loss_g2l(both, hs.params, hs.tokenizer, hs.schema, SimilarityKind::dot);
  CHECK(total.value == doctest::Approx(single(0) + single(1)).epsilon(1e-14));
}

TEST_CASE("g2l one-pair value matches the frozen closed form") {
  // Document token 1 (row 0.2,0.1) concatenated with token 5 (row 0.4,-0.3):
  // mean (0.3,-0.1); prompts rows 3 and 4 give similarities +0.25 / -0.25;
  // -sum Q log P with tau=0.5 evaluated at 40-digit precision.
  HandSetup hs;
  const double tau = 0.5;
  const auto prompts =
      encode_label_prompts(hs.params, hs.tokenizer, hs.schema);
  const std::vector<int> cond_tokens = {1, 5};
  const auto target = soft_target(
      score(encode(hs.params, cond_tokens), prompts, SimilarityKind::dot), tau);

  BatchSpec batch;
  batch.tau = tau;
  BatchItem item;
  item.doc_id = "d0";
  item.pseudo_label = 0;
  item.tokens = {1};
  item.target = target;
  item.augmented = {{1}};
  item.conditionals = {{cond_tokens, target}};
  batch.items.push_back(item);

  const auto report =
      loss_g2l(batch, hs.params, hs.tokenizer, hs.schema, SimilarityKind::dot);
  CHECK(report.value ==
        doctest::Approx(0.6085476948651042).epsilon(1e-13));
}

TEST_CASE("g2l requires a conditional augmentation per item") {
  HandSetup hs;
  BatchSpec batch;
  batch.tau = 0.5;
  BatchItem item;
  item.doc_id = "d0";
  item.pseudo_label = 0;
  item.tokens = {1};
  item.target = one_hot(0, 2, 0.5);
  item.augmented = {{1}};
  batch.items.push_back(item);  // no conditionals
  CHECK_THROWS_WITH_AS(loss_g2l(batch, hs.params, hs.tokenizer, hs.schema,
                                SimilarityKind::dot),
                       doctest::Contains("conditional"), Error);
}

TEST_CASE("t2g of a single text with itself as augmentation is zero") {
  HandSetup hs;
  const auto report = loss_t2g({{1}}, {{{1}}}, hs.params, SimilarityKind::dot);
  CHECK(report.value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("t2g with identical embeddings is n log n") {
  // Three texts, all the same token, one augmentation each (same token too).
  HandSetup hs;
  const std::vector<std::vector<int>> originals = {{1}, {1}, {1}};
  const std::vector<std::vector<std::vector<int>>> groups = {
      {{1}}, {{1}}, {{1}}};
  const auto report = loss_t2g(originals, groups, hs.params,
                               SimilarityKind::dot);
  CHECK(report.value == doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-13));
}

TEST_CASE("t2g two-document value matches the frozen closed form") {
  // u1 = (0.2,0.1), u2 = (-0.1,0.3); A(1) = token 5 (0.4,-0.3),
  // A(2) = token 6 (-0.2,0.6); dot similarities.
  HandSetup hs;
  const auto report = loss_t2g({{1}, {2}}, {{{5}}, {{6}}}, hs.params,
                               SimilarityKind::dot);
  CHECK(report.value == doctest::Approx(1.2225065062536441).epsilon(1e-13));
}

TEST_CASE("t2g rejects an empty augmentation group naming the member") {
  HandSetup hs;
  CHECK_THROWS_WITH_AS(
      loss_t2g({{1}, {2}}, {{{5}}, {}}, hs.params, SimilarityKind::dot),
      doctest::Contains("member 1"), Error);
}

TEST_CASE("t2g groups collect augmentations by shared pseudo-label") {
  BatchSpec batch;
  batch.tau = 0.5;
  for (int i = 0; i < 3; ++i) {
    BatchItem item;
    item.doc_id = "d" + std::to_string(i);
    item.pseudo_label = i < 2 ? 0 : 1;
    item.tokens = {1};
    item.augmented = {{i + 2}};
    batch.items.push_back(item);
  }
  const auto groups = t2g_groups(batch);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0] == std::vector<std::vector<int>>{{2}, {3}});
  CHECK(groups[1] == std::vector<std::vector<int>>{{2}, {3}});
  CHECK(groups[2] == std::vector<std::vector<int>>{{4}});
}

TEST_CASE("composite is g2l plus t2g with summed gradients") {
  std::mt19937_64 rng(21);
  auto inst = testing::random_instance(rng);

  const auto composite = composite_loss(inst.batch, inst.params,
                                        inst.tokenizer, inst.schema,
                                        SimilarityKind::dot);
  const auto g2l = loss_g2l(inst.batch, inst.params, inst.tokenizer,
                            inst.schema, SimilarityKind::dot);
  const auto t2g = loss_t2g(inst.batch, inst.params, SimilarityKind::dot);

  CHECK(composite.value ==
        doctest::Approx(g2l.value + t2g.value).epsilon(1e-14));
  CHECK(composite.components.at("g2l") == doctest::Approx(g2l.value));
  CHECK(composite.components.at("t2g") == doctest::Approx(t2g.value));

  const Eigen::MatrixXd expected_emb =
      g2l.grads.embedding_table + t2g.grads.embedding_table;
  const Eigen::MatrixXd expected_proj =
      g2l.grads.projection + t2g.grads.projection;
  CHECK((composite.grads.embedding_table - expected_emb)
            .lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((composite.grads.projection - expected_proj)
            .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("composite rejects items without conditionals") {
  std::mt19937_64 rng(22);
  auto inst = testing::random_instance(rng);
  inst.batch.items[0].conditionals.clear();
  CHECK_THROWS_AS(composite_loss(inst.batch, inst.params, inst.tokenizer,
                                 inst.schema, SimilarityKind::dot),
                  Error);
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(2024);
  for (SimilarityKind kind : {SimilarityKind::dot, SimilarityKind::cosine}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto inst = testing::random_instance(rng);
      {
        const auto report = loss_t2l(inst.targeted, inst.params,
                                     inst.tokenizer, inst.schema, kind,
                                     inst.tau);
        const auto fd = testing::check_gradients(
            inst.params,
            [&](const ToyEncoderParams& p) {
              return loss_t2l(inst.targeted, p, inst.tokenizer, inst.schema,
                              kind, inst.tau)
                  .value;
            },
            report.grads);
        CHECK(fd.max_rel_err < 1e-5);
      }
      {
        const auto report = loss_g2l(inst.batch, inst.params, inst.tokenizer,
                                     inst.schema, kind);
        const auto fd = testing::check_gradients(
            inst.params,
            [&](const ToyEncoderParams& p) {
              return loss_g2l(inst.batch, p, inst.tokenizer, inst.schema, kind)
                  .value;
            },
            report.grads);
        CHECK(fd.max_rel_err < 1e-5);
      }
      {
        const auto report = loss_t2g(inst.batch, inst.params, kind);
        const auto fd = testing::check_gradients(
            inst.params,
            [&](const ToyEncoderParams& p) {
              return loss_t2g(inst.batch, p, kind).value;
            },
            report.grads);
        CHECK(fd.max_rel_err < 1e-5);
      }
      {
        const auto report = composite_loss(inst.batch, inst.params,
                                           inst.tokenizer, inst.schema, kind);
        const auto fd = testing::check_gradients(
            inst.params,
            [&](const ToyEncoderParams& p) {
              return composite_loss(inst.batch, p, inst.tokenizer, inst.schema,
                                    kind)
                  .value;
            },
            report.grads);
        CHECK(fd.max_rel_err < 1e-5);
      }
    }
  }
}
