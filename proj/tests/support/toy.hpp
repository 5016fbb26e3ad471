#pragma once

#include <random>
#include <string>
#include <vector>

#include <gcst/losses.hpp>
#include <gcst/rng.hpp>
#include <gcst/scoring.hpp>
#include <gcst/tokenizer.hpp>
#include <gcst/types.hpp>

namespace gcst::testing {

// Vocabulary "w1 w2 ... w{V-1}" so the word "w<i>" maps to token i and token
// sequences can be written down directly. Token 0 stays the unk slot.
inline Tokenizer indexed_tokenizer(std::size_t vocab_size,
                                   std::size_t max_length = 128) {
  std::string text;
  for (std::size_t i = 1; i < vocab_size; ++i) {
    text += "w" + std::to_string(i) + " ";
  }
  return Tokenizer({text}, max_length);
}

// Identity projection and explicit embedding rows: a document made of the
// single token t embeds exactly to rows[t].
inline ToyEncoderParams hand_params(const std::vector<Eigen::VectorXd>& rows) {
  ToyEncoderParams params;
  const auto dim = rows.front().size();
  params.embedding_table.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    params.embedding_table.row(static_cast<Eigen::Index>(r)) =
        rows[r].transpose();
  }
  params.projection = Eigen::MatrixXd::Identity(dim, dim);
  return params;
}

inline LabelSchema single_token_schema(const std::vector<int>& prompt_tokens) {
  LabelSchema schema;
  for (std::size_t i = 0; i < prompt_tokens.size(); ++i) {
    schema.descriptions.push_back("label" + std::to_string(i));
    schema.prompts.push_back("w" + std::to_string(prompt_tokens[i]));
  }
  return schema;
}

struct RandomInstance {
  ToyEncoderParams params;
  Tokenizer tokenizer;
  LabelSchema schema;
  BatchSpec batch;
  std::vector<TargetedInstance> targeted;  // original texts + random targets
  double tau = 0.0;
};

// Tiny randomized problem for gradient checks: V<=20, H=D<=8, L<=4, batch<=6.
inline RandomInstance random_instance(std::mt19937_64& rng) {
  RandomInstance inst;
  const std::size_t vocab = 6 + uniform_index(rng, 15);   // [6, 20]
  const std::size_t dim = 2 + uniform_index(rng, 7);      // [2, 8]
  const std::size_t labels = 2 + uniform_index(rng, 3);   // [2, 4]
  const std::size_t batch = 1 + uniform_index(rng, 4);    // [1, 4]
  inst.tau = 0.25 + 0.5 * uniform_unit(rng);

  inst.tokenizer = indexed_tokenizer(vocab);
  inst.params.embedding_table.resize(static_cast<Eigen::Index>(vocab),
                                     static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < inst.params.embedding_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < inst.params.embedding_table.cols(); ++c) {
      inst.params.embedding_table(r, c) = uniform_range(rng, -0.8, 0.8);
    }
  }
  inst.params.projection.resize(static_cast<Eigen::Index>(dim),
                                static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < inst.params.projection.rows(); ++r) {
    for (Eigen::Index c = 0; c < inst.params.projection.cols(); ++c) {
      inst.params.projection(r, c) =
          (r == c ? 1.0 : 0.0) + uniform_range(rng, -0.3, 0.3);
    }
  }

  auto random_tokens = [&](std::size_t max_len) {
    const std::size_t len = 1 + uniform_index(rng, max_len);
    std::vector<int> tokens;
    for (std::size_t i = 0; i < len; ++i) {
      tokens.push_back(static_cast<int>(1 + uniform_index(rng, vocab - 1)));
    }
    return tokens;
  };
  auto random_target = [&]() {
    Eigen::VectorXd row(static_cast<Eigen::Index>(labels));
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      row[i] = uniform_range(rng, -1.0, 1.0);
    }
    return soft_target(row, inst.tau);
  };

  std::vector<int> prompt_tokens;
  for (std::size_t c = 0; c < labels; ++c) {
    prompt_tokens.push_back(static_cast<int>(1 + uniform_index(rng, vocab - 1)));
  }
  inst.schema = single_token_schema(prompt_tokens);

  inst.batch.tau = inst.tau;
  for (std::size_t b = 0; b < batch; ++b) {
    BatchItem item;
    item.doc_index = b;
    item.doc_id = "d" + std::to_string(b);
    item.pseudo_label = static_cast<int>(uniform_index(rng, labels));
    item.tokens = random_tokens(4);
    item.target = random_target();
    const std::size_t augs = 1 + uniform_index(rng, 2);
    for (std::size_t a = 0; a < augs; ++a) {
      item.augmented.push_back(random_tokens(4));
    }
    const std::size_t conds = 1 + uniform_index(rng, 2);
    for (std::size_t m = 0; m < conds; ++m) {
      ConditionalInstance cond;
      cond.tokens = random_tokens(5);
      cond.target = random_target();
      item.conditionals.push_back(std::move(cond));
    }
    inst.batch.items.push_back(item);
    inst.targeted.push_back({inst.batch.items.back().tokens,
                             inst.batch.items.back().target});
  }
  return inst;
}

}  // namespace gcst::testing
