#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include <gcst/losses.hpp>
#include <gcst/rng.hpp>

namespace {

struct Problem {
  gcst::Tokenizer tokenizer;
  gcst::ToyEncoderParams params;
  gcst::LabelSchema schema;
  gcst::BatchSpec batch;

  Problem(std::size_t labels, std::size_t batch_size, std::size_t doc_len) {
    const std::size_t vocab = 200;
    std::string words;
    for (std::size_t i = 1; i < vocab; ++i) {
      words += "w" + std::to_string(i) + " ";
    }
    tokenizer = gcst::Tokenizer({words});
    params = gcst::init_encoder_params(vocab, 32, 32, 7, 1.0, 0.01);

    std::mt19937_64 rng(13);
    auto random_tokens = [&](std::size_t len) {
      std::vector<int> tokens;
      for (std::size_t i = 0; i < len; ++i) {
        tokens.push_back(
            static_cast<int>(1 + gcst::uniform_index(rng, vocab - 1)));
      }
      return tokens;
    };
    auto random_target = [&]() {
      Eigen::VectorXd row(static_cast<Eigen::Index>(labels));
      for (Eigen::Index i = 0; i < row.size(); ++i) {
        row[i] = gcst::uniform_range(rng, -1.0, 1.0);
      }
      return gcst::soft_target(row, 0.1);
    };

    for (std::size_t c = 0; c < labels; ++c) {
      schema.descriptions.push_back("label" + std::to_string(c));
      schema.prompts.push_back("w" + std::to_string(c + 1) + " w" +
                               std::to_string(c + 2));
    }

    batch.tau = 0.1;
    for (std::size_t b = 0; b < batch_size; ++b) {
      gcst::BatchItem item;
      item.doc_index = b;
      item.doc_id = "d" + std::to_string(b);
      item.pseudo_label = static_cast<int>(b % labels);
      item.tokens = random_tokens(doc_len);
      item.target = random_target();
      for (int k = 0; k < 5; ++k) {
        item.augmented.push_back(random_tokens(doc_len + 16));
      }
      for (int m = 0; m < 5; ++m) {
        gcst::ConditionalInstance cond;
        cond.tokens = random_tokens(doc_len + 16);
        cond.target = random_target();
        item.conditionals.push_back(std::move(cond));
      }
      batch.items.push_back(std::move(item));
    }
  }
};

void BM_composite_loss(benchmark::State& state) {
  const auto labels = static_cast<std::size_t>(state.range(0));
  Problem problem(labels, 3 * labels, 24);
  for (auto _ : state) {
    auto report =
        gcst::composite_loss(problem.batch, problem.params, problem.tokenizer,
                             problem.schema, gcst::SimilarityKind::dot);
    benchmark::DoNotOptimize(report.value);
  }
}
BENCHMARK(BM_composite_loss)->Arg(2)->Arg(4)->Arg(8);

void BM_t2g_loss(benchmark::State& state) {
  const auto labels = static_cast<std::size_t>(state.range(0));
  Problem problem(labels, 3 * labels, 24);
  for (auto _ : state) {
    auto report = gcst::loss_t2g(problem.batch, problem.params,
                                 gcst::SimilarityKind::dot);
    benchmark::DoNotOptimize(report.value);
  }
}
BENCHMARK(BM_t2g_loss)->Arg(2)->Arg(4)->Arg(8);

void BM_encode(benchmark::State& state) {
  Problem problem(4, 1, 24);
  const auto tokens = problem.batch.items[0].tokens;
  for (auto _ : state) {
    auto emb = gcst::encode(problem.params, tokens);
    benchmark::DoNotOptimize(emb);
  }
}
BENCHMARK(BM_encode);

}  // namespace

BENCHMARK_MAIN();
