#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>

#include <gcst/generator.hpp>

namespace {

void BM_mock_generate(benchmark::State& state) {
  gcst::MockBackend backend(17);
  gcst::GenerationRequest request;
  request.instruction =
      gcst::render_instruction(gcst::InstructionKind::conditional, "sports");
  request.input_text = "the team played a long match in the late season";
  request.n_samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto texts = backend.generate(request);
    benchmark::DoNotOptimize(texts);
  }
}
BENCHMARK(BM_mock_generate)->Arg(1)->Arg(5);

void BM_gendict_lookup(benchmark::State& state) {
  gcst::GenDict cache;
  const int entries = 1000;
  for (int i = 0; i < entries; ++i) {
    gcst::AugmentationSet set;
    set.kind = gcst::AugmentationKind::input;
    set.texts = {"text " + std::to_string(i)};
    cache.insert({"doc " + std::to_string(i), "", gcst::AugmentationKind::input},
                 set);
  }
  int i = 0;
  for (auto _ : state) {
    auto hit = cache.lookup(
        {"doc " + std::to_string(i % entries), "", gcst::AugmentationKind::input});
    benchmark::DoNotOptimize(hit);
    ++i;
  }
}
BENCHMARK(BM_gendict_lookup);

void BM_gendict_persisted_load(benchmark::State& state) {
  const auto path =
      std::filesystem::temp_directory_path() / "gcst_bench_gendict.bin";
  std::filesystem::remove(path);
  {
    gcst::GenDict cache(path);
    for (int i = 0; i < 500; ++i) {
      gcst::AugmentationSet set;
      set.kind = gcst::AugmentationKind::input;
      set.texts = {std::string(96, 'x'), std::string(96, 'y')};
      cache.insert(
          {"doc " + std::to_string(i), "", gcst::AugmentationKind::input}, set);
    }
  }
  for (auto _ : state) {
    gcst::GenDict cache(path);
    benchmark::DoNotOptimize(cache.size());
  }
  std::filesystem::remove(path);
}
BENCHMARK(BM_gendict_persisted_load);

}  // namespace

BENCHMARK_MAIN();
