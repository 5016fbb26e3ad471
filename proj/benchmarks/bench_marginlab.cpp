#include <benchmark/benchmark.h>

#include <gcst/margin_lab.hpp>

namespace {

void BM_scalar_grad_grid(benchmark::State& state) {
  for (auto _ : state) {
    double sum = 0.0;
    for (double tau = 0.05; tau < 1.0; tau += 0.05) {
      for (double d = -10.0; d <= 10.0; d += 0.05) {
        sum += gcst::scalar_grad(d, tau);
      }
    }
    benchmark::DoNotOptimize(sum);
  }
}
BENCHMARK(BM_scalar_grad_grid);

void BM_margin_growth(benchmark::State& state) {
  Eigen::VectorXd d0(4);
  d0 << 0.5, -0.7, 2.0, -3.0;
  const auto steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto run = gcst::run_margin_growth(d0, 0.1, 0.1, steps);
    benchmark::DoNotOptimize(run.trajectory.back());
  }
}
BENCHMARK(BM_margin_growth)->Arg(200)->Arg(2000);

void BM_bounded_max_margin(benchmark::State& state) {
  const std::vector<gcst::LabeledPoint> points = {
      {{2.0, 0.4}, 1},  {{1.5, 1.8}, 1},   {{2.5, -0.9}, 1},
      {{-1.7, 0.6}, 2}, {{-2.2, -1.1}, 2}, {{-1.2, -2.0}, 2}};
  for (auto _ : state) {
    auto run = gcst::run_bounded_max_margin(points, 0.1, 0.01,
                                            {2.0, 5.0, 10.0, 50.0}, 4000);
    benchmark::DoNotOptimize(run.stages.back().e1);
  }
}
BENCHMARK(BM_bounded_max_margin);

}  // namespace

BENCHMARK_MAIN();
