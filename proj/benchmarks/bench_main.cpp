#include <benchmark/benchmark.h>

#include "dec/autoencoder.hpp"
#include "dec/clustering.hpp"
#include "dec/kmeans.hpp"
#include "dec/metrics.hpp"

namespace {

dec::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  dec::Rng rng(seed);
  dec::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

void BM_SoftAssign(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto z = random_matrix(n, 10, 1);
  const auto mu = random_matrix(10, 10, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dec::soft_assign(z, mu, 1.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SoftAssign)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity(benchmark::oN);

void BM_RefreshStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto z = random_matrix(n, 10, 3);
  const auto mu = random_matrix(10, 10, 4);
  for (auto _ : state) {
    const auto q = dec::soft_assign(z, mu, 1.0);
    const auto p = dec::target_distribution(q);
    benchmark::DoNotOptimize(dec::grad_embeddings(z, mu, p.p, q.q, 1.0));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RefreshStep)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity(benchmark::oN);

void BM_EncoderForward(benchmark::State& state) {
  dec::Rng rng(5);
  const std::vector<std::size_t> dims = {784, 500, 500, 2000, 10};
  std::vector<dec::DenseLayer> encoder;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    encoder.push_back(dec::DenseLayer::gaussian(dims[i], dims[i + 1], dec::Activation::ReLU, 0.01, rng));
  const auto batch = random_matrix(256, 784, 6);
  for (auto _ : state) benchmark::DoNotOptimize(dec::apply_chain(encoder, batch));
}
BENCHMARK(BM_EncoderForward)->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto cost = random_matrix(k, k, 7);
  for (auto _ : state) benchmark::DoNotOptimize(dec::hungarian(cost));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(8, 256)->Complexity(benchmark::oNCubed);

void BM_KMeans(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(n, 10, 8);
  for (auto _ : state) benchmark::DoNotOptimize(dec::kmeans(x, 10, 1, 50, dec::Rng(9)));
}
BENCHMARK(BM_KMeans)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
