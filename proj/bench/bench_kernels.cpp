// OpenMP kernels against their serial references, plus article-level top-k.
// Thread counts: each parallel benchmark runs at 1 thread and at max_threads().

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "newsrecon/embedding.hpp"
#include "newsrecon/kernels.hpp"
#include "newsrecon/search.hpp"

using namespace newsrecon;

namespace {

template <class T>
std::vector<T> random_values(std::size_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(g(rng));
  return v;
}

EmbeddingMatrix random_matrix(std::size_t articles, std::size_t captions, std::size_t dim) {
  MatrixBuilder b(dim);
  std::vector<float> row;
  std::uint32_t seed = 1;
  for (std::size_t a = 0; a < articles; ++a)
    for (std::size_t c = 0; c < captions; ++c) {
      row = random_values<float>(dim, seed++);
      normalize(row);
      b.add(caption_row_id("a" + std::to_string(a), static_cast<int>(c)), row);
    }
  return std::move(b).build();
}

void thread_args(benchmark::internal::Benchmark* b, std::vector<std::int64_t> sizes) {
  for (auto n : sizes) {
    b->Args({n, 1});
    if (kernels::max_threads() > 1) b->Args({n, kernels::max_threads()});
  }
}

// ---------------------------------------------------------------- dot_rows

constexpr std::size_t kDim = 512;

void BM_dot_rows(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  kernels::set_threads(static_cast<int>(state.range(1)));
  const auto m = random_values<float>(rows * kDim, 1);
  const auto q = random_values<float>(kDim, 2);
  std::vector<double> out(rows);
  for (auto _ : state) {
    kernels::dot_rows(m, kDim, q, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_dot_rows)->Apply([](auto* b) { thread_args(b, {10'000, 100'000}); });

void BM_dot_rows_serial(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto m = random_values<float>(rows * kDim, 1);
  const auto q = random_values<float>(kDim, 2);
  std::vector<double> out(rows);
  for (auto _ : state) {
    kernels::serial::dot_rows(m, kDim, q, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_dot_rows_serial)->Arg(10'000)->Arg(100'000);

// ---------------------------------------------------------------- gram

void BM_gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  kernels::set_threads(static_cast<int>(state.range(1)));
  const auto a = random_values<double>(n * 256, 3), b = random_values<double>(n * 256, 4);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    kernels::gram(a, b, n, n, 256, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_gram)->Apply([](auto* b) { thread_args(b, {64, 256}); });

void BM_gram_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values<double>(n * 256, 3), b = random_values<double>(n * 256, 4);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    kernels::serial::gram(a, b, n, n, 256, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_gram_serial)->Arg(64)->Arg(256);

// ---------------------------------------------------------------- affine_rows

void BM_affine_rows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  kernels::set_threads(static_cast<int>(state.range(1)));
  const auto x = random_values<float>(n * kDim, 5), w = random_values<float>(kDim * 256, 6);
  const auto bias = random_values<float>(256, 7);
  std::vector<double> out(n * 256);
  for (auto _ : state) {
    kernels::affine_rows(x, n, kDim, w, bias, 256, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_affine_rows)->Apply([](auto* b) { thread_args(b, {256, 2048}); });

void BM_affine_rows_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_values<float>(n * kDim, 5), w = random_values<float>(kDim * 256, 6);
  const auto bias = random_values<float>(256, 7);
  std::vector<double> out(n * 256);
  for (auto _ : state) {
    kernels::serial::affine_rows(x, n, kDim, w, bias, 256, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_affine_rows_serial)->Arg(256)->Arg(2048);

// ---------------------------------------------------------------- top_k

void BM_top_k(benchmark::State& state) {
  kernels::set_threads(static_cast<int>(state.range(1)));
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 3, 128);
  auto q = random_values<float>(128, 9);
  normalize(q);
  for (auto _ : state) benchmark::DoNotOptimize(top_k(q, m, 50));
}
BENCHMARK(BM_top_k)->Apply([](auto* b) { thread_args(b, {10'000, 50'000}); });

void BM_top_k_serial(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 3, 128);
  auto q = random_values<float>(128, 9);
  normalize(q);
  for (auto _ : state) benchmark::DoNotOptimize(top_k_serial(q, m, 50));
}
BENCHMARK(BM_top_k_serial)->Arg(10'000)->Arg(50'000);

}  // namespace

BENCHMARK_MAIN();
