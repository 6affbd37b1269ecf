#include <benchmark/benchmark.h>

#include "regemb/filtering.hpp"
#include "regemb/ops.hpp"
#include "regemb/text.hpp"

namespace {

using namespace regemb;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  std::vector<double> data(shape_size(shape));
  for (auto& x : data) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(data));
}

void BM_Conv1d(benchmark::State& state) {
  const std::size_t channels = static_cast<std::size_t>(state.range(0));
  const std::size_t len = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  Tensor x = random_tensor({channels, len}, rng);
  Tensor w = random_tensor({channels, channels, 9}, rng);
  Tensor b = random_tensor({channels}, rng);
  for (auto _ : state) {
    Tensor out = conv1d(x, w, b, 4, nullptr);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_Conv1d)->Args({16, 64})->Args({64, 256})->Args({128, 256});

void BM_ProjectAndPool(benchmark::State& state) {
  const std::size_t h = static_cast<std::size_t>(state.range(0));
  const std::size_t len = static_cast<std::size_t>(state.range(1));
  const std::size_t c = 4;
  Rng rng(2);
  Tensor e = random_tensor({h, len + 2 * c}, rng);
  FilterBank bank{random_tensor({h, 2 * c + 1, len}, rng)};
  for (auto _ : state) {
    Tensor out = project_and_pool(e, bank, Pool::Max, nullptr);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_ProjectAndPool)->Args({64, 64})->Args({256, 256});

void BM_Batchnorm(benchmark::State& state) {
  const std::size_t channels = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  Tensor x = random_tensor({channels, 256}, rng);
  Tensor gamma = Tensor::ones({channels});
  Tensor beta = Tensor::zeros({channels});
  BnState bn(channels);
  for (auto _ : state) {
    Tensor out = batchnorm(x, gamma, beta, bn, true, nullptr);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Batchnorm)->Arg(64)->Arg(2304);

void BM_Tokenize(benchmark::State& state) {
  const std::string text =
      "The quick brown fox, startled by the late-night freight train, "
      "jumped over the lazy dog's fence and didn't look back!";
  for (auto _ : state) {
    auto tokens = regemb::tokenize(text);
    benchmark::DoNotOptimize(tokens.data());
  }
  state.SetBytesProcessed(state.iterations() *
                          static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Tokenize);

}  // namespace
