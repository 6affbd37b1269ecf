#include <benchmark/benchmark.h>

#include "regemb/model.hpp"
#include "regemb/ops.hpp"
#include "regemb/trainer.hpp"

namespace {

using namespace regemb;

EncodedDocument synthetic_doc(std::size_t len, int c, int v, Rng& rng) {
  EncodedDocument doc;
  doc.token_indices.assign(static_cast<std::size_t>(c), Vocabulary::kPad);
  for (std::size_t i = 0; i < len; ++i) {
    doc.token_indices.push_back(2 + static_cast<int>(rng.next_below(v - 2)));
  }
  doc.token_indices.insert(doc.token_indices.end(), static_cast<std::size_t>(c),
                           Vocabulary::kPad);
  doc.pad_radius = c;
  doc.label = static_cast<int>(rng.next_below(2));
  return doc;
}

ModelSpec bench_spec(Method method, int h) {
  ModelSpec spec;
  spec.method = method;
  spec.meta = MetaNetKind::Cnn;
  spec.h = h;
  spec.c = 4;
  spec.n = 4;
  spec.v = 5000;
  return spec;
}

void BM_ForwardEval(benchmark::State& state) {
  const Method method = static_cast<Method>(state.range(0));
  const int h = static_cast<int>(state.range(1));
  ModelSpec spec = bench_spec(method, h);
  Rng rng(7);
  ModelParams params = init_model(spec, rng);
  EncodedDocument doc = synthetic_doc(128, spec.c, spec.v, rng);
  for (auto _ : state) {
    Tensor logits = forward(doc, params, spec, false, nullptr);
    benchmark::DoNotOptimize(logits.data());
  }
}
BENCHMARK(BM_ForwardEval)
    ->Args({static_cast<int>(Method::Are), 32})
    ->Args({static_cast<int>(Method::Lre), 32})
    ->Args({static_cast<int>(Method::Conv), 32})
    ->Args({static_cast<int>(Method::Are), 128});

void BM_TrainStep(benchmark::State& state) {
  const int h = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  ModelSpec spec = bench_spec(Method::Are, h);
  Rng rng(11);
  ModelParams params = init_model(spec, rng);
  TrainState train_state = init_train_state(params);
  TrainConfig config;
  auto named = named_parameters(params);

  std::vector<EncodedDocument> docs;
  for (int b = 0; b < batch; ++b) docs.push_back(synthetic_doc(64, spec.c, spec.v, rng));
  std::vector<const EncodedDocument*> batch_ptrs;
  std::vector<int> labels;
  for (const auto& d : docs) {
    batch_ptrs.push_back(&d);
    labels.push_back(d.label);
  }

  for (auto _ : state) {
    Tape tape;
    BatchTrace trace = forward_batch(batch_ptrs, params, spec, true, &tape);
    Tensor loss = softmax_cross_entropy(trace.logits, labels, &tape);
    tape.backward(loss);
    adam_step(named, train_state, config);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TrainStep)->Args({16, 16})->Args({32, 16});

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
