#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "unimc/encoding.hpp"
#include "unimc/model.hpp"
#include "unimc/ops.hpp"
#include "unimc/optim.hpp"
#include "unimc/synthetic.hpp"
#include "unimc/tokenizer.hpp"

namespace {

using namespace unimc;

TensorPtr random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                        bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  TensorPtr t = Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t->values()) v = dist(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  TensorPtr a = random_tensor({n, n}, 1);
  TensorPtr b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    TensorPtr c = ops::matmul(a, b);
    benchmark::DoNotOptimize(c->values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MaskedSoftmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  TensorPtr x = random_tensor({n, n}, 3);
  TensorPtr mask = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    mask->values()[i * n + (i + 1) % n] = std::numeric_limits<double>::lowest();
  }
  for (auto _ : state) {
    TensorPtr y = ops::masked_softmax(x, mask, 1);
    benchmark::DoNotOptimize(y->values().data());
  }
}
BENCHMARK(BM_MaskedSoftmax)->Arg(64)->Arg(256);

void BM_Tokenize(benchmark::State& state) {
  SyntheticSpec spec;
  spec.copy_train = 200;
  spec.nli_train = 0;
  spec.topic_train = 0;
  spec.copy_heldout = 0;
  spec.nli_transfer = 0;
  spec.topic_transfer = 0;
  const SyntheticCurriculum curriculum = make_synthetic_curriculum(spec);
  for (auto _ : state) {
    std::size_t tokens = 0;
    for (const MCExample& ex : curriculum.copy_train) {
      tokens += tokenize(ex.passage).size();
    }
    benchmark::DoNotOptimize(tokens);
  }
}
BENCHMARK(BM_Tokenize);

void BM_AssembleCollate(benchmark::State& state) {
  SyntheticSpec spec;
  spec.copy_train = 16;
  spec.nli_train = 16;
  spec.topic_train = 0;
  spec.copy_heldout = 0;
  spec.nli_transfer = 0;
  spec.topic_transfer = 0;
  const SyntheticCurriculum curriculum = make_synthetic_curriculum(spec);
  const Vocab vocab = build_vocab(curriculum.corpus, 512);
  std::vector<MCExample> examples = curriculum.copy_train;
  examples.insert(examples.end(), curriculum.nli_train.begin(),
                  curriculum.nli_train.end());
  for (auto _ : state) {
    std::vector<EncodedInput> encoded;
    for (const MCExample& ex : examples) encoded.push_back(assemble(ex, vocab, 80));
    TrainingBatch batch = collate(encoded);
    benchmark::DoNotOptimize(batch.token_ids.data());
  }
}
BENCHMARK(BM_AssembleCollate);

void BM_ForwardLoss(benchmark::State& state) {
  SyntheticSpec spec;
  spec.copy_train = 8;
  spec.nli_train = 8;
  spec.topic_train = 0;
  spec.copy_heldout = 0;
  spec.nli_transfer = 0;
  spec.topic_transfer = 0;
  const SyntheticCurriculum curriculum = make_synthetic_curriculum(spec);
  const Vocab vocab = build_vocab(curriculum.corpus, 512);
  ModelConfig config = preset_config("toy", vocab.size(), 80);
  const ModelParameters params = init_parameters(config, 1);

  std::mt19937_64 rng(2);
  std::vector<EncodedInput> encoded;
  for (const MCExample& ex : curriculum.copy_train) {
    EncodedInput enc = assemble(ex, vocab, 80);
    enc = apply_omlm_mask(enc, ex.answer);
    encoded.push_back(apply_mlm_mask(enc, 0.15, rng));
  }
  for (const MCExample& ex : curriculum.nli_train) {
    EncodedInput enc = assemble(ex, vocab, 80);
    enc = apply_omlm_mask(enc, ex.answer);
    encoded.push_back(apply_mlm_mask(enc, 0.15, rng));
  }
  const TrainingBatch batch = collate(encoded);
  for (auto _ : state) {
    const LossBreakdown loss = total_loss(batch, params);
    benchmark::DoNotOptimize(loss.l_full);
  }
}
BENCHMARK(BM_ForwardLoss);

void BM_TrainStep(benchmark::State& state) {
  SyntheticSpec spec;
  spec.copy_train = 16;
  spec.nli_train = 0;
  spec.topic_train = 0;
  spec.copy_heldout = 0;
  spec.nli_transfer = 0;
  spec.topic_transfer = 0;
  const SyntheticCurriculum curriculum = make_synthetic_curriculum(spec);
  const Vocab vocab = build_vocab(curriculum.corpus, 512);
  ModelConfig config = preset_config("toy", vocab.size(), 80);
  ModelParameters params = init_parameters(config, 1);
  AdamOptimizer optimizer(params);

  std::mt19937_64 rng(2);
  std::vector<EncodedInput> encoded;
  for (const MCExample& ex : curriculum.copy_train) {
    EncodedInput enc = assemble(ex, vocab, 80);
    enc = apply_omlm_mask(enc, ex.answer);
    encoded.push_back(apply_mlm_mask(enc, 0.15, rng));
  }
  const TrainingBatch batch = collate(encoded);
  for (auto _ : state) {
    const LossBreakdown loss = total_loss(batch, params);
    backward(loss.node);
    optimizer.step(1e-3);
    benchmark::DoNotOptimize(loss.l_full);
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
