#include <benchmark/benchmark.h>

#include "pcred/pipeline.h"
#include "pcred/synth.h"

namespace {

using namespace pcred;

// Tiny model plus one five-candidate group built from a synthetic sentence.
struct Fixture {
  std::vector<Instance> corpus;
  std::unique_ptr<WordPieceTokenizer> tokenizer;
  std::unique_ptr<Model> model;
  AugmentedGroup group;
  RunConfig config;

  Fixture() {
    Rng rng(3);
    corpus = synth::generate(synth::seen_templates(), 20, rng, synth::Options{1.0, "b"});
    Corpus c{corpus, {}};
    for (const auto& i : corpus) {
      for (const auto& t : i.triplets) c.labels.add(t.relation);
    }
    tokenizer = make_tokenizer(config, c);
    model = make_model(config, *tokenizer);
    group = build_group(corpus[0], sample_candidates(corpus[0], c.labels.labels(), 5, rng),
                        *tokenizer, config.max_seq_length);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  ag::Matrix cost(n, n);
  for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = -4.0 * rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
}
BENCHMARK(BM_Hungarian)->Arg(5)->Arg(10)->Arg(20)->Arg(50);

void BM_EncodeGroup(benchmark::State& state) {
  auto& f = fixture();
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(f.model->encoder().encode(f.group));
}
BENCHMARK(BM_EncodeGroup)->Unit(benchmark::kMicrosecond);

void BM_Predict(benchmark::State& state) {
  auto& f = fixture();
  const InferenceConfig inference;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model->predict(f.group, 0.0, inference));
  }
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMicrosecond);

void BM_TrainingStep(benchmark::State& state) {
  auto& f = fixture();
  const std::vector<const Instance*> batch = {&f.corpus[0]};
  const std::vector<AugmentedGroup> groups = {f.group};
  for (auto _ : state) {
    f.model->parameters().zero_grad();
    ag::backward(batch_loss(*f.model, batch, groups, f.config.loss_weight, 1.0));
  }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
