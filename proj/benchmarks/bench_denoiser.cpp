#include <benchmark/benchmark.h>

#include <array>
#include <random>

#include "duet/attention.hpp"
#include "duet/denoiser.hpp"
#include "duet/metrics.hpp"
#include "duet/pipeline.hpp"
#include "duet/synth.hpp"
#include "duet/util.hpp"

namespace {

struct Fixture {
  duet::ModelConfig config;
  duet::Denoiser model{config, 1};
  duet::HashEmbedder embedder{config.text_width};
  duet::TextBundle text;
  duet::MotionPair x;

  Fixture() {
    const auto sample = duet::synth_generate(duet::Scenario::approach, {}, 3);
    text = duet::make_text_bundle(duet::decompose_prompt(sample.prompt), embedder);
    x = {sample.motion.person1.frames.cast<double>(), sample.motion.person2.frames.cast<double>()};
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_DenoiserPredict(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(f.model.predict(f.x, 500, f.text));
}
BENCHMARK(BM_DenoiserPredict)->Unit(benchmark::kMillisecond);

void BM_DenoiserForwardBackward(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) {
    duet::ad::Tape tape;
    const auto out = f.model.forward(tape, tape.constant(f.x.person1), tape.constant(f.x.person2),
                                     500, f.text);
    const auto loss = duet::ad::add(duet::ad::mse(out.person1, tape.constant(f.x.person1)),
                                    duet::ad::mse(out.person2, tape.constant(f.x.person2)));
    f.model.params().zero_grad();
    tape.backward(loss);
  }
}
BENCHMARK(BM_DenoiserForwardBackward)->Unit(benchmark::kMillisecond);

void BM_MixedAttention(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  const duet::Matrix x = duet::random_normal(s, 64, 1.0, rng);
  const duet::Matrix text = duet::random_normal(12, 64, 1.0, rng);
  const duet::Matrix wq = duet::random_normal(64, 64, 0.1, rng);
  const std::array<duet::MatrixSource, 2> sources{{
      {x, duet::random_normal(64, 64, 0.1, rng), duet::random_normal(64, 64, 0.1, rng)},
      {text, duet::random_normal(64, 64, 0.1, rng), duet::random_normal(64, 64, 0.1, rng)},
  }};
  for (auto _ : state) benchmark::DoNotOptimize(duet::mixed_attention(x, wq, sources));
  state.SetComplexityN(s);
}
BENCHMARK(BM_MixedAttention)->RangeMultiplier(2)->Range(16, 512)->Complexity(benchmark::oN);

void BM_Fid(benchmark::State& state) {
  std::mt19937_64 rng(9);
  const duet::Matrix a = duet::random_normal(256, 32, 1.0, rng);
  const duet::Matrix b = duet::random_normal(256, 32, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(duet::fid(a, b));
}
BENCHMARK(BM_Fid);

}  // namespace

BENCHMARK_MAIN();
