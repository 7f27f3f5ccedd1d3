#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "barfiq/dataio.hpp"
#include "barfiq/fringe.hpp"
#include "barfiq/head.hpp"
#include "barfiq/model.hpp"
#include "barfiq/network.hpp"
#include "barfiq/qfm.hpp"

using namespace barfiq;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor t(r, c);
  for (double& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

static void BM_Circuit(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0));
  std::vector<double> angles(nq, 0.37);
  for (auto _ : state) benchmark::DoNotOptimize(qfm::measure_z(qfm::run_circuit(angles, nq, 2)));
}
BENCHMARK(BM_Circuit)->Arg(2)->Arg(4)->Arg(8)->Arg(12);

static void BM_LinearAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Var q = constant(random_tensor(n, 32, 1)), k = constant(random_tensor(n, 32, 2)),
            v = constant(random_tensor(n, 32, 3));
  for (auto _ : state) benchmark::DoNotOptimize(model::linear_attention(q, k, v, 1e-6).value());
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_LinearAttention)->RangeMultiplier(4)->Range(2, 512)->Complexity(benchmark::oN);

static void BM_ReconstructStream(benchmark::State& state) {
  data::GeneratorConfig g;
  g.n_shots = static_cast<std::size_t>(state.range(0));
  const auto stream = data::generate_stream(g);
  for (auto _ : state) benchmark::DoNotOptimize(fringe::reconstruct_stream(stream.shots));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReconstructStream)->Arg(1000)->Arg(4000);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto window = static_cast<std::size_t>(state.range(0));
  BarfiqNetwork net(NetworkConfig{}, window, data::kNumChannels, 42);
  const Tensor x = random_tensor(window, data::kNumChannels, 5);
  const auto target = data::CircularTarget::from_angle(0.3);
  Rng drop(7);
  ForwardContext ctx;
  ctx.training = true;
  ctx.dropout_rng = &drop;
  for (auto _ : state) {
    net.parameters().zero_grad();
    backward(head::total_loss(net.forward(x, ctx).normalized, target, head::LossConfig{}));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(8)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
