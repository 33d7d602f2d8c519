#include <benchmark/benchmark.h>

#include "dtsl/network.hpp"
#include "dtsl/objective.hpp"
#include "dtsl/ops.hpp"
#include "dtsl/rng.hpp"

namespace {

using namespace dtsl;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({b, 128, 32, 50}, 1);
  const Tensor w = random_tensor({128, 128, 3, 3}, 2);
  const Tensor bias = random_tensor({128}, 3);
  for (auto _ : state) {
    Tensor y = ops::conv2d(x, w, bias);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(b));
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({b, 128, 32, 50}, 1);
  const Tensor w = random_tensor({128, 128, 3, 3}, 2);
  const Tensor dy = random_tensor({b, 128, 32, 50}, 4);
  for (auto _ : state) {
    Tensor dx(x.shape()), dw(w.shape()), db({128});
    ops::conv2d_backward(x, w, dy, &dx, &dw, &db);
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(b));
}
BENCHMARK(BM_Conv2dBackward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_TwoPathForward(benchmark::State& state) {
  const ArchDescriptor arch{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0)), 2};
  const NetworkParams params = init_network(arch, 7);
  const Tensor batch = random_tensor({4, 1, arch.max_len, arch.embed_dim}, 8);
  for (auto _ : state) {
    TwoPathOutput out = forward_two_path(batch, params, Mode::kInference, 0);
    benchmark::DoNotOptimize(out.z.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 4);
}
BENCHMARK(BM_TwoPathForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStepGraph(benchmark::State& state) {
  const ArchDescriptor arch{8, 8, 2};
  const NetworkParams params = init_network(arch, 7);
  const Tensor batch = random_tensor({25, 1, 8, 8}, 9);
  BatchLabels labels(25);
  for (std::size_t i = 0; i < 25; i += 2) labels[i] = i % 4 == 0 ? 0 : 1;
  for (auto _ : state) {
    TwoPathGraph fwd = build_two_path_graph(batch, params, nullptr, nullptr, true);
    const Var loss = total_loss_graph(fwd.graph, fwd.z, fwd.z_prime, labels, 0.5, 25);
    fwd.graph.backward(loss);
    benchmark::DoNotOptimize(&fwd.graph.grad(fwd.param_vars[0]));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 25);
}
BENCHMARK(BM_TrainStepGraph)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
