#include <benchmark/benchmark.h>

#include <vector>

#include "snndelay/network.hpp"
#include "snndelay/neuron.hpp"
#include "snndelay/training.hpp"

using namespace snndelay;

namespace {

std::vector<double> random_row(std::size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(0.0, 1.0);
  return v;
}

Tensor3 random_batch(std::size_t B, std::size_t T, std::size_t C, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor3 x(B, T, C);
  for (auto& v : x.data) v = rng.bernoulli(0.1) ? 1.0 : 0.0;
  return x;
}

void BM_DelayStep(benchmark::State& state) {
  const auto nd = static_cast<std::size_t>(state.range(0));
  const auto coeffs = ShiftCoeffs::ones(nd);
  DelayState st = DelayState::zeros(nd);
  double x = 0.0;
  for (auto _ : state) {
    st = delay_step(st, coeffs, x);
    x += 1.0;
    benchmark::DoNotOptimize(st.buf.data());
  }
}
BENCHMARK(BM_DelayStep)->Arg(1)->Arg(5)->Arg(10)->Arg(100);

template <bool Adaptive>
void BM_NeuronStep(benchmark::State& state) {
  const auto nd = static_cast<std::size_t>(state.range(0));
  RngStream rng(1);
  const auto asd = random_row(nd, rng);
  const NeuronModel model = Adaptive ? NeuronModel::AdLIF : NeuronModel::LIF;
  NeuronState st = NeuronState::zero(model);
  DelayState dl = DelayState::zeros(nd);
  const NeuronParams p;
  for (auto _ : state) {
    const auto r = Adaptive ? adlif_step(st, dl, p, asd, 0.6, 0.6) : lif_step(st, dl, p, asd, 0.6, 0.6);
    st = r.state;
    dl = r.delay;
    benchmark::DoNotOptimize(st.u);
  }
}
BENCHMARK(BM_NeuronStep<false>)->Name("BM_LifStep")->Arg(0)->Arg(5)->Arg(10);
BENCHMARK(BM_NeuronStep<true>)->Name("BM_AdlifStep")->Arg(0)->Arg(5)->Arg(10);

void BM_GenericStep(benchmark::State& state) {
  const auto nd = static_cast<std::size_t>(state.range(0));
  RngStream rng(2);
  const auto spec = make_adlif_spec(NeuronParams{}, random_row(nd, rng));
  std::vector<double> vs(2, 0.0), vd(nd, 0.0);
  for (auto _ : state) {
    auto r = generic_step(spec, vs, vd, 0.6, 0.6);
    vs = std::move(r.v_s);
    vd = std::move(r.v_d);
    benchmark::DoNotOptimize(vs.data());
  }
}
BENCHMARK(BM_GenericStep)->Arg(0)->Arg(5)->Arg(10);

void BM_LayerForward(benchmark::State& state) {
  const auto nd = static_cast<std::size_t>(state.range(0));
  const auto spec = NetworkSpec::uniform(140, 20, 128, 1, NeuronModel::AdLIF, nd, {}, 0.0);
  Network net(spec, 3);
  const auto x = random_batch(32, 100, 140, 4);
  for (auto _ : state) {
    GradTape tape;
    benchmark::DoNotOptimize(net.forward(x, ForwardOptions{}, &tape));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32 * 100);
}
BENCHMARK(BM_LayerForward)->Arg(0)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_LayerForwardBackward(benchmark::State& state) {
  const auto nd = static_cast<std::size_t>(state.range(0));
  const bool trainable = state.range(1) != 0;
  const auto spec = NetworkSpec::uniform(140, 20, 128, 1, NeuronModel::AdLIF, nd,
                                         {DelaySchemeKind::Uniform, trainable}, 0.0);
  Network net(spec, 3);
  const auto x = random_batch(32, 100, 140, 4);
  ForwardOptions opts;
  opts.training = true;
  Matrix dlogits(32, 20, 1.0 / 32.0);
  for (auto _ : state) {
    GradTape tape;
    net.forward(x, opts, &tape);
    net.zero_grad();
    net.backward(tape, dlogits);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32 * 100);
}
BENCHMARK(BM_LayerForwardBackward)
    ->Args({0, 0})
    ->Args({5, 0})
    ->Args({10, 0})
    ->Args({5, 1})
    ->Args({10, 1})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
