#include "gagn/comms.hpp"
#include "gagn/config.hpp"
#include "gagn/learning.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

gagn::AttributedGraph bench_graph(int classes_scale) {
  gagn::SyntheticSpec spec = gagn::small_synthetic_spec();
  spec.class_sizes = {20 * classes_scale, 20 * classes_scale, 20 * classes_scale};
  spec.num_edges = static_cast<std::size_t>(120 * classes_scale);
  spec.vocabulary = 64;
  return gagn::split_labels(gagn::make_synthetic(spec, 1), 0.8, 1);
}

void BM_Round(benchmark::State& state) {
  gagn::AttributedGraph g = bench_graph(static_cast<int>(state.range(0)));
  gagn::EngineConfig cfg;
  cfg.comms.middleware_steps = 10;
  gagn::RoundEngine engine(g, gagn::make_agents(g, {}, 1), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(engine.run_round());
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.num_nodes()));
}
BENCHMARK(BM_Round)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_FuseD(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int dz = static_cast<int>(state.range(0));
  const int deg_max = 32;
  std::normal_distribution<double> n;
  auto mat = [&](int r, int c) {
    gagn::Matrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
  };
  std::vector<gagn::Matrix> nb;
  for (int k = 0; k < 5; ++k) nb.push_back(mat(dz, deg_max));
  std::vector<const gagn::Matrix*> recv;
  for (const auto& m : nb) recv.push_back(&m);
  const gagn::Vector omega = gagn::Vector::Ones(5);
  const gagn::Vector z = mat(dz, 1).col(0);
  const gagn::Matrix hop = mat(10, dz);
  gagn::CommsConfig cfg;
  cfg.middleware_steps = 10;
  gagn::Matrix theta = mat(dz, deg_max);
  for (auto _ : state) {
    gagn::Matrix t = theta;
    gagn::fuse_D(t, recv, omega, z, hop, 0.05, cfg, rng);
    benchmark::DoNotOptimize(t.data());
  }
}
BENCHMARK(BM_FuseD)->Arg(64)->Arg(512)->Arg(1433)->Unit(benchmark::kMicrosecond);

void BM_LossGrad(benchmark::State& state) {
  gagn::AttributedGraph g = bench_graph(4);
  auto agents = gagn::make_agents(g, {}, 1);
  const gagn::NodeId hub = [&] {
    gagn::NodeId best = 0;
    for (gagn::NodeId v = 0; v < g.num_nodes(); ++v)
      if (g.degree(v) > g.degree(best)) best = v;
    return best;
  }();
  gagn::AgentState& a = agents[hub];
  a.has_label = true;
  const gagn::NeighborView view = gagn::direct_view(a, g);
  gagn::Matrix grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gagn::grad_AM(a, view));
    benchmark::DoNotOptimize(gagn::loss_grad_D(a.theta_D, a, view, &grad));
  }
}
BENCHMARK(BM_LossGrad);

}  // namespace

BENCHMARK_MAIN();
