#include <benchmark/benchmark.h>

#include "fedzo/coverage_sim.hpp"
#include "fedzo/tracking_sim.hpp"

using namespace fedzo;

namespace {

struct TrackingFixture {
  TrackingConfig cfg;
  WorldState ws;
  FedState fed;
  StepSchedule sched;
  std::vector<RngStream> est, cmp;
  RngStream dropout;

  explicit TrackingFixture(int n_agents) {
    cfg.n_agents = n_agents;
    RngStream world(1);
    ws = init_world(cfg, world);
    fed = FedState::init(ws.agent_positions, cfg.n_agents);
    sched = {cfg.eta, cfg.mu, AggregateNorm::kPerAgentBlock};
    const RngStream root(2);
    for (int i = 0; i < cfg.n_agents; ++i) {
      est.push_back(root.substream("estimator", i));
      cmp.push_back(root.substream("compressor", i));
    }
    dropout = root.substream("neighbor-dropout");
  }
};

}  // namespace

static void BM_TrackingFedRound(benchmark::State& state) {
  TrackingFixture f(static_cast<int>(state.range(0)));
  const CompressorSpec comp = CompressorSpec::parse("qsgd:1");
  for (auto _ : state) {
    benchmark::DoNotOptimize(tracking_fed_round(f.ws, f.fed, f.cfg, f.sched, comp, false,
                                                true, f.est, f.cmp, f.dropout));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TrackingFedRound)->Arg(5)->Arg(10)->Arg(20)->Arg(40)->Complexity();

static void BM_TrackingSgdmRound(benchmark::State& state) {
  TrackingFixture f(static_cast<int>(state.range(0)));
  std::vector<MomentumState> agents;
  for (int i = 0; i < f.cfg.n_agents; ++i) {
    const auto block = vec::block(f.ws.agent_positions, i, 2);
    agents.push_back(MomentumState::init(NumVec(block.begin(), block.end())));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(tracking_sgdm_round(f.ws, agents, f.cfg, 0.9, f.est));
  }
}
BENCHMARK(BM_TrackingSgdmRound)->Arg(20);

static void BM_StructuredEstimate(benchmark::State& state) {
  TrackingFixture f(static_cast<int>(state.range(0)));
  const auto neighbors =
      neighbor_sets(f.ws, f.cfg.sense_radius, f.cfg.neighbor_dropout_p, f.dropout);
  const WorldView view = make_world_view(f.ws, neighbors, f.cfg.lambda, f.cfg.sense_radius);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        structured_agent_estimate(0, view, {f.cfg.mu}, f.est[0]));
  }
}
BENCHMARK(BM_StructuredEstimate)->Arg(20)->Arg(40);

static void BM_CoverageRound(benchmark::State& state) {
  CoverageConfig cfg;
  cfg.n_agents = static_cast<int>(state.range(0));
  WorldState ws = init_coverage_world(cfg);
  FedState fed = FedState::init(ws.agent_positions, cfg.n_agents);
  const StepSchedule sched{cfg.eta, cfg.mu, AggregateNorm::kPerAgentBlock};
  const RngStream root(3);
  std::vector<RngStream> est, cmp;
  for (int i = 0; i < cfg.n_agents; ++i) {
    est.push_back(root.substream("estimator", i));
    cmp.push_back(root.substream("compressor", i));
  }
  RngStream dropout = root.substream("neighbor-dropout");
  const CompressorSpec comp = CompressorSpec::parse("qsgd:3");
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        coverage_round(ws, fed, cfg, sched, comp, false, true, est, cmp, dropout));
  }
}
BENCHMARK(BM_CoverageRound)->Arg(3);

BENCHMARK_MAIN();
