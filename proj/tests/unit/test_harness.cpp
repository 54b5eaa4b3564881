#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fedzo/errors.hpp"
#include "fedzo/experiment.hpp"

using namespace fedzo;

namespace {

RoundMetrics round_of(double err, long cum, double gnorm, std::size_t bytes) {
  RoundMetrics m;
  m.tracking_error = err;
  m.cumulative_collisions = cum;
  m.mean_estimate_norm = gnorm;
  m.bytes = bytes;
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("fedzo_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("metrics series accumulates counters") {
  MetricsSeries s;
  s.push(round_of(5.0, 1, 2.0, 100));
  s.push(round_of(4.0, 3, 1.5, 50));
  CHECK(s.bytes == std::vector<std::size_t>{100, 150});
  CHECK(s.final_error == 4.0);
  CHECK(s.total_collisions == 3);
}

TEST_CASE("csv emission") {
  MetricsSeries s;
  s.push(round_of(1.5, 0, 0.25, 8));
  s.push(round_of(0.7500000000000001, 2, 0.1, 8));
  s.push(round_of(0.1, 2, 0.0, 8));
  const auto dir = temp_dir("csv");

  emit_csv(s, dir / "run.csv");
  const std::string text = slurp(dir / "run.csv");
  CHECK(text ==
        "step,tracking_error,cum_collisions,grad_norm,bytes\n"
        "0,1.5,0,0.25,8\n"
        "1,0.7500000000000001,2,0.1,16\n"
        "2,0.1,2,0,24\n");

  emit_csv(s, dir / "again.csv");
  CHECK(slurp(dir / "again.csv") == text);  // re-emission is byte-identical

  // Values parse back exactly (shortest round-trip formatting).
  CHECK(std::stod("0.7500000000000001") == 0.7500000000000001);
}

TEST_CASE("aggregate basics") {
  MetricsSeries a, b;
  for (int t = 0; t < 3; ++t) {
    a.push(round_of(3.0, t, 1.0, 10));
    b.push(round_of(5.0, t, 3.0, 10));
  }

  SUBCASE("single run: mean is the run, zero-width CI") {
    const AggregateSeries agg = aggregate({a});
    CHECK(agg.error_mean == std::vector<double>{3.0, 3.0, 3.0});
    CHECK(agg.error_ci == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(agg.runs_included == 1);
  }
  SUBCASE("two constant runs at 3 and 5 average to 4") {
    const AggregateSeries agg = aggregate({a, b});
    CHECK(agg.error_mean[0] == doctest::Approx(4.0));
    CHECK(agg.grad_norm_mean[2] == doctest::Approx(2.0));
  }
  SUBCASE("aggregation is permutation invariant") {
    const AggregateSeries ab = aggregate({a, b});
    const AggregateSeries ba = aggregate({b, a});
    CHECK(ab.error_mean == ba.error_mean);
    CHECK(ab.error_ci == ba.error_ci);
  }
  SUBCASE("diverged runs are excluded and counted") {
    MetricsSeries bad;
    bad.push(round_of(1e9, 0, 0.0, 0));
    bad.diverged = true;
    const AggregateSeries agg = aggregate({a, bad, b});
    CHECK(agg.runs_included == 2);
    CHECK(agg.runs_diverged == 1);
    CHECK(agg.error_mean[0] == doctest::Approx(4.0));
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(aggregate({}), ConfigError);
  }
}

TEST_CASE("confidence interval shrinks like one over sqrt(runs)") {
  RngStream rng(42);
  auto make_runs = [&rng](int count) {
    std::vector<MetricsSeries> runs(count);
    for (auto& r : runs) {
      for (int t = 0; t < 4; ++t) r.push(round_of(10.0 + rng.next_gaussian(), 0, 0.0, 0));
    }
    return runs;
  };
  const double ci16 = aggregate(make_runs(16)).error_ci[0];
  const double ci64 = aggregate(make_runs(64)).error_ci[0];
  CHECK(ci64 < ci16);
  CHECK(ci64 == doctest::Approx(ci16 / 2.0).epsilon(0.5));
}

TEST_CASE("convergence predicate") {
  std::vector<double> curve;
  SUBCASE("descending then flat converges") {
    for (int t = 0; t < 300; ++t) curve.push_back(std::max(400.0 - 2.0 * t, 4.0));
    CHECK(converged_within(curve));
  }
  SUBCASE("still descending at the end does not converge") {
    for (int t = 0; t < 300; ++t) curve.push_back(400.0 - 1.0 * t);
    CHECK(!converged_within(curve));
  }
  SUBCASE("high plateau fails the floor-fraction clause") {
    for (int t = 0; t < 300; ++t) curve.push_back(std::max(400.0 - 2.0 * t, 100.0));
    CHECK(!converged_within(curve));
  }
  SUBCASE("rebound after entering the band fails") {
    for (int t = 0; t < 300; ++t) curve.push_back(std::max(400.0 - 4.0 * t, 4.0));
    for (int t = 200; t < 300; ++t) curve[t] = 4.0 + 0.8 * (t - 200);
    CHECK(!converged_within(curve));
  }
  SUBCASE("too short to judge") {
    curve.assign(150, 1.0);
    CHECK(!converged_within(curve));
  }
}

TEST_CASE("synthetic stream structure") {
  SyntheticConfig cfg;
  cfg.dim = 4;
  cfg.noise_sigma = 0.7;
  const RngStream root(5);
  const LossEval loss = make_synthetic_loss(cfg, root.substream("world-init"));

  SUBCASE("value at the origin is the drift offset") {
    const NumVec zero(4, 0.0);
    for (int t : {0, 3, 57}) {
      CHECK(loss.fn(zero, t) == doctest::Approx(synthetic_offset(cfg, t)).epsilon(1e-12));
    }
  }
  SUBCASE("per-step noise is deterministic and linear in x") {
    const NumVec x{1.0, -2.0, 0.5, 3.0};
    const double v1 = loss.fn(x, 7);
    const double v2 = loss.fn(x, 7);
    CHECK(v1 == v2);
    const NumVec x2 = vec::scaled(x, 2.0);
    const double noise1 = v1 - 0.5 * vec::norm_sq(x) - synthetic_offset(cfg, 7);
    const double noise2 =
        loss.fn(x2, 7) - 0.5 * vec::norm_sq(x2) - synthetic_offset(cfg, 7);
    CHECK(noise2 == doctest::Approx(2.0 * noise1).epsilon(1e-9));
  }
  SUBCASE("distinct steps see distinct noise") {
    const NumVec x{1.0, -2.0, 0.5, 3.0};
    const double base = 0.5 * vec::norm_sq(x);
    CHECK(loss.fn(x, 1) - synthetic_offset(cfg, 1) !=
          loss.fn(x, 2) - synthetic_offset(cfg, 2));
    CHECK(std::fabs(loss.fn(x, 1) - base - synthetic_offset(cfg, 1)) > 0.0);
  }
  SUBCASE("omega_bar equals the sampled total variation of the drift") {
    // Full sine periods have total variation close to 4 * amplitude each.
    cfg.drift_amplitude = 2.0;
    cfg.drift_period = 200;
    const double omega = synthetic_omega_bar(cfg, 200);
    CHECK(omega <= 4.0 * 2.0 + 1e-9);
    CHECK(omega >= 4.0 * 2.0 * 0.99);
  }
  SUBCASE("sigma aggregates per-coordinate noise") {
    CHECK(cfg.sigma() == doctest::Approx(std::sqrt(4.0) * 0.7));
  }
}

TEST_CASE("method specs parse, print and label") {
  const MethodSpec sgdm = MethodSpec::parse("sgdm");
  CHECK(sgdm.algo == Algorithm::kSgdm);
  CHECK(sgdm.label() == "sgdm");

  const MethodSpec qsgd = MethodSpec::parse("qsgd:1+ef");
  CHECK(qsgd.algo == Algorithm::kFedEfZoSgd);
  CHECK(qsgd.error_feedback);
  CHECK(qsgd.label() == "qsgd1b-ef");
  CHECK(qsgd.to_string() == "qsgd:1+ef");

  const MethodSpec fo = MethodSpec::parse("fo:qsgd:1+ef");
  CHECK(fo.algo == Algorithm::kFoFedAvg);
  CHECK(fo.label() == "fo-qsgd1b-ef");

  CHECK(MethodSpec::parse("none").label() == "no-comp");
  CHECK(MethodSpec::parse("topk:0.5").label() == "topk");
  CHECK(MethodSpec::parse("topk:0.25+ef").label() == "topk0.25-ef");
  CHECK(MethodSpec::parse("dropout-u:0.5").label() == "dropout-u");
  CHECK_THROWS_AS(MethodSpec::parse("adam"), ConfigError);
}

TEST_CASE("eta scales with the square root of the agent count") {
  CHECK(eta_for_agents(1.0, 20, 5) == 0.5);
  CHECK(eta_for_agents(1.0, 20, 10) == 0.71);
  CHECK(eta_for_agents(1.0, 20, 15) == 0.87);
  CHECK(eta_for_agents(1.0, 20, 20) == 1.0);
  CHECK(eta_for_agents(1.0, 20, 25) == 1.12);
}

TEST_CASE("world initialization draws are method-independent") {
  TrackingConfig cfg;
  cfg.n_agents = 5;
  cfg.steps = 3;
  Trajectory ta, tb;
  run_tracking_single(cfg, MethodSpec::parse("sgdm"), AggregateNorm::kPerAgentBlock, 0.9,
                      77, &ta);
  run_tracking_single(cfg, MethodSpec::parse("qsgd:1+ef"), AggregateNorm::kPerAgentBlock,
                      0.9, 77, &tb);
  REQUIRE(!ta.agent_positions.empty());
  CHECK(ta.agent_positions[0] == tb.agent_positions[0]);
  CHECK(ta.source_positions[0] == tb.source_positions[0]);
}

TEST_CASE("divergent runs are recorded, not thrown") {
  SyntheticConfig cfg;
  cfg.steps = 200;
  cfg.theorem_schedule = false;
  cfg.eta = 1e5;
  cfg.mu = 0.05;
  const MetricsSeries s = run_synthetic_single(cfg, MethodSpec::parse("none"), 3);
  CHECK(s.diverged);
  CHECK(s.diverged_step >= 0);
}

TEST_CASE("experiment output is deterministic across serial and parallel") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kTracking;
  cfg.tracking.n_agents = 4;
  cfg.tracking.steps = 20;
  cfg.runs = 3;
  cfg.base_seed = 11;
  cfg.methods = {MethodSpec::parse("qsgd:1+ef"), MethodSpec::parse("sgdm")};

  const auto dir_a = temp_dir("serial");
  const auto dir_b = temp_dir("parallel");
  cfg.out_dir = dir_a.string();
  cfg.jobs = 1;
  run_experiment(cfg);
  cfg.out_dir = dir_b.string();
  cfg.jobs = 4;
  run_experiment(cfg);

  int compared = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir_a)) {
    if (entry.path().extension() != ".csv") continue;
    const auto rel = std::filesystem::relative(entry.path(), dir_a);
    CHECK(slurp(entry.path()) == slurp(dir_b / rel));
    ++compared;
  }
  CHECK(compared == 2 * (3 + 1) + 1);  // per-method runs + means, plus summary
}

TEST_CASE("experiment results expose cells by label") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kTracking;
  cfg.tracking.n_agents = 3;
  cfg.tracking.steps = 10;
  cfg.runs = 2;
  cfg.methods = {MethodSpec::parse("none")};
  cfg.sweep.parameter = "lambda";
  cfg.sweep.values = {0.0, 5.0};

  const ExperimentResults results = run_experiment(cfg);
  REQUIRE(results.cells.size() == 2);
  CHECK(results.find("no-comp", "lambda=0") != nullptr);
  CHECK(results.find("no-comp", "lambda=5") != nullptr);
  CHECK(results.find("no-comp", "lambda=3") == nullptr);
  for (const CellResult& cell : results.cells) {
    CHECK(cell.runs.size() == 2);
    CHECK(cell.agg.error_mean.size() == 10);
  }
}

TEST_CASE("first-order rounds converge with and without compression") {
  // Same seeds, identity vs 1-bit quantization with error feedback: the
  // trajectories differ but both track the sources down to a small floor.
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kTracking;
  cfg.tracking.n_agents = 6;
  cfg.tracking.steps = 700;
  cfg.runs = 3;
  cfg.base_seed = 21;
  cfg.methods = {MethodSpec::parse("fo:none"), MethodSpec::parse("fo:qsgd:1+ef")};
  const ExperimentResults results = run_experiment(cfg);
  const CellResult* plain = results.find("fo-no-comp");
  const CellResult* quantized = results.find("fo-qsgd1b-ef");
  REQUIRE(plain != nullptr);
  REQUIRE(quantized != nullptr);
  CHECK(plain->agg.error_mean != quantized->agg.error_mean);
  CHECK(plain->agg.error_mean.back() < 20.0);
  CHECK(quantized->agg.error_mean.back() < 20.0);
}

TEST_CASE("coverage threshold sweep brackets the violation rule") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kCoverage;
  cfg.coverage.n_agents = 2;
  cfg.coverage.steps = 40;
  cfg.runs = 1;
  cfg.methods = {MethodSpec::parse("sgdm")};
  cfg.sweep.parameter = "threshold";
  cfg.sweep.values = {3.0, 5.0, 10.0};
  const ExperimentResults results = run_experiment(cfg);
  REQUIRE(results.cells.size() == 3);
  // Larger thresholds count at least as many pair-steps.
  long prev = -1;
  for (const char* label : {"threshold=3", "threshold=5", "threshold=10"}) {
    const CellResult* cell = results.find("sgdm", label);
    REQUIRE(cell != nullptr);
    CHECK(cell->runs[0].total_collisions >= prev);
    prev = cell->runs[0].total_collisions;
  }
}

TEST_CASE("agent-count sweep produces one cell per count") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kTracking;
  cfg.tracking.steps = 5;
  cfg.runs = 1;
  cfg.methods = {MethodSpec::parse("none")};
  cfg.sweep.parameter = "n";
  cfg.sweep.values = {5, 10};
  const ExperimentResults results = run_experiment(cfg);
  REQUIRE(results.cells.size() == 2);
  CHECK(results.find("no-comp", "n=5") != nullptr);
  CHECK(results.find("no-comp", "n=10") != nullptr);
}

TEST_CASE("invalid sweeps are rejected with the valid names") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kTracking;
  cfg.sweep.parameter = "gamma";
  cfg.sweep.values = {1.0};
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("lambda") != std::string::npos);
    CHECK(what.find("bits") != std::string::npos);
  }
}

TEST_CASE("config files round-trip") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kCoverage;
  cfg.runs = 7;
  cfg.base_seed = 99;
  cfg.coverage.n_agents = 4;
  cfg.coverage.lambda = 50.0;
  cfg.methods = {MethodSpec::parse("qsgd:3+ef"), MethodSpec::parse("sgdm")};
  cfg.normalize = AggregateNorm::kFullVector;
  cfg.sweep.parameter = "threshold";
  cfg.sweep.values = {3.0, 5.0, 10.0};

  const auto dir = temp_dir("config");
  save_experiment_config(cfg, dir / "config.json");
  const ExperimentConfig loaded = load_experiment_config(dir / "config.json");
  CHECK(loaded.scenario == Scenario::kCoverage);
  CHECK(loaded.runs == 7);
  CHECK(loaded.base_seed == 99);
  CHECK(loaded.coverage.n_agents == 4);
  CHECK(loaded.coverage.lambda == 50.0);
  CHECK(loaded.methods.size() == 2);
  CHECK(loaded.methods[0].to_string() == "qsgd:3+ef");
  CHECK(loaded.normalize == AggregateNorm::kFullVector);
  CHECK(loaded.sweep.parameter == "threshold");
  CHECK(loaded.sweep.values == std::vector<double>{3.0, 5.0, 10.0});
}

TEST_CASE("trajectory dump matches the step count") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::kTracking;
  cfg.tracking.n_agents = 2;
  cfg.tracking.steps = 5;
  cfg.runs = 1;
  cfg.methods = {MethodSpec::parse("none")};
  cfg.dump_trajectories = true;
  const auto dir = temp_dir("traj");
  cfg.out_dir = dir.string();
  run_experiment(cfg);
  const std::string text = slurp(dir / "no-comp" / "traj0000.csv");
  // header + initial state + one row per step
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  CHECK(text.rfind("step,a0_0,a0_1,a1_0,a1_1,z0_0,z0_1,z1_0,z1_1\n", 0) == 0);
}
