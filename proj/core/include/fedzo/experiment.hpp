#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedzo/compressors.hpp"
#include "fedzo/coverage_sim.hpp"
#include "fedzo/metrics.hpp"
#include "fedzo/optimizers.hpp"
#include "fedzo/synthetic.hpp"
#include "fedzo/tracking_sim.hpp"

namespace fedzo {

enum class Scenario { kTracking, kCoverage, kSyntheticQuadratic };

enum class Algorithm { kFedEfZoSgd, kSgdm, kFoFedAvg };

/// One curve of an experiment: algorithm, compressor, error feedback.
/// Text forms: "sgdm", "<compressor>[+ef]", "fo:<compressor>[+ef]",
/// e.g. "qsgd:1+ef", "topk:0.5", "fo:qsgd:1+ef", "none".
struct MethodSpec {
  Algorithm algo = Algorithm::kFedEfZoSgd;
  CompressorSpec compressor;
  bool error_feedback = false;

  static MethodSpec parse(std::string_view text);
  std::string to_string() const;
  /// Short name used for directories and plots ("qsgd1b-ef", "no-comp", ...).
  std::string label() const;
};

/// Scalar parameter sweep. Valid parameters: "lambda", "n" (agent count,
/// with optional paired etas, default eta * sqrt(n / base_n) rounded to two
/// decimals), "delta" (dropout-b drop-probability; note this is 1 - keep_p),
/// "bits" (qsgd), and "threshold" (coverage violation distance).
struct SweepSpec {
  std::string parameter;  // empty = no sweep
  std::vector<double> values;
  std::vector<double> etas;  // optional, paired with values for "n"

  bool active() const { return !parameter.empty(); }
};

struct ExperimentConfig {
  Scenario scenario = Scenario::kTracking;
  int runs = 0;  // 0 = scenario default (100 tracking, 5 coverage, 50 synthetic)
  std::uint64_t base_seed = 1;
  TrackingConfig tracking;
  CoverageConfig coverage;
  SyntheticConfig synthetic;
  std::vector<MethodSpec> methods;  // empty = scenario default set
  SweepSpec sweep;
  AggregateNorm normalize = AggregateNorm::kPerAgentBlock;
  double sgdm_momentum = 0.9;
  std::string out_dir;  // empty = keep results in memory only
  int jobs = 0;         // parallel runs; 0 = hardware, 1 = serial
  bool dump_trajectories = false;

  int resolved_runs() const;
  std::vector<MethodSpec> resolved_methods() const;
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const ExperimentConfig& cfg,
                            const std::filesystem::path& path);

/// Agent and source positions per step, collected when trajectory dumping
/// is enabled.
struct Trajectory {
  int dim = 0;
  std::vector<NumVec> agent_positions;
  std::vector<NumVec> source_positions;
};

/// Named substreams of one run: world initialization, neighbor dropout, and
/// per-agent estimator/compressor streams, all derived from base_seed + run
/// so that every method of a run sees identical world randomness.
struct RunStreams {
  RngStream world;
  RngStream dropout;
  std::vector<RngStream> estimators;
  std::vector<RngStream> compressors;

  static RunStreams make(std::uint64_t run_seed, int n_agents);
};

MetricsSeries run_tracking_single(const TrackingConfig& cfg, const MethodSpec& method,
                                  AggregateNorm normalize, double sgdm_momentum,
                                  std::uint64_t run_seed, Trajectory* trajectory = nullptr);

MetricsSeries run_coverage_single(const CoverageConfig& cfg, const MethodSpec& method,
                                  AggregateNorm normalize, double sgdm_momentum,
                                  std::uint64_t run_seed, Trajectory* trajectory = nullptr);

/// Single-agent EF-ZO-SGD on the synthetic quadratic stream. The
/// tracking_error column records ||grad l_t(x_t)|| = ||x_t|| at the moment
/// the estimate was formed, so mean(tracking_error^2) is the quantity bounded
/// by the convergence theorem.
MetricsSeries run_synthetic_single(const SyntheticConfig& cfg, const MethodSpec& method,
                                   std::uint64_t run_seed);

struct CellResult {
  std::string sweep_label;  // "" when not sweeping, else e.g. "lambda=5"
  MethodSpec method;
  std::vector<MetricsSeries> runs;
  AggregateSeries agg;
};

struct ExperimentResults {
  std::vector<CellResult> cells;

  const CellResult* find(std::string_view method_label,
                         std::string_view sweep_label = "") const;
};

/// Runs the full experiment (sweep points x methods x runs, run r seeded
/// with base_seed + r) and, when out_dir is set, writes per-run CSVs, mean
/// CSVs, summary.csv and a config echo.
ExperimentResults run_experiment(const ExperimentConfig& cfg);

/// Learning rate for an agent-count sweep point: base_eta * sqrt(n/base_n),
/// rounded to two decimals.
double eta_for_agents(double base_eta, int base_n, double n);

void emit_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

}  // namespace fedzo
