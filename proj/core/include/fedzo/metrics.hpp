#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fedzo/tracking_sim.hpp"

namespace fedzo {

/// Per-step records of one run. Collision and byte counters are cumulative
/// and non-decreasing; a diverged run keeps its partial arrays and is
/// excluded from aggregation.
struct MetricsSeries {
  std::vector<double> tracking_error;
  std::vector<long> cum_collisions;
  std::vector<double> grad_norm;
  std::vector<std::size_t> bytes;

  double final_error = 0.0;
  long total_collisions = 0;
  bool diverged = false;
  int diverged_step = -1;

  void push(const RoundMetrics& m);
  std::size_t steps() const { return tracking_error.size(); }
};

/// Pointwise mean and 95% normal confidence half-width over runs; divergent
/// runs are excluded and counted.
struct AggregateSeries {
  std::vector<double> error_mean, error_ci;
  std::vector<double> collisions_mean, collisions_ci;
  std::vector<double> grad_norm_mean;
  std::vector<double> bytes_mean;
  int runs_included = 0;
  int runs_diverged = 0;
};

AggregateSeries aggregate(const std::vector<MetricsSeries>& runs);

/// Shortest round-trip decimal formatting, locale-independent.
std::string format_double(double v);

void emit_csv(const MetricsSeries& series, const std::filesystem::path& path);
void emit_csv(const AggregateSeries& agg, const std::filesystem::path& path);

/// Convergence predicate for a mean tracking-error curve: the curve must
/// hold the band [0, 2 * floor] (floor = min over the last `window` steps)
/// from its last excursion to the end, with at least window/4 settled steps,
/// its `window`-sized block means must be non-increasing up to 5% slack, and
/// the floor must sit below `floor_fraction` of the starting error, so a
/// curve still descending at the end does not count as converged.
bool converged_within(const std::vector<double>& error_curve, int window = 100,
                      double floor_fraction = 0.05);

}  // namespace fedzo
