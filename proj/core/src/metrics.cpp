#include "fedzo/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "fedzo/errors.hpp"

namespace fedzo {

void MetricsSeries::push(const RoundMetrics& m) {
  tracking_error.push_back(m.tracking_error);
  cum_collisions.push_back(m.cumulative_collisions);
  grad_norm.push_back(m.mean_estimate_norm);
  bytes.push_back((bytes.empty() ? 0 : bytes.back()) + m.bytes);
  final_error = m.tracking_error;
  total_collisions = m.cumulative_collisions;
}

AggregateSeries aggregate(const std::vector<MetricsSeries>& runs) {
  if (runs.empty()) throw ConfigError("aggregate: no runs");
  AggregateSeries agg;
  std::size_t steps = 0;
  for (const MetricsSeries& r : runs) {
    if (r.diverged) {
      ++agg.runs_diverged;
      continue;
    }
    if (agg.runs_included == 0) {
      steps = r.steps();
    } else if (r.steps() != steps) {
      throw ConfigError("aggregate: runs have unequal lengths");
    }
    ++agg.runs_included;
  }
  if (agg.runs_included == 0) return agg;

  const double n = agg.runs_included;
  const auto mean_ci = [&](auto&& get, std::vector<double>& mean, std::vector<double>* ci) {
    mean.assign(steps, 0.0);
    for (const MetricsSeries& r : runs) {
      if (r.diverged) continue;
      for (std::size_t s = 0; s < steps; ++s) mean[s] += get(r, s);
    }
    for (double& m : mean) m /= n;
    if (ci == nullptr) return;
    ci->assign(steps, 0.0);
    if (agg.runs_included > 1) {
      for (const MetricsSeries& r : runs) {
        if (r.diverged) continue;
        for (std::size_t s = 0; s < steps; ++s) {
          const double d = get(r, s) - mean[s];
          (*ci)[s] += d * d;
        }
      }
      for (double& c : *ci) c = 1.96 * std::sqrt(c / (n - 1.0) / n);
    }
  };

  mean_ci([](const MetricsSeries& r, std::size_t s) { return r.tracking_error[s]; },
          agg.error_mean, &agg.error_ci);
  mean_ci([](const MetricsSeries& r,
             std::size_t s) { return static_cast<double>(r.cum_collisions[s]); },
          agg.collisions_mean, &agg.collisions_ci);
  mean_ci([](const MetricsSeries& r, std::size_t s) { return r.grad_norm[s]; },
          agg.grad_norm_mean, nullptr);
  mean_ci([](const MetricsSeries& r, std::size_t s) { return static_cast<double>(r.bytes[s]); },
          agg.bytes_mean, nullptr);
  return agg;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void emit_csv(const MetricsSeries& series, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "step,tracking_error,cum_collisions,grad_norm,bytes\n";
  for (std::size_t s = 0; s < series.steps(); ++s) {
    out << s << ',' << format_double(series.tracking_error[s]) << ','
        << series.cum_collisions[s] << ',' << format_double(series.grad_norm[s]) << ','
        << series.bytes[s] << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void emit_csv(const AggregateSeries& agg, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "step,tracking_error,tracking_error_ci95,cum_collisions,cum_collisions_ci95,"
         "grad_norm,bytes\n";
  for (std::size_t s = 0; s < agg.error_mean.size(); ++s) {
    out << s << ',' << format_double(agg.error_mean[s]) << ','
        << format_double(agg.error_ci[s]) << ',' << format_double(agg.collisions_mean[s])
        << ',' << format_double(agg.collisions_ci[s]) << ','
        << format_double(agg.grad_norm_mean[s]) << ',' << format_double(agg.bytes_mean[s])
        << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

bool converged_within(const std::vector<double>& error_curve, int window,
                      double floor_fraction) {
  const int steps = static_cast<int>(error_curve.size());
  if (steps < 2 * window) return false;

  // The floor must represent genuine convergence, not a slow descent caught
  // at the end: it has to sit far below the starting error.
  const double floor =
      *std::min_element(error_curve.end() - window, error_curve.end());
  if (floor > floor_fraction * error_curve.front()) return false;

  // Settled: after its last excursion above twice the floor, the curve must
  // hold the band for a nontrivial stretch before the end.
  const double band = 2.0 * floor;
  int settled_at = 0;
  for (int s = 0; s < steps; ++s) {
    if (error_curve[s] > band) settled_at = s + 1;
  }
  if (settled_at > steps - window / 4) return false;

  // Non-increasing trend: window-block means may rise at most 5%.
  double prev = -1.0;
  for (int start = 0; start + window <= steps; start += window) {
    double mean = 0.0;
    for (int s = start; s < start + window; ++s) mean += error_curve[s];
    mean /= window;
    if (prev >= 0.0 && mean > 1.05 * prev) return false;
    prev = mean;
  }
  return true;
}

}  // namespace fedzo
