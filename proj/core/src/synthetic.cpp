#include "fedzo/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "fedzo/errors.hpp"

namespace fedzo {

void SyntheticConfig::validate() const {
  if (dim < 1) throw ConfigError("synthetic dim must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  if (drift_amplitude < 0.0) throw ConfigError("drift amplitude must be >= 0");
  if (drift_period < 1) throw ConfigError("drift period must be >= 1");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!theorem_schedule && (!(eta > 0.0) || !(mu > 0.0))) {
    throw ConfigError("explicit eta and mu must be positive");
  }
}

double SyntheticConfig::sigma() const {
  return std::sqrt(static_cast<double>(dim)) * noise_sigma;
}

double synthetic_offset(const SyntheticConfig& cfg, int t) {
  return cfg.drift_amplitude *
         std::sin(2.0 * std::numbers::pi * t / cfg.drift_period);
}

double synthetic_omega_bar(const SyntheticConfig& cfg, int steps) {
  double total = 0.0;
  for (int t = 0; t < steps; ++t) {
    total += std::fabs(synthetic_offset(cfg, t + 1) - synthetic_offset(cfg, t));
  }
  return total;
}

double synthetic_delta(const SyntheticConfig& cfg) {
  const double initial =
      0.5 * cfg.x0_value * cfg.x0_value * cfg.dim + synthetic_offset(cfg, 0);
  return initial - synthetic_offset(cfg, cfg.steps);
}

LossEval make_synthetic_loss(const SyntheticConfig& cfg, RngStream noise_root) {
  LossEval loss;
  loss.smoothness = cfg.smoothness();
  loss.noise = cfg.sigma();
  loss.fn = [cfg, noise_root](std::span<const double> x, int t) {
    double value = 0.5 * vec::norm_sq(x) + synthetic_offset(cfg, t);
    RngStream noise = noise_root.substream("loss-noise", static_cast<std::uint64_t>(t));
    for (double xi : x) value += noise.next_gaussian() * cfg.noise_sigma * xi;
    return value;
  };
  return loss;
}

StepSchedule synthetic_schedule(const SyntheticConfig& cfg) {
  cfg.validate();
  if (!cfg.theorem_schedule) return StepSchedule{cfg.eta, cfg.mu, AggregateNorm::kNone};
  return StepSchedule::theorem1(cfg.sigma(), cfg.moment_bound(), cfg.smoothness(), cfg.dim,
                                static_cast<double>(cfg.steps));
}

TheoremParams synthetic_theorem_params(const SyntheticConfig& cfg, double delta) {
  TheoremParams p;
  p.Delta = synthetic_delta(cfg);
  p.sigma = cfg.sigma();
  p.M = cfg.moment_bound();
  p.L = cfg.smoothness();
  p.d = static_cast<double>(cfg.dim);
  p.T = static_cast<double>(cfg.steps);
  p.delta = delta;
  p.omega_bar = synthetic_omega_bar(cfg, cfg.steps);
  return p;
}

}  // namespace fedzo
