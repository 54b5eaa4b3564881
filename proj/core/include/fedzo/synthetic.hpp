#pragma once

#include <cstdint>

#include "fedzo/optimizers.hpp"
#include "fedzo/rng.hpp"
#include "fedzo/zo_estimator.hpp"

namespace fedzo {

/// Time-varying quadratic stream with every convergence-bound constant known
/// by construction:
///
///   l_t(x)     = 0.5 ||x||^2 + b(t),        b(t) = A sin(2 pi t / period)
///   l~_t(x)    = l_t(x) + <n_t, x>,         n_t ~ N(0, noise_sigma^2 I_d)
///
/// so L = 1, M = 1, sigma^2 = d * noise_sigma^2, omega_t = |b(t+1) - b(t)|,
/// and grad l_t(x) = x. The per-step noise n_t is derived from (seed, t), so
/// the two evaluations of a step see the same draw.
struct SyntheticConfig {
  std::size_t dim = 10;
  double noise_sigma = 1.0;
  double drift_amplitude = 1.0;
  int drift_period = 200;
  double x0_value = 1.0;  // x_0 = x0_value * (1, ..., 1)
  int steps = 1000;
  bool theorem_schedule = true;
  double eta = 0.01;  // used when theorem_schedule is off
  double mu = 0.05;

  void validate() const;

  double smoothness() const { return 1.0; }    // L
  double moment_bound() const { return 1.0; }  // M
  double sigma() const;                        // sqrt(d) * noise_sigma
  NumVec x0() const { return NumVec(dim, x0_value); }
};

/// b(t), the drifting offset.
double synthetic_offset(const SyntheticConfig& cfg, int t);

/// omega_bar = sum_{t=0}^{steps-1} |b(t+1) - b(t)|.
double synthetic_omega_bar(const SyntheticConfig& cfg, int steps);

/// Delta = l_0(x_0) - min_x l_steps(x).
double synthetic_delta(const SyntheticConfig& cfg);

/// The stochastic loss stream; noise_root should be a dedicated substream.
LossEval make_synthetic_loss(const SyntheticConfig& cfg, RngStream noise_root);

/// Theorem-1 schedule for this stream (or the explicit eta/mu when the
/// schedule flag is off).
StepSchedule synthetic_schedule(const SyntheticConfig& cfg);

/// Theorem-1 constants for this stream with the compressor's contraction
/// delta (1 when unknown analytically is a configuration error).
TheoremParams synthetic_theorem_params(const SyntheticConfig& cfg, double delta);

}  // namespace fedzo
