#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fedzo/rng.hpp"
#include "fedzo/vec.hpp"

namespace fedzo {

struct SmoothingParams {
  double mu = 0.5;  // Gaussian smoothing radius, > 0
  void validate() const;
};

/// A stochastic loss surface: callable on (x, t). The smoothness constant L
/// and the gradient noise level sigma are carried along when known
/// (synthetic streams declare them; simulation losses leave them unset).
struct LossEval {
  std::function<double(std::span<const double>, int)> fn;
  double smoothness = 0.0;
  double noise = 0.0;

  /// Evaluates and throws NumericalError (with step index) on non-finite output.
  double operator()(std::span<const double> x, int t) const;
};

/// Two-point estimator: (l(x + mu*u, t) - l(x, t)) / mu * u.
/// Exactly two loss evaluations; u is supplied by the caller.
NumVec two_point_estimate(const LossEval& loss, std::span<const double> x,
                          const SmoothingParams& sp, std::span<const double> u, int t = 0);

// ---------------------------------------------------------------------------
// Pursuit losses: the source-attraction and neighbor-repulsion terms of the
// multi-agent tracking objective, plus their half-step lookahead variants in
// which the evaluation point is perturbed by mu*u and the other entity is
// advanced by half its own velocity.
// ---------------------------------------------------------------------------
namespace pursuit {

/// s = 0.5 * ||x_i - z_i||^2
double source_term(std::span<const double> x_i, std::span<const double> z_i);

/// s+ = 0.5 * ||x_i + mu*u - (z_i + 0.5*zeta_i)||^2
double source_term_plus(std::span<const double> x_i, std::span<const double> z_i,
                        std::span<const double> zeta_i, double mu,
                        std::span<const double> u);

/// r = lambda * (||x_i - x_j||^2 - r_sense^2)
double regularizer_term(std::span<const double> x_i, std::span<const double> x_j,
                        double lambda, double r_sense);

/// r+ = lambda * (||x_i + mu*u - (x_j + 0.5*xi_j)||^2 - r_sense^2)
double regularizer_term_plus(std::span<const double> x_i, std::span<const double> x_j,
                             std::span<const double> xi_j, double lambda, double r_sense,
                             double mu, std::span<const double> u);

}  // namespace pursuit

/// Read-only view of the multi-agent world needed by the structured
/// estimator and the federated round. All spans are length n_agents * dim.
struct WorldView {
  int n_agents = 0;
  int dim = 0;
  std::span<const double> agent_positions;
  std::span<const double> source_positions;
  std::span<const double> agent_velocities;   // per-step displacement / eta
  std::span<const double> source_velocities;  // per-step displacement
  const std::vector<std::vector<int>>* neighbor_sets = nullptr;
  double lambda = 0.0;
  double sense_radius = 0.0;
};

/// Per-neighbor structured estimator for agent i, a sparse vector in
/// R^(N*d): block i carries the source-term difference quotient, blocks
/// j in D_i carry the negated regularizer quotients, all other blocks are
/// exactly zero. One fresh Gaussian direction is consumed per participating
/// block in ascending j order, so the draw sequence is independent of the
/// neighbor-set container's iteration order.
NumVec structured_agent_estimate(int agent, const WorldView& world,
                                 const SmoothingParams& sp, RngStream& rng);

/// f(x) = 0.5 x^T A x + b^T x with symmetric A (row-major).
struct QuadraticLoss {
  std::vector<double> a;
  NumVec b;
  std::size_t dim = 0;

  static QuadraticLoss diagonal(NumVec diag, NumVec b = {});

  double value(std::span<const double> x) const;
  NumVec gradient(std::span<const double> x) const;
  double trace() const;
};

/// Exact Gaussian smoothing of a quadratic:
/// f_mu(x) = f(x) + (mu^2 / 2) * trace(A), grad f_mu = grad f.
std::pair<double, NumVec> smoothed_quadratic_oracle(const QuadraticLoss& q,
                                                    std::span<const double> x, double mu);

}  // namespace fedzo
