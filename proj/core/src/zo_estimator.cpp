#include "fedzo/zo_estimator.hpp"

#include <algorithm>
#include <cmath>

#include "fedzo/errors.hpp"

namespace fedzo {

void SmoothingParams::validate() const {
  if (!(mu > 0.0)) throw ConfigError("smoothing parameter mu must be positive");
}

double LossEval::operator()(std::span<const double> x, int t) const {
  const double value = fn(x, t);
  if (!std::isfinite(value)) {
    throw NumericalError("loss evaluation returned non-finite value", t);
  }
  return value;
}

NumVec two_point_estimate(const LossEval& loss, std::span<const double> x,
                          const SmoothingParams& sp, std::span<const double> u, int t) {
  sp.validate();
  if (u.size() != x.size()) throw ConfigError("two_point_estimate: dim(u) != dim(x)");
  NumVec perturbed(x.begin(), x.end());
  vec::axpy(sp.mu, u, perturbed);
  const double quotient = (loss(perturbed, t) - loss(x, t)) / sp.mu;
  return vec::scaled(u, quotient);
}

namespace pursuit {

namespace {
// ||a + mu*u - (b + 0.5*v)||^2 without forming temporaries.
double shifted_dist_sq(std::span<const double> a, std::span<const double> b,
                       std::span<const double> v, double mu, std::span<const double> u) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double diff = a[c] + mu * u[c] - (b[c] + 0.5 * v[c]);
    s += diff * diff;
  }
  return s;
}
}  // namespace

double source_term(std::span<const double> x_i, std::span<const double> z_i) {
  double s = 0.0;
  for (std::size_t c = 0; c < x_i.size(); ++c) {
    const double diff = x_i[c] - z_i[c];
    s += diff * diff;
  }
  return 0.5 * s;
}

double source_term_plus(std::span<const double> x_i, std::span<const double> z_i,
                        std::span<const double> zeta_i, double mu,
                        std::span<const double> u) {
  return 0.5 * shifted_dist_sq(x_i, z_i, zeta_i, mu, u);
}

double regularizer_term(std::span<const double> x_i, std::span<const double> x_j,
                        double lambda, double r_sense) {
  double s = 0.0;
  for (std::size_t c = 0; c < x_i.size(); ++c) {
    const double diff = x_i[c] - x_j[c];
    s += diff * diff;
  }
  return lambda * (s - r_sense * r_sense);
}

double regularizer_term_plus(std::span<const double> x_i, std::span<const double> x_j,
                             std::span<const double> xi_j, double lambda, double r_sense,
                             double mu, std::span<const double> u) {
  return lambda * (shifted_dist_sq(x_i, x_j, xi_j, mu, u) - r_sense * r_sense);
}

}  // namespace pursuit

NumVec structured_agent_estimate(int agent, const WorldView& world,
                                 const SmoothingParams& sp, RngStream& rng) {
  sp.validate();
  if (world.neighbor_sets == nullptr) throw ConfigError("world view lacks neighbor sets");
  const int n = world.n_agents;
  const int d = world.dim;
  const auto& neighbors = (*world.neighbor_sets)[agent];

  const auto x_i = vec::block(world.agent_positions, agent, d);
  NumVec estimate(static_cast<std::size_t>(n) * d, 0.0);

  // Ascending block order; a direction is drawn only for participating blocks.
  for (int j = 0; j < n; ++j) {
    const bool is_self = j == agent;
    const bool is_neighbor =
        !is_self && std::find(neighbors.begin(), neighbors.end(), j) != neighbors.end();
    if (!is_self && !is_neighbor) continue;

    const NumVec u = rng.gaussian_vector(d);
    double quotient = 0.0;
    if (is_self) {
      // Difference quotient of the full local loss under a perturbation of
      // x_i: source term plus every sensed regularizer term, so that
      // E[block i] = grad_{x_i} l_i (the same gradient the first-order
      // benchmark transmits analytically).
      const auto z_i = vec::block(world.source_positions, agent, d);
      const auto zeta_i = vec::block(world.source_velocities, agent, d);
      quotient = (pursuit::source_term_plus(x_i, z_i, zeta_i, sp.mu, u) -
                  pursuit::source_term(x_i, z_i)) /
                 sp.mu;
      for (int nbr : neighbors) {
        const auto x_j = vec::block(world.agent_positions, nbr, d);
        const auto xi_j = vec::block(world.agent_velocities, nbr, d);
        quotient -= (pursuit::regularizer_term_plus(x_i, x_j, xi_j, world.lambda,
                                                    world.sense_radius, sp.mu, u) -
                     pursuit::regularizer_term(x_i, x_j, world.lambda,
                                               world.sense_radius)) /
                    sp.mu;
      }
    } else {
      // The quotient estimates the x_i-gradient of the repulsion term; by
      // antisymmetry of ||x_i - x_j||^2 this equals minus its x_j-gradient,
      // so the block applied to neighbor j takes the quotient with a plus
      // sign: E[block j] = grad_{x_j}(-r_ij) = 2 lambda (x_i - x_j), which
      // pushes the neighbor away from the sensing agent.
      const auto x_j = vec::block(world.agent_positions, j, d);
      const auto xi_j = vec::block(world.agent_velocities, j, d);
      quotient = (pursuit::regularizer_term_plus(x_i, x_j, xi_j, world.lambda,
                                                 world.sense_radius, sp.mu, u) -
                  pursuit::regularizer_term(x_i, x_j, world.lambda, world.sense_radius)) /
                 sp.mu;
    }
    if (!std::isfinite(quotient)) {
      throw NumericalError("structured estimate: non-finite difference quotient", -1, agent);
    }
    vec::axpy(quotient, u, vec::mut_block(std::span<double>(estimate), j, d));
  }
  return estimate;
}

QuadraticLoss QuadraticLoss::diagonal(NumVec diag, NumVec b) {
  QuadraticLoss q;
  q.dim = diag.size();
  q.a.assign(q.dim * q.dim, 0.0);
  for (std::size_t i = 0; i < q.dim; ++i) q.a[i * q.dim + i] = diag[i];
  q.b = b.empty() ? NumVec(q.dim, 0.0) : std::move(b);
  return q;
}

double QuadraticLoss::value(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < dim; ++j) row += a[i * dim + j] * x[j];
    s += 0.5 * x[i] * row + b[i] * x[i];
  }
  return s;
}

NumVec QuadraticLoss::gradient(std::span<const double> x) const {
  NumVec g(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < dim; ++j) row += a[i * dim + j] * x[j];
    g[i] = row + b[i];
  }
  return g;
}

double QuadraticLoss::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim; ++i) t += a[i * dim + i];
  return t;
}

std::pair<double, NumVec> smoothed_quadratic_oracle(const QuadraticLoss& q,
                                                    std::span<const double> x, double mu) {
  return {q.value(x) + 0.5 * mu * mu * q.trace(), q.gradient(x)};
}

}  // namespace fedzo
