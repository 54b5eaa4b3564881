#include "fedzo/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "fedzo/errors.hpp"

namespace fedzo {
namespace {

void check_iterate(std::span<const double> x, int step, int agent = -1) {
  if (!vec::all_finite(x)) throw DivergenceError("iterate became non-finite", step, agent);
  if (vec::norm(x) > kDivergenceNorm) {
    throw DivergenceError("iterate norm exceeded divergence guard", step, agent);
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
}

}  // namespace

void StepSchedule::validate() const {
  require_positive(eta, "eta");
  require_positive(mu, "mu");
}

StepSchedule StepSchedule::theorem1(double sigma, double M, double L, std::size_t d,
                                    double T) {
  require_positive(sigma, "sigma");
  require_positive(M, "M");
  require_positive(L, "L");
  require_positive(T, "T");
  StepSchedule s;
  const double dd = static_cast<double>(d);
  s.eta = 1.0 / (sigma * std::sqrt((dd + 4.0) * M * T * L));
  s.mu = 1.0 / ((dd + 4.0) * std::sqrt(T));
  return s;
}

StepSchedule StepSchedule::theorem2(double sigma, double M, double Q, double L,
                                    std::size_t d, double T) {
  require_positive(Q, "Q");
  StepSchedule s = theorem1(sigma, M, L, d, T);
  s.eta /= std::sqrt(Q);
  return s;
}

EfState EfState::init(NumVec x0) {
  EfState st;
  st.e.assign(x0.size(), 0.0);
  st.x = std::move(x0);
  return st;
}

EfStepResult ef_apply(const EfState& st, std::span<const double> g, double eta,
                      const CompressorSpec& comp, RngStream& comp_rng) {
  if (g.size() != st.x.size()) throw ConfigError("ef_apply: estimate dimension mismatch");
  // p = g + e
  NumVec p(g.begin(), g.end());
  vec::axpy(1.0, st.e, p);
  const CompressorSpec resolved = comp.resolved(p.size());
  NumVec c = compress(resolved, p, comp_rng);

  EfStepResult r;
  r.state.x = st.x;
  vec::axpy(-eta, c, r.state.x);  // x' = x - eta * C(p)
  r.state.e = std::move(p);
  vec::axpy(-1.0, c, r.state.e);  // e' = p - C(p)
  r.state.t = st.t + 1;
  r.bytes = transmitted_bytes(resolved, c);
  r.estimate.assign(g.begin(), g.end());
  r.transmitted = std::move(c);
  check_iterate(r.state.x, r.state.t);
  return r;
}

EfStepResult ef_zo_sgd_step(const EfState& st, const LossEval& loss,
                            const StepSchedule& sched, const CompressorSpec& comp,
                            RngStream& rng, RngStream* comp_rng) {
  sched.validate();
  const NumVec u = rng.gaussian_vector(st.x.size());
  const NumVec g = two_point_estimate(loss, st.x, SmoothingParams{sched.mu}, u, st.t);
  return ef_apply(st, g, sched.eta, comp, comp_rng != nullptr ? *comp_rng : rng);
}

FedState FedState::init(NumVec positions, int n_agents) {
  FedState st;
  st.errors.assign(n_agents, NumVec(positions.size(), 0.0));
  st.positions = std::move(positions);
  return st;
}

FedRoundResult fed_round(const FedState& st, int dim, const AgentEstimator& estimator,
                         const StepSchedule& sched, const CompressorSpec& comp,
                         std::span<RngStream> estimator_rngs,
                         std::span<RngStream> compressor_rngs) {
  sched.validate();
  const int n = static_cast<int>(st.errors.size());
  const std::size_t full = st.positions.size();
  if (full != static_cast<std::size_t>(n) * dim) {
    throw ConfigError("fed_round: positions size is not n_agents * dim");
  }
  const CompressorSpec resolved = comp.resolved(full);

  FedRoundResult r;
  r.state.errors.resize(n);
  r.state.step = st.step + 1;
  r.estimate_norms.resize(n);
  r.aggregate.assign(full, 0.0);

  // Agent side (lines 5-11): estimate, add feedback, compress, transmit.
  // Reduction is in ascending agent order so parallel drivers stay bitwise
  // identical to this serial loop.
  for (int i = 0; i < n; ++i) {
    const NumVec g = estimator(i, estimator_rngs[i]);
    if (g.size() != full) throw ConfigError("fed_round: estimator dimension mismatch");
    r.estimate_norms[i] = vec::norm(g);

    NumVec p(g);
    vec::axpy(1.0, st.errors[i], p);
    NumVec c = compress(resolved, p, compressor_rngs[i]);
    r.bytes += transmitted_bytes(resolved, c);

    vec::axpy(1.0 / n, c, r.aggregate);
    vec::axpy(-1.0, c, p);  // e' = p - C(p)
    r.state.errors[i] = std::move(p);
  }

  // Server side (lines 12-14): normalize, update, broadcast.
  r.displacement = r.aggregate;
  switch (sched.normalize) {
    case AggregateNorm::kNone:
      vec::scale(r.displacement, sched.eta);
      break;
    case AggregateNorm::kFullVector: {
      const double norm = vec::norm(r.displacement);
      // Zero aggregate with normalization on: skip movement this round.
      vec::scale(r.displacement, norm == 0.0 ? 0.0 : sched.eta / norm);
      break;
    }
    case AggregateNorm::kPerAgentBlock:
      for (int i = 0; i < n; ++i) {
        auto blk = vec::mut_block(std::span<double>(r.displacement), i, dim);
        const double norm = vec::norm(blk);
        vec::scale(blk, norm == 0.0 ? 0.0 : sched.eta / norm);
      }
      break;
  }
  r.state.positions = st.positions;
  vec::axpy(-1.0, r.displacement, r.state.positions);
  check_iterate(r.state.positions, r.state.step);
  return r;
}

FedRoundResult fed_ef_zo_sgd_round(const FedState& st, const WorldView& world,
                                   const StepSchedule& sched, const CompressorSpec& comp,
                                   std::span<RngStream> estimator_rngs,
                                   std::span<RngStream> compressor_rngs) {
  const SmoothingParams sp{sched.mu};
  const auto estimator = [&](int agent, RngStream& rng) {
    return structured_agent_estimate(agent, world, sp, rng);
  };
  return fed_round(st, world.dim, estimator, sched, comp, estimator_rngs, compressor_rngs);
}

NumVec local_loss_gradient(int agent, const WorldView& world) {
  const int d = world.dim;
  NumVec g(static_cast<std::size_t>(world.n_agents) * d, 0.0);
  const auto x_i = vec::block(world.agent_positions, agent, d);
  const auto z_i = vec::block(world.source_positions, agent, d);
  auto g_i = vec::mut_block(std::span<double>(g), agent, d);
  for (int c = 0; c < d; ++c) g_i[c] = x_i[c] - z_i[c];
  for (int j : (*world.neighbor_sets)[agent]) {
    const auto x_j = vec::block(world.agent_positions, j, d);
    auto g_j = vec::mut_block(std::span<double>(g), j, d);
    for (int c = 0; c < d; ++c) {
      const double repulsion = 2.0 * world.lambda * (x_i[c] - x_j[c]);
      g_i[c] -= repulsion;
      g_j[c] += repulsion;
    }
  }
  return g;
}

FedRoundResult fo_fedavg_ef_round(const FedState& st, const WorldView& world,
                                  const StepSchedule& sched, const CompressorSpec& comp,
                                  std::span<RngStream> compressor_rngs) {
  const auto estimator = [&](int agent, RngStream&) {
    return local_loss_gradient(agent, world);
  };
  // The exact gradient consumes no estimator randomness; compressor streams
  // are reused as placeholders for the unused argument.
  return fed_round(st, world.dim, estimator, sched, comp, compressor_rngs, compressor_rngs);
}

MomentumState MomentumState::init(NumVec x0) {
  MomentumState st;
  st.m.assign(x0.size(), 0.0);
  st.x = std::move(x0);
  return st;
}

MomentumState sgdm_baseline_step(const MomentumState& st, const LossEval& source_loss,
                                 double eta, double beta_m, double mu, RngStream& rng,
                                 int t) {
  const NumVec u = rng.gaussian_vector(st.x.size());
  const NumVec g = two_point_estimate(source_loss, st.x, SmoothingParams{mu}, u, t);

  MomentumState next;
  next.m = vec::scaled(st.m, beta_m);
  vec::axpy(1.0, g, next.m);
  next.x = st.x;
  const double norm = vec::norm(next.m);
  if (norm > 0.0) vec::axpy(-eta / norm, next.m, next.x);
  check_iterate(next.x, t + 1);
  return next;
}

namespace {

void validate_theorem_params(const TheoremParams& p, bool multi_agent) {
  require_positive(p.Delta, "Delta");
  require_positive(p.sigma, "sigma");
  require_positive(p.M, "M");
  require_positive(p.L, "L");
  require_positive(p.d, "d");
  require_positive(p.T, "T");
  if (!(p.delta > 0.0 && p.delta <= 1.0)) throw ConfigError("delta must be in (0,1]");
  if (p.omega_bar < 0.0) throw ConfigError("omega_bar must be non-negative");
  if (multi_agent) {
    require_positive(p.Q, "Q");
    require_positive(p.Z, "Z");
  }
}

}  // namespace

double theorem1_bound(const TheoremParams& p) {
  validate_theorem_params(p, false);
  const double d = p.d, L = p.L, M = p.M, s = p.sigma, T = p.T, dl = p.delta;
  const double rt = std::sqrt(T);
  const double t1 = 8.0 * p.Delta * s * std::sqrt((d + 4.0) * M * L) / rt;
  const double t2 = 8.0 * s * d * std::pow(L, 1.5) * std::sqrt(M) /
                    (std::pow(T, 1.5) * std::pow(d + 3.0, 1.5));
  const double t3 = 2.0 * std::pow(d + 6.0, 1.5) * std::pow(L, 2.5) /
                    (s * std::pow(d + 4.0, 2.5) * std::pow(T, 1.5) * std::sqrt(M));
  const double t4 = 8.0 * s * std::sqrt((d + 4.0) * L) / (std::sqrt(M) * rt);
  const double t5 = std::pow(d + 3.0, 3.0) * L * L / (std::pow(d + 2.0, 2.0) * T);
  const double t6 = 32.0 * L / (dl * dl * s * s * M * T);
  const double t7 =
      8.0 * std::pow(d + 6.0, 3.0) * std::pow(L, 3.0) /
      (dl * dl * s * s * std::pow(d + 4.0, 3.0) * M * T * T);
  const double t8 = 8.0 * p.omega_bar * s * std::sqrt((d + 4.0) * M * L) / rt;
  return t1 + t2 + t3 + t4 + t5 + t6 + t7 + t8;
}

double theorem2_bound(const TheoremParams& p) {
  validate_theorem_params(p, true);
  const double d = p.d, L = p.L, M = p.M, Q = p.Q, Z = p.Z, s = p.sigma, T = p.T,
               dl = p.delta;
  const double rt = std::sqrt(T);
  const double t1 = 8.0 * p.Delta * s * std::sqrt((d + 4.0) * M * Q * L) / rt;
  const double t2 = 8.0 * std::pow(L, 1.5) * d * s * std::sqrt(M * Q) /
                    (std::pow(d + 4.0, 1.5) * std::pow(T, 1.5));
  const double t3 =
      8.0 * std::sqrt(L * (d + 4.0) * M) * Z * Z / (s * std::sqrt(Q) * rt);
  const double t4 = 8.0 * std::sqrt(L * (d + 4.0)) * s / (std::sqrt(M * Q) * rt);
  const double t5 = 2.0 * std::pow(L, 2.5) * std::pow(d + 6.0, 3.0) /
                    (std::pow(d + 4.0, 1.5) * std::pow(T, 1.5) * s * std::sqrt(M * Q));
  const double t6 = 32.0 * L * Z * Z / (s * s * Q * T * dl * dl);
  const double t7 = 32.0 * L / (M * Q * T * dl * dl);
  const double t8 = 8.0 * std::pow(L, 3.0) * std::pow(d + 6.0, 3.0) /
                    (std::pow(d + 4.0, 3.0) * T * T * s * s * M * Q);
  const double t9 = 8.0 * p.omega_bar * s * std::sqrt((d + 4.0) * M * Q * L) / rt;
  return t1 + t2 + t3 + t4 + t5 + t6 + t7 + t8 + t9;
}

}  // namespace fedzo
