#include "fedzo/tracking_sim.hpp"

#include <cmath>

#include "fedzo/errors.hpp"

namespace fedzo {

void TrackingConfig::validate() const {
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (!(sense_radius > collision_radius && collision_radius > 0.0)) {
    throw ConfigError("need sense radius r > collision radius R > 0");
  }
  if (beta < 0.0) throw ConfigError("source speed beta must be >= 0");
  if (neighbor_dropout_p < 0.0 || neighbor_dropout_p > 1.0) {
    throw ConfigError("neighbor dropout probability must be in [0,1]");
  }
  if (agent_box[0] > agent_box[1] || source_box[0] > source_box[1]) {
    throw ConfigError("init boxes must be well-ordered");
  }
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
}

WorldState init_world(const TrackingConfig& cfg, RngStream& world_rng) {
  cfg.validate();
  WorldState ws;
  ws.n_agents = cfg.n_agents;
  ws.dim = cfg.dim;
  const std::size_t full = static_cast<std::size_t>(cfg.n_agents) * cfg.dim;
  ws.agent_positions.resize(full);
  ws.source_positions.resize(full);
  ws.agent_velocities.assign(full, 0.0);
  ws.source_velocities.assign(full, 0.0);
  for (double& c : ws.agent_positions) {
    c = world_rng.next_uniform(cfg.agent_box[0], cfg.agent_box[1]);
  }
  for (double& c : ws.source_positions) {
    c = world_rng.next_uniform(cfg.source_box[0], cfg.source_box[1]);
  }
  return ws;
}

void record_evasion_velocities(WorldState& ws, double beta) {
  for (int i = 0; i < ws.n_agents; ++i) {
    const auto x = vec::block(ws.agent_positions, i, ws.dim);
    const auto z = vec::block(ws.source_positions, i, ws.dim);
    auto zeta = vec::mut_block(std::span<double>(ws.source_velocities), i, ws.dim);
    const double distance = vec::dist(z, x);
    for (int c = 0; c < ws.dim; ++c) {
      zeta[c] = distance == 0.0 ? 0.0 : beta * (z[c] - x[c]) / distance;
    }
  }
}

WorldState evasion_step(WorldState ws, double beta) {
  record_evasion_velocities(ws, beta);
  vec::axpy(1.0, ws.source_velocities, ws.source_positions);
  return ws;
}

std::vector<std::vector<int>> neighbor_sets(const WorldState& ws, double r, double p,
                                            RngStream& rng) {
  if (p < 0.0 || p > 1.0) throw ConfigError("neighbor dropout probability must be in [0,1]");
  std::vector<std::vector<int>> sets(ws.n_agents);
  for (int i = 0; i < ws.n_agents; ++i) {
    const auto x_i = vec::block(ws.agent_positions, i, ws.dim);
    for (int j = 0; j < ws.n_agents; ++j) {
      if (j == i) continue;
      const auto x_j = vec::block(ws.agent_positions, j, ws.dim);
      if (vec::dist(x_i, x_j) > r) continue;
      if (rng.next_double() > p) sets[i].push_back(j);
    }
  }
  return sets;
}

double local_loss(int agent, const WorldState& ws, const std::vector<int>& neighbors,
                  double lambda, double r) {
  const auto x_i = vec::block(ws.agent_positions, agent, ws.dim);
  const auto z_i = vec::block(ws.source_positions, agent, ws.dim);
  double loss = pursuit::source_term(x_i, z_i);
  for (int j : neighbors) {
    const auto x_j = vec::block(ws.agent_positions, j, ws.dim);
    loss -= pursuit::regularizer_term(x_i, x_j, lambda, r);
  }
  return loss;
}

LocalLossPlusTerms local_loss_plus(int agent, const WorldState& ws,
                                   const std::vector<int>& neighbors, double lambda,
                                   double r, double mu, std::span<const NumVec> u_blocks) {
  if (u_blocks.size() != neighbors.size() + 1) {
    throw ConfigError("local_loss_plus: need one direction per term");
  }
  const auto x_i = vec::block(ws.agent_positions, agent, ws.dim);
  const auto z_i = vec::block(ws.source_positions, agent, ws.dim);
  const auto zeta_i = vec::block(ws.source_velocities, agent, ws.dim);

  LocalLossPlusTerms terms;
  terms.s_plus = pursuit::source_term_plus(x_i, z_i, zeta_i, mu, u_blocks[0]);
  terms.r_plus.reserve(neighbors.size());
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const auto x_j = vec::block(ws.agent_positions, neighbors[k], ws.dim);
    const auto xi_j = vec::block(ws.agent_velocities, neighbors[k], ws.dim);
    terms.r_plus.push_back(
        pursuit::regularizer_term_plus(x_i, x_j, xi_j, lambda, r, mu, u_blocks[k + 1]));
  }
  return terms;
}

int count_pairs_within(const WorldState& ws, double radius) {
  int pairs = 0;
  for (int i = 0; i < ws.n_agents; ++i) {
    const auto x_i = vec::block(ws.agent_positions, i, ws.dim);
    for (int j = i + 1; j < ws.n_agents; ++j) {
      if (vec::dist(x_i, vec::block(ws.agent_positions, j, ws.dim)) <= radius) ++pairs;
    }
  }
  return pairs;
}

int count_collisions(const WorldState& ws, double collision_radius) {
  if (!(collision_radius > 0.0)) throw ConfigError("collision radius must be positive");
  return count_pairs_within(ws, collision_radius);
}

double tracking_error(const WorldState& ws, bool squared) {
  double total = 0.0;
  for (int i = 0; i < ws.n_agents; ++i) {
    const double distance = vec::dist(vec::block(ws.agent_positions, i, ws.dim),
                                      vec::block(ws.source_positions, i, ws.dim));
    total += squared ? distance * distance : distance;
  }
  return total / ws.n_agents;
}

WorldView make_world_view(const WorldState& ws,
                          const std::vector<std::vector<int>>& neighbors, double lambda,
                          double r) {
  WorldView view;
  view.n_agents = ws.n_agents;
  view.dim = ws.dim;
  view.agent_positions = ws.agent_positions;
  view.source_positions = ws.source_positions;
  view.agent_velocities = ws.agent_velocities;
  view.source_velocities = ws.source_velocities;
  view.neighbor_sets = &neighbors;
  view.lambda = lambda;
  view.sense_radius = r;
  return view;
}

namespace {

RoundMetrics close_round(WorldState& ws, const TrackingConfig& cfg, double estimate_norm_sum,
                         std::size_t bytes) {
  ws.step += 1;
  RoundMetrics m;
  m.new_collisions = count_collisions(ws, cfg.collision_radius);
  ws.collision_count += m.new_collisions;
  m.cumulative_collisions = ws.collision_count;
  m.tracking_error = tracking_error(ws);
  m.mean_estimate_norm = estimate_norm_sum / cfg.n_agents;
  m.bytes = bytes;
  return m;
}

}  // namespace

RoundMetrics tracking_fed_round(WorldState& ws, FedState& fed, const TrackingConfig& cfg,
                                const StepSchedule& sched, const CompressorSpec& comp,
                                bool first_order, bool error_feedback,
                                std::span<RngStream> estimator_rngs,
                                std::span<RngStream> compressor_rngs,
                                RngStream& dropout_rng) {
  record_evasion_velocities(ws, cfg.beta);
  const auto neighbors =
      neighbor_sets(ws, cfg.sense_radius, cfg.neighbor_dropout_p, dropout_rng);
  const WorldView view = make_world_view(ws, neighbors, cfg.lambda, cfg.sense_radius);

  FedRoundResult result =
      first_order
          ? fo_fedavg_ef_round(fed, view, sched, comp, compressor_rngs)
          : fed_ef_zo_sgd_round(fed, view, sched, comp, estimator_rngs, compressor_rngs);

  fed = std::move(result.state);
  if (!error_feedback) {
    for (NumVec& e : fed.errors) e.assign(e.size(), 0.0);
  }
  ws.agent_positions = fed.positions;
  // xi_j for the next round: applied position change over eta.
  for (std::size_t c = 0; c < ws.agent_velocities.size(); ++c) {
    ws.agent_velocities[c] = -result.displacement[c] / sched.eta;
  }
  vec::axpy(1.0, ws.source_velocities, ws.source_positions);

  double norm_sum = 0.0;
  for (double n : result.estimate_norms) norm_sum += n;
  return close_round(ws, cfg, norm_sum, result.bytes);
}

RoundMetrics tracking_sgdm_round(WorldState& ws, std::vector<MomentumState>& agents,
                                 const TrackingConfig& cfg, double beta_m,
                                 std::span<RngStream> estimator_rngs) {
  record_evasion_velocities(ws, cfg.beta);
  double norm_sum = 0.0;
  for (int i = 0; i < ws.n_agents; ++i) {
    const NumVec target(vec::block(ws.source_positions, i, ws.dim).begin(),
                        vec::block(ws.source_positions, i, ws.dim).end());
    LossEval own_source;
    own_source.fn = [&target](std::span<const double> y, int) {
      return pursuit::source_term(y, target);
    };
    agents[i] = sgdm_baseline_step(agents[i], own_source, cfg.eta, beta_m, cfg.mu,
                                   estimator_rngs[i], ws.step);
    norm_sum += vec::norm(agents[i].m);
    auto block = vec::mut_block(std::span<double>(ws.agent_positions), i, ws.dim);
    std::copy(agents[i].x.begin(), agents[i].x.end(), block.begin());
  }
  vec::axpy(1.0, ws.source_velocities, ws.source_positions);
  return close_round(ws, cfg, norm_sum, 0);
}

}  // namespace fedzo
