#include "fedzo/coverage_sim.hpp"

#include <cmath>
#include <numbers>

#include "fedzo/errors.hpp"

namespace fedzo {

void CoverageConfig::validate() const {
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (!(disk_radius > 0.0)) throw ConfigError("disk radius must be positive");
  if (!(overlap_fraction > 0.0 && overlap_fraction < 1.0)) {
    throw ConfigError("overlap fraction must be in (0,1)");
  }
  if (center_spacing < 0.0) throw ConfigError("center spacing must be >= 0");
  if (!(route_radius_factor > 0.0 && route_radius_factor < 1.0)) {
    throw ConfigError("route radius factor must be in (0,1)");
  }
  if (!(cycles > 0.0)) throw ConfigError("cycles must be positive");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(eta > 0.0) || !(mu > 0.0)) throw ConfigError("eta and mu must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (!(violation_distance > 0.0)) throw ConfigError("violation distance must be positive");
  if (neighbor_dropout_p < 0.0 || neighbor_dropout_p > 1.0) {
    throw ConfigError("neighbor dropout probability must be in [0,1]");
  }
}

double disk_spacing_for_overlap(double radius, double fraction) {
  // Lens area of two radius-R disks at center distance s:
  //   A(s) = 2 R^2 acos(s / 2R) - (s/2) sqrt(4R^2 - s^2),
  // strictly decreasing on (0, 2R); bisect for A(s) = fraction * pi R^2.
  const double target = fraction * std::numbers::pi * radius * radius;
  const auto lens = [radius](double s) {
    return 2.0 * radius * radius * std::acos(s / (2.0 * radius)) -
           0.5 * s * std::sqrt(4.0 * radius * radius - s * s);
  };
  double lo = 0.0, hi = 2.0 * radius;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lens(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double CoverageConfig::angular_speed() const {
  return 2.0 * std::numbers::pi * cycles / steps;
}

std::vector<std::array<double, 2>> CoverageConfig::disk_centers() const {
  const double spacing = center_spacing > 0.0
                             ? center_spacing
                             : disk_spacing_for_overlap(disk_radius, overlap_fraction);
  std::vector<std::array<double, 2>> centers(n_agents);
  for (int i = 0; i < n_agents; ++i) centers[i] = {i * spacing, 0.0};
  return centers;
}

NumVec route_target(int agent, int t, const CoverageConfig& cfg) {
  const auto centers = cfg.disk_centers();
  const double rho = cfg.route_radius_factor * cfg.disk_radius;
  const double phase0 = 2.0 * std::numbers::pi * agent / cfg.n_agents;
  const double phase = phase0 + cfg.angular_speed() * t;
  return {centers[agent][0] + rho * std::cos(phase),
          centers[agent][1] + rho * std::sin(phase)};
}

WorldState init_coverage_world(const CoverageConfig& cfg) {
  cfg.validate();
  WorldState ws;
  ws.n_agents = cfg.n_agents;
  ws.dim = 2;
  const auto centers = cfg.disk_centers();
  const std::size_t full = static_cast<std::size_t>(cfg.n_agents) * 2;
  ws.agent_positions.resize(full);
  ws.source_positions.resize(full);
  ws.agent_velocities.assign(full, 0.0);
  ws.source_velocities.assign(full, 0.0);
  for (int i = 0; i < cfg.n_agents; ++i) {
    ws.agent_positions[2 * i] = centers[i][0];
    ws.agent_positions[2 * i + 1] = centers[i][1];
    const NumVec z = route_target(i, 0, cfg);
    ws.source_positions[2 * i] = z[0];
    ws.source_positions[2 * i + 1] = z[1];
  }
  return ws;
}

int count_violations(const WorldState& ws, const CoverageConfig& cfg) {
  return count_pairs_within(ws, cfg.violation_distance);
}

namespace {

// Targets advance along their routes; the current-step velocity (used by the
// estimator lookahead) is the move the target makes this round.
void record_route_velocities(WorldState& ws, const CoverageConfig& cfg) {
  for (int i = 0; i < ws.n_agents; ++i) {
    const NumVec next = route_target(i, ws.step + 1, cfg);
    ws.source_velocities[2 * i] = next[0] - ws.source_positions[2 * i];
    ws.source_velocities[2 * i + 1] = next[1] - ws.source_positions[2 * i + 1];
  }
}

RoundMetrics close_round(WorldState& ws, const CoverageConfig& cfg,
                         double estimate_norm_sum, std::size_t bytes) {
  ws.step += 1;
  RoundMetrics m;
  m.new_collisions = count_violations(ws, cfg);
  ws.collision_count += m.new_collisions;
  m.cumulative_collisions = ws.collision_count;
  m.tracking_error = tracking_error(ws);
  m.mean_estimate_norm = estimate_norm_sum / cfg.n_agents;
  m.bytes = bytes;
  return m;
}

}  // namespace

RoundMetrics coverage_round(WorldState& ws, FedState& fed, const CoverageConfig& cfg,
                            const StepSchedule& sched, const CompressorSpec& comp,
                            bool first_order, bool error_feedback,
                            std::span<RngStream> estimator_rngs,
                            std::span<RngStream> compressor_rngs, RngStream& dropout_rng) {
  record_route_velocities(ws, cfg);
  const auto neighbors =
      neighbor_sets(ws, cfg.sense_radius(), cfg.neighbor_dropout_p, dropout_rng);
  const WorldView view = make_world_view(ws, neighbors, cfg.lambda, cfg.sense_radius());

  FedRoundResult result =
      first_order
          ? fo_fedavg_ef_round(fed, view, sched, comp, compressor_rngs)
          : fed_ef_zo_sgd_round(fed, view, sched, comp, estimator_rngs, compressor_rngs);

  fed = std::move(result.state);
  if (!error_feedback) {
    for (NumVec& e : fed.errors) e.assign(e.size(), 0.0);
  }
  ws.agent_positions = fed.positions;
  for (std::size_t c = 0; c < ws.agent_velocities.size(); ++c) {
    ws.agent_velocities[c] = -result.displacement[c] / sched.eta;
  }
  vec::axpy(1.0, ws.source_velocities, ws.source_positions);

  double norm_sum = 0.0;
  for (double n : result.estimate_norms) norm_sum += n;
  return close_round(ws, cfg, norm_sum, result.bytes);
}

RoundMetrics coverage_sgdm_round(WorldState& ws, std::vector<MomentumState>& agents,
                                 const CoverageConfig& cfg, double beta_m,
                                 std::span<RngStream> estimator_rngs) {
  record_route_velocities(ws, cfg);
  double norm_sum = 0.0;
  for (int i = 0; i < ws.n_agents; ++i) {
    const NumVec target(vec::block(ws.source_positions, i, 2).begin(),
                        vec::block(ws.source_positions, i, 2).end());
    LossEval own_source;
    own_source.fn = [&target](std::span<const double> y, int) {
      return pursuit::source_term(y, target);
    };
    agents[i] = sgdm_baseline_step(agents[i], own_source, cfg.eta, beta_m, cfg.mu,
                                   estimator_rngs[i], ws.step);
    norm_sum += vec::norm(agents[i].m);
    auto block = vec::mut_block(std::span<double>(ws.agent_positions), i, 2);
    std::copy(agents[i].x.begin(), agents[i].x.end(), block.begin());
  }
  vec::axpy(1.0, ws.source_velocities, ws.source_positions);
  return close_round(ws, cfg, norm_sum, 0);
}

}  // namespace fedzo
