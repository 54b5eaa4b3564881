#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fedzo/compressors.hpp"
#include "fedzo/optimizers.hpp"
#include "fedzo/rng.hpp"
#include "fedzo/vec.hpp"
#include "fedzo/zo_estimator.hpp"

namespace fedzo {

/// World parameters of the evasive target-tracking scenario.
struct TrackingConfig {
  int n_agents = 20;
  int dim = 2;
  double sense_radius = 10.0;     // r
  double collision_radius = 3.0;  // R
  double lambda = 7.0;
  double beta = 0.1;  // source speed
  double neighbor_dropout_p = 0.5;
  std::array<double, 2> agent_box{-100.0, 100.0};
  std::array<double, 2> source_box{200.0, 400.0};
  int steps = 1000;
  double eta = 1.0;
  double mu = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct WorldState {
  int n_agents = 0;
  int dim = 0;
  NumVec agent_positions;
  NumVec source_positions;
  NumVec agent_velocities;   // last applied displacement / eta
  NumVec source_velocities;  // current-step evasion velocity
  int step = 0;
  long collision_count = 0;  // cumulative pair-steps
};

/// Uniform placement of agents and sources in their init boxes; velocities
/// and counters start at zero.
WorldState init_world(const TrackingConfig& cfg, RngStream& world_rng);

/// Each source moves by beta * (z - x) / ||z - x||, directly away from its
/// tracker; a source coincident with its agent does not move that step.
/// The applied velocity is recorded in source_velocities.
WorldState evasion_step(WorldState ws, double beta);

/// Records the evasion velocities without moving the sources. The estimator
/// lookahead needs the current-step velocity before the sources move.
void record_evasion_velocities(WorldState& ws, double beta);

/// Directed neighbor sets with dropout: for every ordered in-radius pair
/// (j -> i) one X ~ U[0,1] is drawn and j joins D_i iff X > p.
std::vector<std::vector<int>> neighbor_sets(const WorldState& ws, double r, double p,
                                            RngStream& rng);

/// Local loss l_i = s_i - sum_{j in D_i} r_ij.
double local_loss(int agent, const WorldState& ws, const std::vector<int>& neighbors,
                  double lambda, double r);

/// Lookahead terms of the perturbed loss, reported per block so difference
/// quotients can be formed: u_blocks[0] pairs with the source term, and
/// u_blocks[1 + k] with neighbors[k].
struct LocalLossPlusTerms {
  double s_plus = 0.0;
  std::vector<double> r_plus;
};
LocalLossPlusTerms local_loss_plus(int agent, const WorldState& ws,
                                   const std::vector<int>& neighbors, double lambda,
                                   double r, double mu, std::span<const NumVec> u_blocks);

/// Unordered agent pairs within distance `radius` at the current step.
int count_pairs_within(const WorldState& ws, double radius);
int count_collisions(const WorldState& ws, double collision_radius);

/// Mean (or squared mean) agent-to-own-source Euclidean distance.
double tracking_error(const WorldState& ws, bool squared = false);

/// World view over the current state for the structured estimator.
WorldView make_world_view(const WorldState& ws,
                          const std::vector<std::vector<int>>& neighbors, double lambda,
                          double r);

/// Per-round metrics shared by every method driver.
struct RoundMetrics {
  double tracking_error = 0.0;
  int new_collisions = 0;
  long cumulative_collisions = 0;
  double mean_estimate_norm = 0.0;
  std::size_t bytes = 0;
};

/// One full protocol round of a federated method (ZO structured estimator, or
/// the first-order benchmark when first_order is set): evasion velocities,
/// neighbor detection, agent estimates + EF + compression, server aggregate
/// and update, source moves, collision accounting. With error_feedback off
/// the EF memories are discarded every round.
RoundMetrics tracking_fed_round(WorldState& ws, FedState& fed, const TrackingConfig& cfg,
                                const StepSchedule& sched, const CompressorSpec& comp,
                                bool first_order, bool error_feedback,
                                std::span<RngStream> estimator_rngs,
                                std::span<RngStream> compressor_rngs,
                                RngStream& dropout_rng);

/// One round of the no-communication SGDm baseline: each agent runs momentum
/// ZO-SGD on its own source distance, normalized to speed eta.
RoundMetrics tracking_sgdm_round(WorldState& ws, std::vector<MomentumState>& agents,
                                 const TrackingConfig& cfg, double beta_m,
                                 std::span<RngStream> estimator_rngs);

}  // namespace fedzo
