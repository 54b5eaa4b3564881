#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fedzo/compressors.hpp"
#include "fedzo/optimizers.hpp"
#include "fedzo/tracking_sim.hpp"

namespace fedzo {

/// Parameters of the patrol / area-coverage scenario: agents chase targets
/// moving on circular routes inside overlapping disks, with the repulsion
/// term discouraging entry into territory covered by another agent.
struct CoverageConfig {
  int n_agents = 3;
  double disk_radius = 5.0;
  double overlap_fraction = 0.175;     // lens area of adjacent disks / disk area
  double center_spacing = 0.0;         // explicit spacing; 0 = derive from overlap
  double route_radius_factor = 0.7;    // route radius = factor * disk_radius
  double cycles = 4.0;                 // route cycles over the whole run
  int steps = 7000;
  double lambda = 100.0;
  double eta = 1.0;
  double mu = 0.5;
  double neighbor_dropout_p = 0.5;
  double violation_distance = 3.0;     // pair distance counted as a violation
  std::uint64_t seed = 0;

  void validate() const;

  /// Sensing radius: twice the disk radius, so an agent notices coverage
  /// pressure anywhere inside a neighboring disk.
  double sense_radius() const { return 2.0 * disk_radius; }

  /// Radians per step giving `cycles` full route cycles over `steps`.
  double angular_speed() const;

  /// Disk centers on a line, spaced so adjacent disks overlap by
  /// overlap_fraction of a disk's area (solved numerically).
  std::vector<std::array<double, 2>> disk_centers() const;
};

/// Center distance s of two radius-R disks whose lens overlap equals
/// `fraction` of one disk's area.
double disk_spacing_for_overlap(double radius, double fraction);

/// Position of agent i's route target at step t: on a circle of radius
/// route_radius_factor * disk_radius around disk center i, phases staggered
/// uniformly across agents.
NumVec route_target(int agent, int t, const CoverageConfig& cfg);

/// World with agents at their disk centers and targets on their routes.
WorldState init_coverage_world(const CoverageConfig& cfg);

/// Unordered pairs closer than the violation distance at the current step.
int count_violations(const WorldState& ws, const CoverageConfig& cfg);

/// One federated round against the moving route targets; same protocol as
/// the tracking round with sources replaced by route targets.
RoundMetrics coverage_round(WorldState& ws, FedState& fed, const CoverageConfig& cfg,
                            const StepSchedule& sched, const CompressorSpec& comp,
                            bool first_order, bool error_feedback,
                            std::span<RngStream> estimator_rngs,
                            std::span<RngStream> compressor_rngs, RngStream& dropout_rng);

/// SGDm baseline round in the coverage world.
RoundMetrics coverage_sgdm_round(WorldState& ws, std::vector<MomentumState>& agents,
                                 const CoverageConfig& cfg, double beta_m,
                                 std::span<RngStream> estimator_rngs);

}  // namespace fedzo
