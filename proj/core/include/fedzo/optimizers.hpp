#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fedzo/compressors.hpp"
#include "fedzo/rng.hpp"
#include "fedzo/vec.hpp"
#include "fedzo/zo_estimator.hpp"

namespace fedzo {

/// Iterates whose norm exceeds this bound abort the run with DivergenceError;
/// the harness records such runs as failed seeds.
inline constexpr double kDivergenceNorm = 1.0e6;

/// How the server treats the aggregated estimator G_t before the update.
/// kFullVector scales the whole stacked vector to unit norm; kPerAgentBlock
/// scales each agent's d-block to unit norm, making eta the per-agent speed.
enum class AggregateNorm { kNone, kFullVector, kPerAgentBlock };

struct StepSchedule {
  double eta = 1.0;
  double mu = 0.5;
  AggregateNorm normalize = AggregateNorm::kNone;

  void validate() const;

  /// eta = 1 / (sigma * sqrt((d+4) M T L)), mu = 1 / ((d+4) sqrt(T)).
  static StepSchedule theorem1(double sigma, double M, double L, std::size_t d, double T);

  /// eta = 1 / (sigma * sqrt((d+4) M Q T L)), mu = 1 / ((d+4) sqrt(T)).
  static StepSchedule theorem2(double sigma, double M, double Q, double L, std::size_t d,
                               double T);
};

/// Single-agent error-feedback state: iterate, EF memory, step counter.
struct EfState {
  NumVec x;
  NumVec e;
  int t = 0;

  static EfState init(NumVec x0);
};

struct EfStepResult {
  EfState state;
  NumVec estimate;     // the ZO estimate g used this step
  NumVec transmitted;  // C(p)
  std::size_t bytes = 0;
};

/// The EF core shared by both algorithms: p = g + e, transmit C(p),
/// x' = x - eta*C(p), e' = p - C(p).
EfStepResult ef_apply(const EfState& st, std::span<const double> g, double eta,
                      const CompressorSpec& comp, RngStream& comp_rng);

/// One EF-ZO-SGD step: draws u ~ N(0, I_d), forms the two-point estimate of
/// the loss at step st.t, then applies the EF update. When comp_rng is null
/// the compressor draws from the same stream as the estimator.
EfStepResult ef_zo_sgd_step(const EfState& st, const LossEval& loss,
                            const StepSchedule& sched, const CompressorSpec& comp,
                            RngStream& rng, RngStream* comp_rng = nullptr);

/// Federated state: server-held concatenated positions plus one EF memory
/// per agent (each of length N*d, zero-initialized).
struct FedState {
  NumVec positions;
  std::vector<NumVec> errors;
  int step = 0;

  static FedState init(NumVec positions, int n_agents);
};

struct FedRoundResult {
  FedState state;
  NumVec aggregate;     // G_t = (1/N) sum_i C(p_i), before normalization
  NumVec displacement;  // what was subtracted from the positions
  std::vector<double> estimate_norms;
  std::size_t bytes = 0;
};

/// One FED-EF-ZO-SGD round: each agent forms the structured estimate from
/// the world view, applies EF and transmits; the server averages in agent
/// order, normalizes per the schedule, updates and broadcasts. The world
/// view must reference st.positions.
FedRoundResult fed_ef_zo_sgd_round(const FedState& st, const WorldView& world,
                                   const StepSchedule& sched, const CompressorSpec& comp,
                                   std::span<RngStream> estimator_rngs,
                                   std::span<RngStream> compressor_rngs);

/// First-order benchmark round: identical protocol, but each agent transmits
/// the exact analytic gradient of its local loss (source pull plus
/// lambda-weighted neighbor repulsion) through the same EF + compression path.
FedRoundResult fo_fedavg_ef_round(const FedState& st, const WorldView& world,
                                  const StepSchedule& sched, const CompressorSpec& comp,
                                  std::span<RngStream> compressor_rngs);

/// Exact gradient of agent i's local loss, used by fo_fedavg_ef_round and as
/// a finite-difference oracle target in tests.
NumVec local_loss_gradient(int agent, const WorldView& world);

/// Generic round over a caller-supplied per-agent estimator. The two rounds
/// above are thin wrappers; exposed for scenario code that swaps estimators.
using AgentEstimator = std::function<NumVec(int agent, RngStream& rng)>;
FedRoundResult fed_round(const FedState& st, int dim, const AgentEstimator& estimator,
                         const StepSchedule& sched, const CompressorSpec& comp,
                         std::span<RngStream> estimator_rngs,
                         std::span<RngStream> compressor_rngs);

/// Local SGD-with-momentum baseline: no communication, pure own-source loss,
/// normalized update so eta is the agent speed.
struct MomentumState {
  NumVec x;
  NumVec m;

  static MomentumState init(NumVec x0);
};

MomentumState sgdm_baseline_step(const MomentumState& st, const LossEval& source_loss,
                                 double eta, double beta_m, double mu, RngStream& rng,
                                 int t);

/// Constants of the convergence statements, all required positive
/// (delta in (0,1]); Q and Z participate only in the multi-agent bound.
struct TheoremParams {
  double Delta = 0.0;
  double sigma = 0.0;
  double M = 0.0;
  double L = 0.0;
  double d = 0.0;
  double T = 0.0;
  double delta = 1.0;
  double omega_bar = 0.0;
  double Q = 0.0;
  double Z = 0.0;
};

/// Full right-hand side of the single-agent convergence bound (8 terms).
double theorem1_bound(const TheoremParams& p);

/// Full right-hand side of the multi-agent convergence bound (9 terms).
double theorem2_bound(const TheoremParams& p);

}  // namespace fedzo
