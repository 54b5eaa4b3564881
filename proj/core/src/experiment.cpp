#include "fedzo/experiment.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"

#include "fedzo/errors.hpp"

namespace fedzo {
namespace {

using nlohmann::json;

constexpr std::string_view kSweepParams = "lambda, n, delta, bits, threshold";

std::string compressor_label(const CompressorSpec& c) {
  const auto frac = [&c] {
    if (c.k > 0) return std::to_string(c.k);
    return c.k_fraction == 0.5 ? std::string() : format_double(c.k_fraction);
  };
  const auto keep = [&c] { return c.p == 0.5 ? std::string() : format_double(c.p); };
  switch (c.kind) {
    case CompressorKind::kIdentity:
      return "no-comp";
    case CompressorKind::kTopK:
      return "topk" + frac();
    case CompressorKind::kRandK:
      return "randk" + frac();
    case CompressorKind::kDropoutBiased:
      return "dropout-b" + keep();
    case CompressorKind::kDropoutUnbiased:
      return "dropout-u" + keep();
    case CompressorKind::kQsgd:
      return "qsgd" + std::to_string(c.bits) + "b";
  }
  return "no-comp";
}

}  // namespace

MethodSpec MethodSpec::parse(std::string_view text) {
  MethodSpec m;
  if (text == "sgdm") {
    m.algo = Algorithm::kSgdm;
    return m;
  }
  if (text.starts_with("fo:")) {
    m.algo = Algorithm::kFoFedAvg;
    text.remove_prefix(3);
  }
  if (text.ends_with("+ef")) {
    m.error_feedback = true;
    text.remove_suffix(3);
  }
  m.compressor = CompressorSpec::parse(text);
  return m;
}

std::string MethodSpec::to_string() const {
  if (algo == Algorithm::kSgdm) return "sgdm";
  std::string s = algo == Algorithm::kFoFedAvg ? "fo:" : "";
  s += compressor.to_string();
  if (error_feedback) s += "+ef";
  return s;
}

std::string MethodSpec::label() const {
  if (algo == Algorithm::kSgdm) return "sgdm";
  std::string s = algo == Algorithm::kFoFedAvg ? "fo-" : "";
  s += compressor_label(compressor);
  if (error_feedback && compressor.kind != CompressorKind::kIdentity) s += "-ef";
  return s;
}

int ExperimentConfig::resolved_runs() const {
  if (runs > 0) return runs;
  switch (scenario) {
    case Scenario::kTracking:
      return 100;
    case Scenario::kCoverage:
      return 5;
    case Scenario::kSyntheticQuadratic:
      return 50;
  }
  return 1;
}

std::vector<MethodSpec> ExperimentConfig::resolved_methods() const {
  if (!methods.empty()) return methods;
  std::vector<std::string> defaults;
  switch (scenario) {
    case Scenario::kTracking:
      defaults = {"sgdm",         "fo:qsgd:1+ef", "none",          "qsgd:1+ef",
                  "qsgd:1",       "topk:0.5+ef",  "topk:0.5",      "randk:0.5+ef",
                  "randk:0.5",    "dropout-b:0.5", "dropout-u:0.5"};
      break;
    case Scenario::kCoverage:
      defaults = {"sgdm",         "none",         "qsgd:3+ef",
                  "topk:0.5+ef",  "dropout-b:0.5+ef", "randk:0.5+ef"};
      break;
    case Scenario::kSyntheticQuadratic:
      defaults = {"none"};
      break;
  }
  std::vector<MethodSpec> out;
  out.reserve(defaults.size());
  for (const std::string& d : defaults) out.push_back(MethodSpec::parse(d));
  return out;
}

void ExperimentConfig::validate() const {
  switch (scenario) {
    case Scenario::kTracking:
      tracking.validate();
      break;
    case Scenario::kCoverage:
      coverage.validate();
      break;
    case Scenario::kSyntheticQuadratic:
      synthetic.validate();
      break;
  }
  if (runs < 0) throw ConfigError("runs must be >= 1");
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
  if (sgdm_momentum < 0.0 || sgdm_momentum >= 1.0) {
    throw ConfigError("sgdm momentum must be in [0,1)");
  }
  if (sweep.active()) {
    const std::string& p = sweep.parameter;
    const bool scalar_ok = p == "lambda" || p == "n" || p == "delta" || p == "bits";
    const bool coverage_ok = scenario == Scenario::kCoverage && p == "threshold";
    if (scenario == Scenario::kSyntheticQuadratic || (!scalar_ok && !coverage_ok)) {
      throw ConfigError("invalid sweep parameter '" + p + "'; valid: " +
                        std::string(kSweepParams));
    }
    if (sweep.values.empty()) throw ConfigError("sweep needs at least one value");
    if (!sweep.etas.empty() && sweep.etas.size() != sweep.values.size()) {
      throw ConfigError("sweep etas must pair one-to-one with values");
    }
    for (double v : sweep.values) {
      if (p == "n" && (v < 1.0 || v != std::floor(v))) {
        throw ConfigError("sweep n values must be positive integers");
      }
      if (p == "bits" && (v < 1.0 || v != std::floor(v))) {
        throw ConfigError("sweep bits values must be positive integers");
      }
      if (p == "delta" && (v < 0.0 || v >= 1.0)) {
        throw ConfigError("sweep delta (drop-probability) values must be in [0,1)");
      }
      if ((p == "lambda" || p == "threshold") && v < 0.0) {
        throw ConfigError("sweep " + p + " values must be non-negative");
      }
    }
  }
  for (const MethodSpec& m : methods) {
    if (scenario == Scenario::kSyntheticQuadratic && m.algo != Algorithm::kFedEfZoSgd) {
      throw ConfigError("synthetic scenario supports only EF-ZO-SGD methods");
    }
  }
}

// --- config file (JSON) -----------------------------------------------------

namespace {

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kTracking:
      return "tracking";
    case Scenario::kCoverage:
      return "coverage";
    case Scenario::kSyntheticQuadratic:
      return "synthetic";
  }
  return "tracking";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "tracking") return Scenario::kTracking;
  if (s == "coverage") return Scenario::kCoverage;
  if (s == "synthetic") return Scenario::kSyntheticQuadratic;
  throw ConfigError("unknown scenario '" + s + "' (tracking|coverage|synthetic)");
}

std::string normalize_name(AggregateNorm n) {
  switch (n) {
    case AggregateNorm::kNone:
      return "off";
    case AggregateNorm::kFullVector:
      return "full";
    case AggregateNorm::kPerAgentBlock:
      return "block";
  }
  return "block";
}

AggregateNorm parse_normalize(const std::string& s) {
  if (s == "off") return AggregateNorm::kNone;
  if (s == "full") return AggregateNorm::kFullVector;
  if (s == "block") return AggregateNorm::kPerAgentBlock;
  throw ConfigError("unknown normalize mode '" + s + "' (off|full|block)");
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void from_json_tracking(const json& j, TrackingConfig& c) {
  get_if_present(j, "n_agents", c.n_agents);
  get_if_present(j, "dim", c.dim);
  get_if_present(j, "sense_radius", c.sense_radius);
  get_if_present(j, "collision_radius", c.collision_radius);
  get_if_present(j, "lambda", c.lambda);
  get_if_present(j, "beta", c.beta);
  get_if_present(j, "neighbor_dropout_p", c.neighbor_dropout_p);
  get_if_present(j, "agent_box", c.agent_box);
  get_if_present(j, "source_box", c.source_box);
  get_if_present(j, "steps", c.steps);
  get_if_present(j, "eta", c.eta);
  get_if_present(j, "mu", c.mu);
  get_if_present(j, "seed", c.seed);
}

json to_json_tracking(const TrackingConfig& c) {
  return json{{"n_agents", c.n_agents},
              {"dim", c.dim},
              {"sense_radius", c.sense_radius},
              {"collision_radius", c.collision_radius},
              {"lambda", c.lambda},
              {"beta", c.beta},
              {"neighbor_dropout_p", c.neighbor_dropout_p},
              {"agent_box", c.agent_box},
              {"source_box", c.source_box},
              {"steps", c.steps},
              {"eta", c.eta},
              {"mu", c.mu},
              {"seed", c.seed}};
}

void from_json_coverage(const json& j, CoverageConfig& c) {
  get_if_present(j, "n_agents", c.n_agents);
  get_if_present(j, "disk_radius", c.disk_radius);
  get_if_present(j, "overlap_fraction", c.overlap_fraction);
  get_if_present(j, "center_spacing", c.center_spacing);
  get_if_present(j, "route_radius_factor", c.route_radius_factor);
  get_if_present(j, "cycles", c.cycles);
  get_if_present(j, "steps", c.steps);
  get_if_present(j, "lambda", c.lambda);
  get_if_present(j, "eta", c.eta);
  get_if_present(j, "mu", c.mu);
  get_if_present(j, "neighbor_dropout_p", c.neighbor_dropout_p);
  get_if_present(j, "violation_distance", c.violation_distance);
  get_if_present(j, "seed", c.seed);
}

json to_json_coverage(const CoverageConfig& c) {
  return json{{"n_agents", c.n_agents},
              {"disk_radius", c.disk_radius},
              {"overlap_fraction", c.overlap_fraction},
              {"center_spacing", c.center_spacing},
              {"route_radius_factor", c.route_radius_factor},
              {"cycles", c.cycles},
              {"steps", c.steps},
              {"lambda", c.lambda},
              {"eta", c.eta},
              {"mu", c.mu},
              {"neighbor_dropout_p", c.neighbor_dropout_p},
              {"violation_distance", c.violation_distance},
              {"seed", c.seed}};
}

void from_json_synthetic(const json& j, SyntheticConfig& c) {
  get_if_present(j, "dim", c.dim);
  get_if_present(j, "noise_sigma", c.noise_sigma);
  get_if_present(j, "drift_amplitude", c.drift_amplitude);
  get_if_present(j, "drift_period", c.drift_period);
  get_if_present(j, "x0_value", c.x0_value);
  get_if_present(j, "steps", c.steps);
  get_if_present(j, "theorem_schedule", c.theorem_schedule);
  get_if_present(j, "eta", c.eta);
  get_if_present(j, "mu", c.mu);
}

json to_json_synthetic(const SyntheticConfig& c) {
  return json{{"dim", c.dim},
              {"noise_sigma", c.noise_sigma},
              {"drift_amplitude", c.drift_amplitude},
              {"drift_period", c.drift_period},
              {"x0_value", c.x0_value},
              {"steps", c.steps},
              {"theorem_schedule", c.theorem_schedule},
              {"eta", c.eta},
              {"mu", c.mu}};
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad config '" + path.string() + "': " + e.what());
  }
  ExperimentConfig cfg;
  if (j.contains("scenario")) cfg.scenario = parse_scenario(j.at("scenario"));
  get_if_present(j, "runs", cfg.runs);
  get_if_present(j, "base_seed", cfg.base_seed);
  if (j.contains("normalize")) cfg.normalize = parse_normalize(j.at("normalize"));
  get_if_present(j, "sgdm_momentum", cfg.sgdm_momentum);
  get_if_present(j, "out_dir", cfg.out_dir);
  get_if_present(j, "jobs", cfg.jobs);
  get_if_present(j, "dump_trajectories", cfg.dump_trajectories);
  if (j.contains("methods")) {
    for (const auto& m : j.at("methods")) {
      cfg.methods.push_back(MethodSpec::parse(m.get<std::string>()));
    }
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    get_if_present(s, "parameter", cfg.sweep.parameter);
    get_if_present(s, "values", cfg.sweep.values);
    get_if_present(s, "etas", cfg.sweep.etas);
  }
  if (j.contains("tracking")) from_json_tracking(j.at("tracking"), cfg.tracking);
  if (j.contains("coverage")) from_json_coverage(j.at("coverage"), cfg.coverage);
  if (j.contains("synthetic")) from_json_synthetic(j.at("synthetic"), cfg.synthetic);
  cfg.validate();
  return cfg;
}

void save_experiment_config(const ExperimentConfig& cfg,
                            const std::filesystem::path& path) {
  json j;
  j["scenario"] = scenario_name(cfg.scenario);
  j["runs"] = cfg.resolved_runs();
  j["base_seed"] = cfg.base_seed;
  j["normalize"] = normalize_name(cfg.normalize);
  j["sgdm_momentum"] = cfg.sgdm_momentum;
  j["out_dir"] = cfg.out_dir;
  j["jobs"] = cfg.jobs;
  j["dump_trajectories"] = cfg.dump_trajectories;
  std::vector<std::string> methods;
  for (const MethodSpec& m : cfg.resolved_methods()) methods.push_back(m.to_string());
  j["methods"] = methods;
  if (cfg.sweep.active()) {
    j["sweep"] = json{{"parameter", cfg.sweep.parameter},
                      {"values", cfg.sweep.values},
                      {"etas", cfg.sweep.etas}};
  }
  j["tracking"] = to_json_tracking(cfg.tracking);
  j["coverage"] = to_json_coverage(cfg.coverage);
  j["synthetic"] = to_json_synthetic(cfg.synthetic);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write config '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

// --- single runs ------------------------------------------------------------

RunStreams RunStreams::make(std::uint64_t run_seed, int n_agents) {
  const RngStream root(run_seed);
  RunStreams s;
  s.world = root.substream("world-init");
  s.dropout = root.substream("neighbor-dropout");
  s.estimators.reserve(n_agents);
  s.compressors.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    s.estimators.push_back(root.substream("estimator", i));
    s.compressors.push_back(root.substream("compressor", i));
  }
  return s;
}

namespace {

void record_trajectory(Trajectory* traj, const WorldState& ws) {
  if (traj == nullptr) return;
  traj->dim = ws.dim;
  traj->agent_positions.push_back(ws.agent_positions);
  traj->source_positions.push_back(ws.source_positions);
}

}  // namespace

MetricsSeries run_tracking_single(const TrackingConfig& cfg, const MethodSpec& method,
                                  AggregateNorm normalize, double sgdm_momentum,
                                  std::uint64_t run_seed, Trajectory* trajectory) {
  cfg.validate();
  RunStreams streams = RunStreams::make(run_seed, cfg.n_agents);
  WorldState ws = init_world(cfg, streams.world);
  record_trajectory(trajectory, ws);

  MetricsSeries series;
  try {
    if (method.algo == Algorithm::kSgdm) {
      std::vector<MomentumState> agents;
      agents.reserve(cfg.n_agents);
      for (int i = 0; i < cfg.n_agents; ++i) {
        const auto block = vec::block(ws.agent_positions, i, cfg.dim);
        agents.push_back(MomentumState::init(NumVec(block.begin(), block.end())));
      }
      for (int t = 0; t < cfg.steps; ++t) {
        series.push(tracking_sgdm_round(ws, agents, cfg, sgdm_momentum,
                                        streams.estimators));
        record_trajectory(trajectory, ws);
      }
    } else {
      FedState fed = FedState::init(ws.agent_positions, cfg.n_agents);
      const StepSchedule sched{cfg.eta, cfg.mu, normalize};
      for (int t = 0; t < cfg.steps; ++t) {
        series.push(tracking_fed_round(ws, fed, cfg, sched, method.compressor,
                                       method.algo == Algorithm::kFoFedAvg,
                                       method.error_feedback, streams.estimators,
                                       streams.compressors, streams.dropout));
        record_trajectory(trajectory, ws);
      }
    }
  } catch (const NumericalError& e) {
    series.diverged = true;
    series.diverged_step = e.step >= 0 ? e.step : ws.step;
  }
  return series;
}

MetricsSeries run_coverage_single(const CoverageConfig& cfg, const MethodSpec& method,
                                  AggregateNorm normalize, double sgdm_momentum,
                                  std::uint64_t run_seed, Trajectory* trajectory) {
  cfg.validate();
  RunStreams streams = RunStreams::make(run_seed, cfg.n_agents);
  WorldState ws = init_coverage_world(cfg);
  record_trajectory(trajectory, ws);

  MetricsSeries series;
  try {
    if (method.algo == Algorithm::kSgdm) {
      std::vector<MomentumState> agents;
      agents.reserve(cfg.n_agents);
      for (int i = 0; i < cfg.n_agents; ++i) {
        const auto block = vec::block(ws.agent_positions, i, 2);
        agents.push_back(MomentumState::init(NumVec(block.begin(), block.end())));
      }
      for (int t = 0; t < cfg.steps; ++t) {
        series.push(coverage_sgdm_round(ws, agents, cfg, sgdm_momentum,
                                        streams.estimators));
        record_trajectory(trajectory, ws);
      }
    } else {
      FedState fed = FedState::init(ws.agent_positions, cfg.n_agents);
      const StepSchedule sched{cfg.eta, cfg.mu, normalize};
      for (int t = 0; t < cfg.steps; ++t) {
        series.push(coverage_round(ws, fed, cfg, sched, method.compressor,
                                   method.algo == Algorithm::kFoFedAvg,
                                   method.error_feedback, streams.estimators,
                                   streams.compressors, streams.dropout));
        record_trajectory(trajectory, ws);
      }
    }
  } catch (const NumericalError& e) {
    series.diverged = true;
    series.diverged_step = e.step >= 0 ? e.step : ws.step;
  }
  return series;
}

MetricsSeries run_synthetic_single(const SyntheticConfig& cfg, const MethodSpec& method,
                                   std::uint64_t run_seed) {
  cfg.validate();
  if (method.algo != Algorithm::kFedEfZoSgd) {
    throw ConfigError("synthetic scenario supports only EF-ZO-SGD methods");
  }
  const RngStream root(run_seed);
  // The loss noise is the world randomness of this scenario.
  const LossEval loss = make_synthetic_loss(cfg, root.substream("world-init"));
  RngStream estimator_rng = root.substream("estimator", 0);
  RngStream compressor_rng = root.substream("compressor", 0);
  const StepSchedule sched = synthetic_schedule(cfg);

  MetricsSeries series;
  EfState st = EfState::init(cfg.x0());
  try {
    for (int t = 0; t < cfg.steps; ++t) {
      RoundMetrics m;
      m.tracking_error = vec::norm(st.x);  // ||grad l_t(x_t)|| for this stream
      EfStepResult r =
          ef_zo_sgd_step(st, loss, sched, method.compressor, estimator_rng, &compressor_rng);
      if (!method.error_feedback) r.state.e.assign(r.state.e.size(), 0.0);
      m.mean_estimate_norm = vec::norm(r.estimate);
      m.bytes = r.bytes;
      st = std::move(r.state);
      series.push(m);
    }
  } catch (const NumericalError& e) {
    series.diverged = true;
    series.diverged_step = e.step;
  }
  return series;
}

// --- full experiment --------------------------------------------------------

namespace {

struct Cell {
  std::string label;
  TrackingConfig tracking;
  CoverageConfig coverage;
  SyntheticConfig synthetic;
  std::vector<MethodSpec> methods;
};

std::vector<Cell> build_cells(const ExperimentConfig& cfg) {
  Cell base;
  base.tracking = cfg.tracking;
  base.coverage = cfg.coverage;
  base.synthetic = cfg.synthetic;
  base.methods = cfg.resolved_methods();
  if (!cfg.sweep.active()) return {base};

  std::vector<Cell> cells;
  const std::string& p = cfg.sweep.parameter;
  for (std::size_t k = 0; k < cfg.sweep.values.size(); ++k) {
    const double v = cfg.sweep.values[k];
    Cell cell = base;
    cell.label = p + "=" + format_double(v);
    if (p == "lambda") {
      cell.tracking.lambda = v;
      cell.coverage.lambda = v;
    } else if (p == "n") {
      const int n = static_cast<int>(v);
      cell.tracking.n_agents = n;
      cell.coverage.n_agents = n;
      const double eta = cfg.sweep.etas.empty()
                             ? eta_for_agents(cfg.tracking.eta, cfg.tracking.n_agents, v)
                             : cfg.sweep.etas[k];
      cell.tracking.eta = eta;
      cell.coverage.eta = eta;
    } else if (p == "delta") {
      // Drop-probability sweep: delta here is P(component dropped), the
      // opposite orientation of the contraction constant; keep_p = 1 - delta.
      MethodSpec m;
      m.compressor = CompressorSpec::dropout_biased(1.0 - v);
      m.error_feedback = true;
      cell.methods = {m};
    } else if (p == "bits") {
      MethodSpec m;
      m.compressor = CompressorSpec::qsgd(static_cast<int>(v));
      m.error_feedback = true;
      cell.methods = {m};
    } else if (p == "threshold") {
      cell.coverage.violation_distance = v;
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

void parallel_for(int jobs, int count, const std::function<void(int)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  const int n_threads = std::min(jobs, count);
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next.store(count);
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string run_file_name(const char* prefix, int run) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d.csv", prefix, run);
  return buf;
}

void write_summary(const ExperimentConfig& cfg, const std::vector<CellResult>& cells,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "sweep,method,runs,diverged,final_error_mean,final_error_ci95,"
         "collisions_mean,collisions_ci95,bytes_mean,converged\n";
  for (const CellResult& cell : cells) {
    double err_mean = 0.0, err_ci = 0.0, col_mean = 0.0, col_ci = 0.0, bytes_mean = 0.0;
    const int n = cell.agg.runs_included;
    if (n > 0) {
      for (const MetricsSeries& r : cell.runs) {
        if (r.diverged) continue;
        err_mean += r.final_error;
        col_mean += static_cast<double>(r.total_collisions);
        bytes_mean += r.bytes.empty() ? 0.0 : static_cast<double>(r.bytes.back());
      }
      err_mean /= n;
      col_mean /= n;
      bytes_mean /= n;
      if (n > 1) {
        for (const MetricsSeries& r : cell.runs) {
          if (r.diverged) continue;
          err_ci += (r.final_error - err_mean) * (r.final_error - err_mean);
          const double cd = static_cast<double>(r.total_collisions) - col_mean;
          col_ci += cd * cd;
        }
        err_ci = 1.96 * std::sqrt(err_ci / (n - 1.0) / n);
        col_ci = 1.96 * std::sqrt(col_ci / (n - 1.0) / n);
      }
    }
    const bool converged =
        cfg.scenario != Scenario::kCoverage && n > 0 && converged_within(cell.agg.error_mean);
    out << cell.sweep_label << ',' << cell.method.label() << ',' << n << ','
        << cell.agg.runs_diverged << ',' << format_double(err_mean) << ','
        << format_double(err_ci) << ',' << format_double(col_mean) << ','
        << format_double(col_ci) << ',' << format_double(bytes_mean) << ','
        << (converged ? 1 : 0) << '\n';
  }
}

}  // namespace

double eta_for_agents(double base_eta, int base_n, double n) {
  return std::round(base_eta * std::sqrt(n / base_n) * 100.0) / 100.0;
}

const CellResult* ExperimentResults::find(std::string_view method_label,
                                          std::string_view sweep_label) const {
  for (const CellResult& c : cells) {
    if (c.method.label() == method_label && c.sweep_label == sweep_label) return &c;
  }
  return nullptr;
}

void emit_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const int n = traj.agent_positions.empty()
                    ? 0
                    : static_cast<int>(traj.agent_positions.front().size()) / traj.dim;
  out << "step";
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < traj.dim; ++c) out << ",a" << i << '_' << c;
  }
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < traj.dim; ++c) out << ",z" << i << '_' << c;
  }
  out << '\n';
  for (std::size_t s = 0; s < traj.agent_positions.size(); ++s) {
    out << s;
    for (double v : traj.agent_positions[s]) out << ',' << format_double(v);
    for (double v : traj.source_positions[s]) out << ',' << format_double(v);
    out << '\n';
  }
}

ExperimentResults run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Cell> cells = build_cells(cfg);
  const int runs = cfg.resolved_runs();

  ExperimentResults results;
  for (const Cell& cell : cells) {
    for (const MethodSpec& method : cell.methods) {
      CellResult cr;
      cr.sweep_label = cell.label;
      cr.method = method;
      cr.runs.resize(runs);
      results.cells.push_back(std::move(cr));
    }
  }

  struct Task {
    const Cell* cell;
    int cell_result;
    int run;
  };
  std::vector<Task> tasks;
  {
    int cr = 0;
    for (const Cell& cell : cells) {
      for (std::size_t m = 0; m < cell.methods.size(); ++m, ++cr) {
        for (int r = 0; r < runs; ++r) tasks.push_back({&cell, cr, r});
      }
    }
  }

  std::vector<std::vector<Trajectory>> trajectories;
  if (cfg.dump_trajectories && cfg.scenario != Scenario::kSyntheticQuadratic) {
    trajectories.assign(results.cells.size(), std::vector<Trajectory>(runs));
  }

  const int jobs = cfg.jobs > 0 ? cfg.jobs
                                : static_cast<int>(std::thread::hardware_concurrency());
  parallel_for(jobs, static_cast<int>(tasks.size()), [&](int ti) {
    const Task& task = tasks[ti];
    const std::uint64_t run_seed = cfg.base_seed + static_cast<std::uint64_t>(task.run);
    const MethodSpec& method = results.cells[task.cell_result].method;
    Trajectory* traj =
        trajectories.empty() ? nullptr : &trajectories[task.cell_result][task.run];
    MetricsSeries series;
    switch (cfg.scenario) {
      case Scenario::kTracking:
        series = run_tracking_single(task.cell->tracking, method, cfg.normalize,
                                     cfg.sgdm_momentum, run_seed, traj);
        break;
      case Scenario::kCoverage:
        series = run_coverage_single(task.cell->coverage, method, cfg.normalize,
                                     cfg.sgdm_momentum, run_seed, traj);
        break;
      case Scenario::kSyntheticQuadratic:
        series = run_synthetic_single(task.cell->synthetic, method, run_seed);
        break;
    }
    results.cells[task.cell_result].runs[task.run] = std::move(series);
  });

  for (CellResult& cell : results.cells) cell.agg = aggregate(cell.runs);

  if (!cfg.out_dir.empty()) {
    const std::filesystem::path root(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw IoError("cannot create output dir '" + root.string() + "'");
    save_experiment_config(cfg, root / "config.json");
    for (std::size_t c = 0; c < results.cells.size(); ++c) {
      const CellResult& cell = results.cells[c];
      std::filesystem::path dir = root;
      if (!cell.sweep_label.empty()) dir /= cell.sweep_label;
      dir /= cell.method.label();
      std::filesystem::create_directories(dir, ec);
      if (ec) throw IoError("cannot create output dir '" + dir.string() + "'");
      for (int r = 0; r < runs; ++r) {
        emit_csv(cell.runs[r], dir / run_file_name("run", r));
        if (!trajectories.empty()) {
          emit_trajectory_csv(trajectories[c][r], dir / run_file_name("traj", r));
        }
      }
      if (cell.agg.runs_included > 0) emit_csv(cell.agg, dir / "mean.csv");
    }
    write_summary(cfg, results.cells, root / "summary.csv");
  }
  return results;
}

}  // namespace fedzo
