// fedzo: batch simulator for communication-compressed zeroth-order federated
// tracking and coverage experiments. Loads an optional JSON config, applies
// command-line overrides, runs the seeded experiment grid and writes CSVs.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedzo/errors.hpp"
#include "fedzo/experiment.hpp"

using namespace fedzo;

namespace {

SweepSpec parse_sweep(const std::string& text) {
  SweepSpec sweep;
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= text.size()) {
    throw ConfigError("--sweep expects name=v1,v2,... got '" + text + "'");
  }
  sweep.parameter = text.substr(0, eq);
  std::string rest = text.substr(eq + 1);
  for (std::size_t pos = 0; pos <= rest.size();) {
    const auto comma = rest.find(',', pos);
    const std::string item =
        rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      sweep.values.push_back(std::stod(item));
    } catch (...) {
      throw ConfigError("bad sweep value '" + item + "' in '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return sweep;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (std::size_t pos = 0; pos <= text.size();) {
    const auto comma = text.find(',', pos);
    const std::string item =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    out.push_back(std::stod(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fedzo: compressed error-feedback zeroth-order federated SGD simulator"};

  std::string config_path, scenario, compressor, sweep_text, sweep_etas_text, out_dir,
      normalize;
  std::vector<std::string> methods;
  int runs = -1, steps = -1, n_agents = -1, jobs = -1;
  double lambda = -1.0, eta = -1.0, mu = -1.0, beta = -1.0, violation_distance = -1.0;
  std::uint64_t seed = 0;
  bool seed_set = false, no_error_feedback = false, dump_trajectories = false;

  app.add_option("--config", config_path, "JSON experiment config; flags override it");
  app.add_option("--scenario", scenario, "tracking | coverage | synthetic");
  app.add_option("--compressor", compressor,
                 "single compressor (none|topk:F|randk:F|dropout-b:P|dropout-u:P|qsgd:B); "
                 "error feedback is on unless --no-error-feedback");
  app.add_flag("--no-error-feedback", no_error_feedback,
               "disable the EF memory for --compressor");
  app.add_option("--method", methods,
                 "method spec, repeatable: sgdm | [fo:]<compressor>[+ef]; overrides the "
                 "default method set");
  app.add_option("--runs", runs, "seeded runs per method");
  app.add_option("--steps", steps, "simulation steps per run");
  app.add_option("--lambda", lambda, "collision regularization weight");
  app.add_option("--n-agents", n_agents, "number of agents");
  app.add_option("--eta", eta, "learning rate (agent speed under normalization)");
  app.add_option("--mu", mu, "ZO smoothing parameter");
  app.add_option("--beta", beta, "source evasion speed (tracking)");
  app.add_option("--violation-distance", violation_distance,
                 "coverage violation threshold");
  auto* seed_opt = app.add_option("--seed", seed, "base seed; run r uses base_seed + r");
  app.add_option("--sweep", sweep_text, "parameter sweep, e.g. lambda=0,1,2,5,7,10");
  app.add_option("--sweep-etas", sweep_etas_text,
                 "learning rates paired with the sweep values (n sweeps)");
  app.add_option("--normalize", normalize, "aggregate normalization: block | full | off");
  app.add_option("--jobs", jobs, "parallel runs (0 = hardware threads, 1 = serial)");
  app.add_flag("--dump-trajectories", dump_trajectories,
               "also write per-run agent/source trajectory CSVs");
  app.add_option("--out", out_dir, "output directory for CSVs");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_experiment_config(config_path);

    if (!scenario.empty()) {
      if (scenario == "tracking") {
        cfg.scenario = Scenario::kTracking;
      } else if (scenario == "coverage") {
        cfg.scenario = Scenario::kCoverage;
      } else if (scenario == "synthetic") {
        cfg.scenario = Scenario::kSyntheticQuadratic;
      } else {
        throw ConfigError("unknown scenario '" + scenario +
                          "' (tracking|coverage|synthetic)");
      }
    }
    if (!methods.empty()) {
      cfg.methods.clear();
      for (const std::string& m : methods) cfg.methods.push_back(MethodSpec::parse(m));
    } else if (!compressor.empty()) {
      MethodSpec method;
      method.compressor = CompressorSpec::parse(compressor);
      method.error_feedback = !no_error_feedback;
      cfg.methods = {method};
    }
    if (runs >= 0) cfg.runs = runs;
    if (seed_set) cfg.base_seed = seed;
    if (jobs >= 0) cfg.jobs = jobs;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (dump_trajectories) cfg.dump_trajectories = true;
    if (!normalize.empty()) {
      if (normalize == "block") {
        cfg.normalize = AggregateNorm::kPerAgentBlock;
      } else if (normalize == "full") {
        cfg.normalize = AggregateNorm::kFullVector;
      } else if (normalize == "off") {
        cfg.normalize = AggregateNorm::kNone;
      } else {
        throw ConfigError("unknown normalize mode '" + normalize + "' (block|full|off)");
      }
    }
    if (steps > 0) {
      cfg.tracking.steps = steps;
      cfg.coverage.steps = steps;
      cfg.synthetic.steps = steps;
    }
    if (lambda >= 0.0) {
      cfg.tracking.lambda = lambda;
      cfg.coverage.lambda = lambda;
    }
    if (n_agents > 0) {
      cfg.tracking.n_agents = n_agents;
      cfg.coverage.n_agents = n_agents;
    }
    if (eta > 0.0) {
      cfg.tracking.eta = eta;
      cfg.coverage.eta = eta;
      cfg.synthetic.theorem_schedule = false;
      cfg.synthetic.eta = eta;
    }
    if (mu > 0.0) {
      cfg.tracking.mu = mu;
      cfg.coverage.mu = mu;
      cfg.synthetic.mu = mu;
    }
    if (beta >= 0.0) cfg.tracking.beta = beta;
    if (violation_distance > 0.0) cfg.coverage.violation_distance = violation_distance;
    if (!sweep_text.empty()) cfg.sweep = parse_sweep(sweep_text);
    if (!sweep_etas_text.empty()) cfg.sweep.etas = parse_doubles(sweep_etas_text);

    const ExperimentResults results = run_experiment(cfg);

    std::printf("%-16s %-14s %8s %8s %10s %10s\n", "sweep", "method", "runs", "diverged",
                "final_err", "collisions");
    for (const CellResult& cell : results.cells) {
      double err = 0.0, col = 0.0;
      for (const MetricsSeries& r : cell.runs) {
        if (r.diverged) continue;
        err += r.final_error;
        col += static_cast<double>(r.total_collisions);
      }
      const int n = cell.agg.runs_included;
      std::printf("%-16s %-14s %8d %8d %10.3f %10.2f\n",
                  cell.sweep_label.empty() ? "-" : cell.sweep_label.c_str(),
                  cell.method.label().c_str(), n, cell.agg.runs_diverged,
                  n > 0 ? err / n : 0.0, n > 0 ? col / n : 0.0);
    }
    if (!cfg.out_dir.empty()) {
      std::printf("results written to %s\n", cfg.out_dir.c_str());
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "{\"error\":\"config\",\"message\":\"%s\"}\n",
                 json_escape(e.what()).c_str());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "{\"error\":\"io\",\"message\":\"%s\"}\n",
                 json_escape(e.what()).c_str());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "{\"error\":\"internal\",\"message\":\"%s\"}\n",
                 json_escape(e.what()).c_str());
    return 1;
  }
}
