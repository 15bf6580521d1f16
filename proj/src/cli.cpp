#include "mixflow/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "mixflow/config.hpp"
#include "mixflow/output.hpp"
#include "mixflow/parallel.hpp"

namespace mixflow {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  bool optimized_gains = false;
};

class Emitter {
public:
  explicit Emitter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw std::runtime_error("cannot create output directory '" + dir_.string() + "'");
    }
  }

  void write(const std::string& name, const std::string& content) {
    write_atomic(dir_ / name, content);
    files_.push_back(name);
  }

  void write_json(const std::string& name, const nlohmann::ordered_json& j) { write(name, j.dump(2) + "\n"); }

  void finish(const ExperimentConfig& cfg, const std::string& command) {
    write_atomic(dir_ / "manifest.json", manifest_json(cfg, command, files_, utc_timestamp()).dump(2) + "\n");
    for (const auto& f : files_) {
      std::cout << (dir_ / f).string() << "\n";
    }
  }

private:
  fs::path dir_;
  std::vector<std::string> files_;
};

OptimizationReport optimize(const ExperimentConfig& cfg, const std::vector<HdvParams>& population) {
  return grid_search(cfg.grid, population, cfg.ovf, envelope_for(cfg, population), cfg.band, cfg.weights,
                     worker_count());
}

CavGains select_gains(const ExperimentConfig& cfg, const std::vector<HdvParams>& population, bool optimized) {
  if (!optimized) {
    return cfg.cav;
  }
  CavGains g = optimize(cfg, population).best_gains;
  // The optimized gains keep the configured headway policy.
  g.lambda2 = cfg.cav.lambda2;
  g.lambda3 = cfg.cav.lambda3;
  if (!cav_string_stable(g)) {
    throw std::runtime_error("optimized gains are not string stable under the configured headway policy");
  }
  return g;
}

void run_command(const std::string& command, ExperimentConfig& cfg, const Options& opt) {
  Emitter out(cfg.output_dir);
  const auto population = sample_population(cfg);

  if (command == "analyze") {
    out.write_json("stability_report.json", stability_report_json(cfg, population));
  } else if (command == "optimize") {
    const auto report = optimize(cfg, population);
    out.write("heatmap_k1_k2.csv", heatmap_csv(report.slice("k1", "k2")));
    out.write("heatmap_k1_k3.csv", heatmap_csv(report.slice("k1", "k3")));
    out.write("heatmap_k2_k3.csv", heatmap_csv(report.slice("k2", "k3")));
    out.write("pareto.csv", pareto_csv(report));
    out.write_json("optimization_report.json", optimization_report_json(report));
  } else if (command == "sweep") {
    const CavGains g = select_gains(cfg, population, opt.optimized_gains);
    out.write("sweep.csv",
              sweep_csv(frequency_sweep(g, population, cfg.ovf, envelope_for(cfg, population), cfg.sweep.omegas())));
  } else if (command == "simulate") {
    cfg.cav = select_gains(cfg, population, opt.optimized_gains);
    const auto platoon = platoon_for(cfg, population);
    const auto traj = simulate(simulation_setup(cfg, platoon));
    out.write("trajectory.csv", trajectory_csv(traj));
    const auto safety = safety_metrics(traj, cfg.envelope.ttc_threshold, envelope_for(cfg, platoon.hdvs),
                                       cfg.ovf.vehicle_length);
    out.write_json("safety_report.json", safety_report_json(safety, traj));
    if (traj.window_truncated) {
      std::cerr << "warning: multi-predecessor window truncated at the leader\n";
    }
    if (traj.collision) {
      std::cerr << "warning: collision of vehicle " << traj.collision->vehicle << " at t = " << traj.collision->time
                << " s\n";
    }
  } else if (command == "sample") {
    out.write_json("population.json", population_json(population));
  }
  out.finish(cfg, command);
}

} // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Mixed-autonomy platoon string-stability analysis", "mixflow"};
  app.set_version_flag("--version", MIXFLOW_VERSION);
  app.require_subcommand(1);

  Options opt;
  const std::pair<const char*, const char*> commands[] = {
      {"analyze", "Per-driver stability verdicts and stabilizable platoon sizes"},
      {"optimize", "Grid search over CAV gains; heatmaps and Pareto set"},
      {"sweep", "Stabilizable platoon size per frequency"},
      {"simulate", "Time-domain simulation with surrogate safety measures"},
      {"sample", "Draw the heterogeneous driver population"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", opt.config, "Experiment configuration (JSON) or a bundled preset name")
        ->required();
    sub->add_option("-o,--out", opt.out, "Output directory (overrides output_dir)");
    if (std::string(name) == "sweep" || std::string(name) == "simulate") {
      sub->add_flag("--optimized-gains", opt.optimized_gains, "Use the grid-search optimum instead of the cav gains");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config);
    if (!opt.out.empty()) {
      cfg.output_dir = opt.out;
    }
    validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    run_command(command, cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return run(args);
}

} // namespace mixflow
