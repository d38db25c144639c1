// qpi: run experiment grids, export generated MDPs, plot trace CSVs.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "qpi/generators.hpp"
#include "qpi/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular MDP solvers: quasi-policy iteration and learning benchmarks"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment grid from a JSON config");
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs, iters, threads;
  bool plots = false, no_timing = false;
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("-o,--output-dir", out_dir, "Output directory (overrides QPI_OUTPUT_DIR and the config)");
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--runs", runs, "Override the number of model-free runs");
  run->add_option("-K,--iterations", iters, "Override the model-free horizon");
  run->add_option("--threads", threads, "Worker threads for model-free runs (0 = hardware)");
  run->add_flag("--plots", plots, "Also write one SVG per gamma");
  run->add_flag("--no-timing", no_timing, "Write zero timings for byte-stable outputs");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate an MDP and export it as JSON");
  std::string generator, gen_out;
  int n = 50, m = 5, nb = 10;
  std::uint64_t gen_seed = 0;
  double gamma = 0.9, jitter = 0.0;
  gen->add_option("generator", generator, "garnet | healthcare | graph")
      ->required()
      ->check(CLI::IsMember({"garnet", "healthcare", "graph"}));
  gen->add_option("-n,--states", n, "Garnet states");
  gen->add_option("-m,--actions", m, "Garnet actions");
  gen->add_option("-b,--branching", nb, "Garnet branching factor");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--gamma", gamma, "Discount factor");
  gen->add_option("--cost-jitter", jitter, "Graph cost jitter");
  gen->add_option("-o,--output", gen_out, "Output JSON file")->required();

  // plot
  auto* plot = app.add_subcommand("plot", "Plot trace CSVs as a log-scale SVG");
  std::vector<std::string> csvs;
  std::string svg_out, title = "Bellman error";
  plot->add_option("csv", csvs, "Trace CSV files")->required();
  plot->add_option("-o,--output", svg_out, "Output SVG")->required();
  plot->add_option("--title", title, "Plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      qpi::ExperimentConfig cfg = qpi::load_config(config_path);
      if (const char* env = std::getenv("QPI_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
      if (out_dir) cfg.output_dir = *out_dir;
      if (seed) cfg.seed = *seed;
      if (runs) cfg.runs = *runs;
      if (iters) cfg.iterations = *iters;
      if (threads) cfg.threads = *threads;
      if (plots) cfg.plots = true;
      if (no_timing) cfg.timing = false;
      cfg.validate();
      const auto record = qpi::run_experiment(cfg);
      for (const auto& c : record.cells) {
        std::cout << qpi::cell_stem(c.algorithm, c.gamma) << ": iterations=" << c.iterations
                  << " final_error=" << c.final_error << (c.converged ? " converged" : "") << '\n';
      }
      std::cout << "wrote " << cfg.output_dir.string() << '\n';
    } else if (*gen) {
      qpi::Mdp mdp = generator == "garnet"       ? qpi::garnet(n, m, nb, gen_seed, gamma)
                     : generator == "healthcare" ? qpi::healthcare(gamma)
                                                 : qpi::graph(gen_seed, gamma, jitter);
      qpi::save_mdp(mdp, gen_out);
    } else if (*plot) {
      std::vector<qpi::CsvSeries> series;
      for (const auto& p : csvs) series.push_back(qpi::read_trace_csv(p));
      qpi::write_convergence_svg(series, title, svg_out);
    }
  } catch (const qpi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
