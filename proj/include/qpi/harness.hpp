#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpi/learning.hpp"
#include "qpi/solver.hpp"

namespace qpi {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Where the MDP comes from: a named generator with parameters, or a JSON file.
struct MdpSource {
  std::string generator = "garnet";  ///< garnet | healthcare | graph | file
  int n_states = 50;
  int n_actions = 5;
  int branching = 10;
  std::optional<std::uint64_t> seed;  ///< defaults to the experiment seed
  double cost_jitter = 0.0;           ///< graph only
  std::filesystem::path path;         ///< file only
};

struct ExperimentConfig {
  MdpSource mdp;
  std::vector<std::string> algorithms;
  std::vector<double> gammas{0.9, 0.99, 0.999};
  double epsilon = 1e-6;
  int max_iters = 100000;
  bool safeguard = true;
  std::optional<double> gamma_prime;  ///< backtracking target; (1 + gamma) / 2 when unset
  int iterations = 10000;             ///< model-free horizon K
  int runs = 20;
  std::uint64_t seed = 0;
  int threads = 0;
  std::filesystem::path output_dir = "results";
  bool timing = true;  ///< false writes zero timings so outputs are byte-stable
  bool plots = false;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

bool is_model_based(const std::string& algorithm);
bool is_model_free(const std::string& algorithm);
const std::vector<std::string>& model_based_algorithms();
const std::vector<std::string>& model_free_algorithms();

/// Builds the configured MDP with discount `gamma`.
Mdp build_mdp(const MdpSource& source, double gamma, std::uint64_t default_seed);

/// One (algorithm, gamma) cell. Model-free cells carry the mean error series in `trace`.
struct CellRecord {
  std::string algorithm;
  double gamma = 0.0;
  bool model_free = false;
  IterationTrace trace;
  bool converged = false;
  int iterations = 0;
  double final_error = 0.0;
  double runtime_seconds = 0.0;
  double sampling_seconds = 0.0;
  int regularized_steps = 0;  ///< ZQL steps that needed the 1e-10 I shift, summed over runs
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<CellRecord> cells;
};

/// Runs a model-based solver by registry name.
SolveResult run_model_based(const std::string& algorithm, const Mdp& mdp, const ValueFunction& v0,
                            const SolverConfig& cfg, std::optional<double> gamma_prime = std::nullopt);

/// Runs every (gamma, algorithm) cell and writes the outputs.
RunRecord run_experiment(const ExperimentConfig& cfg, bool write = true);

/// File stem of a cell, e.g. "qpi-uniform_g0.99".
std::string cell_stem(const std::string& algorithm, double gamma);

/// Writes one CSV per cell, summary.json and (when enabled) one SVG per gamma.
std::vector<std::filesystem::path> emit_outputs(const RunRecord& record, const std::filesystem::path& dir);

void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path);

/// Rows of a trace CSV read back; `step_size` and timings are not needed for plotting.
struct CsvSeries {
  std::string label;
  std::vector<double> bellman_error;
  std::vector<bool> safeguard;
};

CsvSeries read_trace_csv(const std::filesystem::path& path);

/// Log-scale Bellman-error plot with tick marks where the safeguard fired.
void write_convergence_svg(const std::vector<CsvSeries>& series, const std::string& title,
                           const std::filesystem::path& path);

}  // namespace qpi
