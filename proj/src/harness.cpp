#include "qpi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qpi/classic.hpp"
#include "qpi/generators.hpp"
#include "qpi/quasi_policy.hpp"

namespace qpi {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& model_based_algorithms() {
  static const std::vector<std::string> names{"vi",          "pi",            "nvi",           "avi", "qpi-uniform",
                                              "qpi-mu",      "qpi-recursive", "qpi-backtrack", "qpi-b"};
  return names;
}

const std::vector<std::string>& model_free_algorithms() {
  static const std::vector<std::string> names{"ql", "sql", "zql", "qpl", "qpl-async", "qpl-mu"};
  return names;
}

bool is_model_based(const std::string& algorithm) {
  const auto& v = model_based_algorithms();
  return std::find(v.begin(), v.end(), algorithm) != v.end();
}

bool is_model_free(const std::string& algorithm) {
  const auto& v = model_free_algorithms();
  return std::find(v.begin(), v.end(), algorithm) != v.end();
}

namespace {

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "' in " + where);
  }
}

MdpSource source_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config key 'mdp' must be an object");
  reject_unknown(j, {"generator", "n_states", "n_actions", "branching", "seed", "cost_jitter", "path"}, "'mdp'");
  MdpSource s;
  if (j.contains("generator")) s.generator = get_as<std::string>(j, "generator");
  if (j.contains("n_states")) s.n_states = get_as<int>(j, "n_states");
  if (j.contains("n_actions")) s.n_actions = get_as<int>(j, "n_actions");
  if (j.contains("branching")) s.branching = get_as<int>(j, "branching");
  if (j.contains("seed")) s.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("cost_jitter")) s.cost_jitter = get_as<double>(j, "cost_jitter");
  if (j.contains("path")) s.path = get_as<std::string>(j, "path");
  return s;
}

json source_to_json(const MdpSource& s) {
  json j{{"generator", s.generator}};
  if (s.generator == "garnet") {
    j["n_states"] = s.n_states;
    j["n_actions"] = s.n_actions;
    j["branching"] = s.branching;
  }
  if (s.generator == "graph") j["cost_jitter"] = s.cost_jitter;
  if (s.generator == "file") j["path"] = s.path.generic_string();
  if (s.seed) j["seed"] = *s.seed;
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"mdp", "algorithms", "gammas", "epsilon", "max_iters", "safeguard", "gamma_prime", "K", "runs",
                  "seed", "threads", "output_dir", "timing", "plots"},
                 "top level");
  ExperimentConfig c;
  if (j.contains("mdp")) c.mdp = source_from_json(j.at("mdp"));
  c.algorithms = get_as<std::vector<std::string>>(j, "algorithms");
  if (j.contains("gammas")) c.gammas = get_as<std::vector<double>>(j, "gammas");
  if (j.contains("epsilon")) c.epsilon = get_as<double>(j, "epsilon");
  if (j.contains("max_iters")) c.max_iters = get_as<int>(j, "max_iters");
  if (j.contains("safeguard")) c.safeguard = get_as<bool>(j, "safeguard");
  if (j.contains("gamma_prime")) c.gamma_prime = get_as<double>(j, "gamma_prime");
  if (j.contains("K")) c.iterations = get_as<int>(j, "K");
  if (j.contains("runs")) c.runs = get_as<int>(j, "runs");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("threads")) c.threads = get_as<int>(j, "threads");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir");
  if (j.contains("timing")) c.timing = get_as<bool>(j, "timing");
  if (j.contains("plots")) c.plots = get_as<bool>(j, "plots");
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j{{"mdp", source_to_json(mdp)},
         {"algorithms", algorithms},
         {"gammas", gammas},
         {"epsilon", epsilon},
         {"max_iters", max_iters},
         {"safeguard", safeguard},
         {"K", iterations},
         {"runs", runs},
         {"seed", seed},
         {"threads", threads},
         {"output_dir", output_dir.generic_string()},
         {"timing", timing},
         {"plots", plots}};
  if (gamma_prime) j["gamma_prime"] = *gamma_prime;
  return j;
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> generators{"garnet", "healthcare", "graph", "file"};
  if (!generators.count(mdp.generator)) throw ConfigError("unknown generator '" + mdp.generator + "'");
  if (mdp.generator == "file" && mdp.path.empty()) throw ConfigError("generator 'file' needs mdp.path");
  if (mdp.generator == "garnet") {
    if (mdp.n_states < 1 || mdp.n_actions < 1) throw ConfigError("garnet needs n_states, n_actions >= 1");
    if (mdp.branching < 1 || mdp.branching > mdp.n_states)
      throw ConfigError("garnet branching must lie in [1, n_states]");
  }
  if (mdp.cost_jitter < 0.0) throw ConfigError("cost_jitter must be non-negative");
  if (algorithms.empty()) throw ConfigError("algorithms must not be empty");
  for (const auto& a : algorithms) {
    if (!is_model_based(a) && !is_model_free(a)) throw ConfigError("unknown algorithm '" + a + "'");
  }
  if (gammas.empty()) throw ConfigError("gammas must not be empty");
  for (double g : gammas) {
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("every gamma must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (iterations < 0) throw ConfigError("K must be >= 0");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (gamma_prime) {
    for (double g : gammas) {
      if (!(*gamma_prime > g && *gamma_prime < 1.0))
        throw ConfigError("gamma_prime must lie in (gamma, 1) for every gamma");
    }
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  if (cfg.mdp.generator == "file" && cfg.mdp.path.is_relative()) cfg.mdp.path = path.parent_path() / cfg.mdp.path;
  return cfg;
}

Mdp build_mdp(const MdpSource& source, double gamma, std::uint64_t default_seed) {
  const std::uint64_t seed = source.seed.value_or(default_seed);
  if (source.generator == "garnet") return garnet(source.n_states, source.n_actions, source.branching, seed, gamma);
  if (source.generator == "healthcare") return healthcare(gamma);
  if (source.generator == "graph") return graph(seed, gamma, source.cost_jitter);
  if (source.generator == "file") return load_mdp(source.path).with_gamma(gamma);
  throw ConfigError("unknown generator '" + source.generator + "'");
}

SolveResult run_model_based(const std::string& algorithm, const Mdp& mdp, const ValueFunction& v0,
                            const SolverConfig& cfg, std::optional<double> gamma_prime) {
  const double gp = gamma_prime.value_or(default_gamma_prime(mdp.gamma()));
  if (algorithm == "vi") return vi_solve(mdp, v0, cfg);
  if (algorithm == "pi") return pi_solve(mdp, v0, cfg);
  if (algorithm == "nvi") return nvi_solve(mdp, v0, cfg);
  if (algorithm == "avi") return avi_solve(mdp, v0, cfg);
  if (algorithm == "qpi-uniform") return qpi_solve(mdp, v0, PriorState::uniform(mdp.n_states(), mdp.gamma()), cfg);
  if (algorithm == "qpi-mu") return qpi_solve(mdp, v0, PriorState::random_policy(mdp), cfg);
  if (algorithm == "qpi-recursive")
    return qpi_solve(mdp, v0, PriorState::recursive(mdp.n_states(), mdp.gamma()), cfg);
  if (algorithm == "qpi-backtrack")
    return qpi_solve_backtracking(mdp, v0, PriorState::uniform(mdp.n_states(), mdp.gamma()), gp, cfg);
  if (algorithm == "qpi-b") return qpi_b_solve(mdp, v0, gp, cfg);
  throw ConfigError("unknown model-based algorithm '" + algorithm + "'");
}

std::string cell_stem(const std::string& algorithm, double gamma) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_g%.15g", gamma);
  return algorithm + buf;
}

RunRecord run_experiment(const ExperimentConfig& cfg, bool write) {
  cfg.validate();
  RunRecord record;
  record.config = cfg;
  for (double gamma : cfg.gammas) {
    const Mdp mdp = build_mdp(cfg.mdp, gamma, cfg.seed);
    for (const auto& name : cfg.algorithms) {
      CellRecord cell;
      cell.algorithm = name;
      cell.gamma = gamma;
      if (is_model_based(name)) {
        SolverConfig sc{cfg.epsilon, cfg.max_iters, cfg.safeguard};
        SolveResult res = run_model_based(name, mdp, Vector::Zero(mdp.n_states()), sc, cfg.gamma_prime);
        cell.trace = std::move(res.trace);
        cell.converged = res.converged;
        cell.iterations = static_cast<int>(cell.trace.size()) - 1;
        cell.runtime_seconds = cell.trace.empty() ? 0.0 : cell.trace.back().elapsed_ns * 1e-9;
      } else {
        cell.model_free = true;
        MfResult res = mf_solve(mdp, mf_algorithm_from_name(name), Vector::Zero(mdp.n_pairs()), cfg.iterations,
                                LearningSchedule::standard(), cfg.seed, cfg.runs, cfg.threads);
        cell.trace.resize(res.mean_error.size());
        for (std::size_t k = 0; k < res.mean_error.size(); ++k) {
          cell.trace[k].bellman_error = res.mean_error[k];
          cell.trace[k].elapsed_ns = res.mean_elapsed_ns[k];
        }
        cell.iterations = cfg.iterations;
        cell.converged = !cell.trace.empty() && cell.trace.back().bellman_error <= cfg.epsilon;
        cell.runtime_seconds = res.mean_algorithm_seconds();
        cell.sampling_seconds = res.mean_sampling_seconds();
        for (const auto& r : res.runs) cell.regularized_steps += r.regularized_steps;
      }
      cell.final_error = cell.trace.empty() ? 0.0 : cell.trace.back().bellman_error;
      if (!cfg.timing) {
        for (auto& r : cell.trace) r.elapsed_ns = 0;
        cell.runtime_seconds = 0.0;
        cell.sampling_seconds = 0.0;
      }
      record.cells.push_back(std::move(cell));
    }
  }
  if (write) emit_outputs(record, cfg.output_dir);
  return record;
}

namespace {

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_trace_csv(const IterationTrace& trace, const fs::path& path) {
  auto out = open_out(path);
  out << "iter,bellman_error,safeguard,step_size,elapsed_ns\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& r = trace[k];
    out << k << ',' << fmt_double(r.bellman_error) << ',' << (r.safeguard_activated ? 1 : 0) << ','
        << (r.step_size ? fmt_double(*r.step_size) : std::string()) << ',' << r.elapsed_ns << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<fs::path> emit_outputs(const RunRecord& record, const fs::path& dir) {
  ensure_dir(dir);
  std::vector<fs::path> written;
  json cells = json::array();
  for (const auto& cell : record.cells) {
    const fs::path csv = dir / (cell_stem(cell.algorithm, cell.gamma) + ".csv");
    write_trace_csv(cell.trace, csv);
    written.push_back(csv);
    json c{{"algorithm", cell.algorithm},
           {"gamma", cell.gamma},
           {"model_free", cell.model_free},
           {"iterations", cell.iterations},
           {"converged", cell.converged},
           {"final_error", cell.final_error},
           {"runtime_s", cell.runtime_seconds},
           {"csv", csv.filename().generic_string()}};
    if (cell.model_free) {
      c["sampling_s"] = cell.sampling_seconds;
      c["regularized_steps"] = cell.regularized_steps;
    }
    cells.push_back(std::move(c));
  }

  if (record.config.plots) {
    std::vector<double> gammas;
    for (const auto& cell : record.cells) {
      if (std::find(gammas.begin(), gammas.end(), cell.gamma) == gammas.end()) gammas.push_back(cell.gamma);
    }
    for (double g : gammas) {
      std::vector<CsvSeries> series;
      for (const auto& cell : record.cells) {
        if (cell.gamma != g) continue;
        CsvSeries s{cell.algorithm, {}, {}};
        for (const auto& r : cell.trace) {
          s.bellman_error.push_back(r.bellman_error);
          s.safeguard.push_back(r.safeguard_activated);
        }
        series.push_back(std::move(s));
      }
      const fs::path svg = dir / (cell_stem("convergence", g) + ".svg");
      char title[64];
      std::snprintf(title, sizeof title, "gamma = %.15g", g);
      write_convergence_svg(series, title, svg);
      written.push_back(svg);
    }
  }

  const fs::path summary = dir / "summary.json";
  json j{{"config", record.config.to_json()}, {"cells", cells}};
  auto out = open_out(summary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + summary.string());
  written.push_back(summary);
  return written;
}

CsvSeries read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvSeries s;
  s.label = path.stem().string();
  std::string line;
  if (!std::getline(in, line) || line.rfind("iter,bellman_error,safeguard", 0) != 0)
    throw std::runtime_error(path.string() + ": not a trace CSV");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string iter, err, guard;
    if (!std::getline(ss, iter, ',') || !std::getline(ss, err, ',') || !std::getline(ss, guard, ','))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    try {
      s.bellman_error.push_back(std::stod(err));
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad bellman_error");
    }
    s.safeguard.push_back(guard == "1");
  }
  return s;
}

void write_convergence_svg(const std::vector<CsvSeries>& series, const std::string& title, const fs::path& path) {
  constexpr double W = 720, H = 440, L = 70, R = 150, T = 40, B = 50;
  constexpr double floor_err = 1e-16;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::size_t n_max = 1;
  double lo = 0.0, hi = 1.0;
  bool any = false;
  for (const auto& s : series) {
    n_max = std::max(n_max, s.bellman_error.size());
    for (double e : s.bellman_error) {
      if (!std::isfinite(e)) continue;
      const double l = std::log10(std::max(e, floor_err));
      lo = any ? std::min(lo, l) : l;
      hi = any ? std::max(hi, l) : l;
      any = true;
    }
  }
  lo = std::floor(lo);
  hi = std::ceil(hi);
  if (hi <= lo) hi = lo + 1;
  const double x_span = std::max<double>(1.0, static_cast<double>(n_max - 1));
  auto px = [&](double k) { return L + (W - L - R) * k / x_span; };
  auto py = [&](double e) { return T + (H - T - B) * (hi - std::log10(std::max(e, floor_err))) / (hi - lo); };

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << (W - R + L) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(lo); d <= static_cast<int>(hi); ++d) {
    const double y = py(std::pow(10.0, d));
    out << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double k = x_span * i / 4.0;
    out << "<text x=\"" << px(k) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
        << static_cast<long long>(std::llround(k)) << "</text>\n";
  }
  out << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">iteration</text>\n";
  out << "<text x=\"16\" y=\"" << (H - B + T) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (H - B + T) / 2 << ")\">Bellman error</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = palette[i % 10];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.bellman_error.size(); ++k) {
      if (!std::isfinite(s.bellman_error[k])) continue;
      out << px(static_cast<double>(k)) << ',' << py(s.bellman_error[k]) << ' ';
    }
    out << "\"/>\n";
    // Safeguard activations as short ticks along the bottom edge.
    for (std::size_t k = 0; k < s.safeguard.size(); ++k) {
      if (!s.safeguard[k]) continue;
      const double x = px(static_cast<double>(k));
      const double y0 = H - B - 4.0 * (i + 1);
      out << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << y0 << "\" y2=\"" << y0 - 6 << "\" stroke=\""
          << color << "\"/>\n";
    }
    const double ly = T + 16.0 * (i + 1);
    out << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 30 << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 36 << "\" y=\"" << ly << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace qpi
