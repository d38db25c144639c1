#include "qpi/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace qpi {

Mdp::Mdp(int n_states, int n_actions, double gamma, Vector cost, Matrix kernel)
    : n_(n_states), m_(n_actions), gamma_(gamma), cost_(std::move(cost)), kernel_(std::move(kernel)) {
  if (n_ < 1 || m_ < 1) throw std::invalid_argument("Mdp: need at least one state and one action");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw std::invalid_argument("Mdp: gamma must lie in (0, 1)");
  if (cost_.size() != n_pairs()) throw std::invalid_argument("Mdp: cost has wrong length");
  if (kernel_.rows() != n_pairs() || kernel_.cols() != n_)
    throw std::invalid_argument("Mdp: kernel has wrong shape");
  if (!cost_.allFinite()) throw std::invalid_argument("Mdp: non-finite cost entry");

  for (int row = 0; row < n_pairs(); ++row) {
    double sum = 0.0;
    for (int t = 0; t < n_; ++t) {
      const double p = kernel_(row, t);
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("Mdp: kernel entry outside [0, 1] in row " + std::to_string(row));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream msg;
      msg << "Mdp: kernel row (s=" << row / m_ << ", a=" << row % m_ << ") sums to " << sum;
      throw std::invalid_argument(msg.str());
    }
  }
}

Mdp Mdp::with_gamma(double gamma) const { return Mdp(n_, m_, gamma, cost_, kernel_); }

void Mdp::check_policy(const Policy& pi) const {
  if (static_cast<int>(pi.size()) != n_) throw std::invalid_argument("policy length does not match n_states");
  for (int a : pi)
    if (a < 0 || a >= m_) throw std::invalid_argument("policy contains an invalid action index");
}

Matrix Mdp::policy_matrix(const Policy& pi) const {
  check_policy(pi);
  Matrix p(n_, n_);
  for (int s = 0; s < n_; ++s) p.row(s) = kernel_.row(index(s, pi[s]));
  return p;
}

Vector Mdp::policy_cost(const Policy& pi) const {
  check_policy(pi);
  Vector c(n_);
  for (int s = 0; s < n_; ++s) c(s) = cost_(index(s, pi[s]));
  return c;
}

Matrix Mdp::mean_action_matrix() const {
  Matrix p = Matrix::Zero(n_, n_);
  for (int s = 0; s < n_; ++s) {
    for (int a = 0; a < m_; ++a) p.row(s) += kernel_.row(index(s, a));
    p.row(s) /= m_;
  }
  return p;
}

nlohmann::json to_json(const Mdp& mdp) {
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  nlohmann::json cost = nlohmann::json::array();
  nlohmann::json kernel = nlohmann::json::array();
  for (int s = 0; s < n; ++s) {
    nlohmann::json crow = nlohmann::json::array();
    nlohmann::json krow = nlohmann::json::array();
    for (int a = 0; a < m; ++a) {
      crow.push_back(mdp.cost(s, a));
      std::vector<double> dist(n);
      for (int t = 0; t < n; ++t) dist[t] = mdp.prob(s, a, t);
      krow.push_back(dist);
    }
    cost.push_back(std::move(crow));
    kernel.push_back(std::move(krow));
  }
  return {{"n_states", n}, {"n_actions", m}, {"gamma", mdp.gamma()}, {"cost", cost}, {"kernel", kernel}};
}

Mdp mdp_from_json(const nlohmann::json& j) {
  const int n = j.at("n_states").get<int>();
  const int m = j.at("n_actions").get<int>();
  const double gamma = j.at("gamma").get<double>();
  if (n < 1 || m < 1) throw std::invalid_argument("MDP JSON: n_states and n_actions must be positive");

  const auto& cost = j.at("cost");
  const auto& kernel = j.at("kernel");
  if (cost.size() != static_cast<size_t>(n) || kernel.size() != static_cast<size_t>(n))
    throw std::invalid_argument("MDP JSON: cost/kernel outer dimension must equal n_states");

  Vector c(n * m);
  Matrix k(n * m, n);
  for (int s = 0; s < n; ++s) {
    if (cost[s].size() != static_cast<size_t>(m) || kernel[s].size() != static_cast<size_t>(m))
      throw std::invalid_argument("MDP JSON: per-state entries must have n_actions elements");
    for (int a = 0; a < m; ++a) {
      c(s * m + a) = cost[s][a].get<double>();
      const auto& dist = kernel[s][a];
      if (dist.size() != static_cast<size_t>(n))
        throw std::invalid_argument("MDP JSON: kernel rows must have n_states entries");
      for (int t = 0; t < n; ++t) k(s * m + a, t) = dist[t].get<double>();
    }
  }
  return Mdp(n, m, gamma, std::move(c), std::move(k));
}

Mdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open MDP file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("cannot parse MDP file " + path.string() + ": " + e.what());
  }
  return mdp_from_json(j);
}

void save_mdp(const Mdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write MDP file " + path.string());
  out << to_json(mdp).dump(1) << '\n';
}

}  // namespace qpi
