#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace qpi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Value function over states, v(s).
using ValueFunction = Vector;

/// Q-function over state-action pairs, flattened as index(s, a) = s * m + a.
using QFunction = Vector;

/// Deterministic policy; entry s is the (0-based) action taken in state s.
using Policy = std::vector<int>;

/// Raised when an operation is asked to enumerate more policies than allowed.
class InstanceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Dense tabular MDP with cost minimization.
 *
 * The kernel is stored as an (n*m) x n matrix whose row index(s, a) holds
 * P(. | s, a). Costs are the matching (n*m) vector. The object is immutable
 * after construction; the constructor validates row-stochasticity (1e-12),
 * non-negative probabilities, finite costs and gamma in (0, 1).
 */
class Mdp {
 public:
  static constexpr double kStochasticTol = 1e-12;

  Mdp(int n_states, int n_actions, double gamma, Vector cost, Matrix kernel);

  int n_states() const { return n_; }
  int n_actions() const { return m_; }
  int n_pairs() const { return n_ * m_; }
  double gamma() const { return gamma_; }

  /// Row index(s, a) of the flattened state-action space.
  int index(int s, int a) const { return s * m_ + a; }

  const Matrix& kernel() const { return kernel_; }
  const Vector& cost() const { return cost_; }

  double prob(int s, int a, int s_next) const { return kernel_(index(s, a), s_next); }
  double cost(int s, int a) const { return cost_(index(s, a)); }

  /// Same model with a different discount factor.
  Mdp with_gamma(double gamma) const;

  /// Transition matrix P^pi (n x n) of a deterministic policy.
  Matrix policy_matrix(const Policy& pi) const;

  /// Stage cost c^pi of a deterministic policy.
  Vector policy_cost(const Policy& pi) const;

  /// Transition matrix of the uniformly random policy (average over actions).
  Matrix mean_action_matrix() const;

  void check_policy(const Policy& pi) const;

 private:
  int n_;
  int m_;
  double gamma_;
  Vector cost_;
  Matrix kernel_;
};

/// JSON layout: {n_states, n_actions, gamma, cost[s][a], kernel[s][a][s_next]}.
nlohmann::json to_json(const Mdp& mdp);
Mdp mdp_from_json(const nlohmann::json& j);

Mdp load_mdp(const std::filesystem::path& path);
void save_mdp(const Mdp& mdp, const std::filesystem::path& path);

}  // namespace qpi
