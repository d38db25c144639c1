#pragma once

#include <vector>

#include "qpi/mdp.hpp"
#include "qpi/rng.hpp"

namespace qpi {

struct BellmanResult {
  ValueFunction tv;
  Policy greedy;
  Vector residual;  ///< v - T(v), evaluated without cancellation against large |v|
};

struct PolicyEvaluationResult {
  ValueFunction value;
  Vector stage_cost;
  Matrix transition;
};

struct OptimalSolution {
  ValueFunction v_star;
  Policy pi_star;
};

/// T(v)(s) = min_a c(s,a) + gamma * E[v(s+)], with the minimizing action.
/// Ties go to the smallest action index. The expectation is taken of
/// v - v(s), which keeps the residual accurate when |v| >> ||v - T(v)||.
BellmanResult bellman_apply(const Mdp& mdp, const ValueFunction& v);

Policy greedy_policy(const Mdp& mdp, const ValueFunction& v);

Policy q_greedy_policy(const QFunction& q, int n_states, int n_actions);

/// Solves (I - gamma P^pi) v = c^pi by LU with partial pivoting.
PolicyEvaluationResult policy_evaluation(const Mdp& mdp, const Policy& pi);

/// ||v - T(v)||_inf
double bellman_error(const Mdp& mdp, const ValueFunction& v);

/// One inverse-CDF draw of s+ ~ P(.|s,a) per pair, in flattening order.
std::vector<int> draw_next_states(const Mdp& mdp, Rng& rng);

/// Sampled operator evaluated on already drawn next states.
QFunction sampled_bellman_apply(const Mdp& mdp, const QFunction& q, const std::vector<int>& next_states);

/// Synchronous sampled operator: draws one next state per pair, then applies.
QFunction sampled_bellman_apply(const Mdp& mdp, const QFunction& q, Rng& rng);

/// Exact Q operator: c(s,a) + gamma * E[min_a+ q(s+, a+)].
QFunction exact_q_bellman_apply(const Mdp& mdp, const QFunction& q);

/// ||q - Tbar(q)||_inf
double q_bellman_error(const Mdp& mdp, const QFunction& q);

/// Enumerates every deterministic policy. Refuses when m^n exceeds `max_policies`.
OptimalSolution brute_force_optimal(const Mdp& mdp, long long max_policies = 1'000'000);

}  // namespace qpi
