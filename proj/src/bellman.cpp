#include "qpi/bellman.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qpi {

namespace {

void check_value_length(const Mdp& mdp, const ValueFunction& v) {
  if (v.size() != mdp.n_states()) throw std::invalid_argument("value function length does not match n_states");
}

void check_q_length(const Mdp& mdp, const QFunction& q) {
  if (q.size() != mdp.n_pairs()) throw std::invalid_argument("Q-function length does not match n_states * n_actions");
}

// min_a q(s, a) for every s.
Vector state_minimum(const QFunction& q, int n, int m) {
  Vector out(n);
  for (int s = 0; s < n; ++s) out(s) = q.segment(s * m, m).minCoeff();
  return out;
}

}  // namespace

BellmanResult bellman_apply(const Mdp& mdp, const ValueFunction& v) {
  check_value_length(mdp, v);
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  const double gamma = mdp.gamma();

  BellmanResult out{Vector(n), Policy(n), Vector(n)};
  Vector centered(n);
  for (int s = 0; s < n; ++s) {
    // Rows sum to one, so c + gamma P v = gamma v(s) + c + gamma P (v - v(s)).
    centered = v.array() - v(s);
    const Vector local = mdp.cost().segment(s * m, m) + gamma * (mdp.kernel().middleRows(s * m, m) * centered);
    int best = 0;
    for (int a = 1; a < m; ++a)
      if (local(a) < local(best)) best = a;
    out.greedy[s] = best;
    out.tv(s) = gamma * v(s) + local(best);
    out.residual(s) = (1.0 - gamma) * v(s) - local(best);
  }
  return out;
}

Policy greedy_policy(const Mdp& mdp, const ValueFunction& v) { return bellman_apply(mdp, v).greedy; }

Policy q_greedy_policy(const QFunction& q, int n_states, int n_actions) {
  if (n_states < 1 || n_actions < 1 || q.size() != static_cast<Eigen::Index>(n_states) * n_actions)
    throw std::invalid_argument("Q-function length does not match n_states * n_actions");
  Policy pi(n_states);
  for (int s = 0; s < n_states; ++s) {
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
      if (q(s * n_actions + a) < q(s * n_actions + best)) best = a;
    pi[s] = best;
  }
  return pi;
}

PolicyEvaluationResult policy_evaluation(const Mdp& mdp, const Policy& pi) {
  PolicyEvaluationResult out;
  out.transition = mdp.policy_matrix(pi);
  out.stage_cost = mdp.policy_cost(pi);

  const int n = mdp.n_states();
  const Matrix system = Matrix::Identity(n, n) - mdp.gamma() * out.transition;
  out.value = system.partialPivLu().solve(out.stage_cost);

  const double residual = (system * out.value - out.stage_cost).lpNorm<Eigen::Infinity>();
  const double scale = 1.0 + out.value.lpNorm<Eigen::Infinity>();
  if (!out.value.allFinite() || residual > 1e-10 * scale)
    throw std::runtime_error("policy_evaluation: linear solve failed (residual " + std::to_string(residual) + ")");
  return out;
}

double bellman_error(const Mdp& mdp, const ValueFunction& v) {
  return bellman_apply(mdp, v).residual.lpNorm<Eigen::Infinity>();
}

std::vector<int> draw_next_states(const Mdp& mdp, Rng& rng) {
  const int n = mdp.n_states();
  std::vector<int> next(mdp.n_pairs());
  for (int row = 0; row < mdp.n_pairs(); ++row) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    int chosen = -1;
    int last_support = 0;
    for (int t = 0; t < n; ++t) {
      const double p = mdp.kernel()(row, t);
      if (p <= 0.0) continue;
      last_support = t;
      cumulative += p;
      if (u < cumulative) {
        chosen = t;
        break;
      }
    }
    // Rounding can leave the cumulative sum slightly below u.
    next[row] = chosen >= 0 ? chosen : last_support;
  }
  return next;
}

QFunction sampled_bellman_apply(const Mdp& mdp, const QFunction& q, const std::vector<int>& next_states) {
  check_q_length(mdp, q);
  if (static_cast<int>(next_states.size()) != mdp.n_pairs())
    throw std::invalid_argument("need one sampled next state per state-action pair");
  const Vector best = state_minimum(q, mdp.n_states(), mdp.n_actions());
  QFunction out(mdp.n_pairs());
  for (int row = 0; row < mdp.n_pairs(); ++row)
    out(row) = mdp.cost()(row) + mdp.gamma() * best(next_states[row]);
  return out;
}

QFunction sampled_bellman_apply(const Mdp& mdp, const QFunction& q, Rng& rng) {
  check_q_length(mdp, q);
  return sampled_bellman_apply(mdp, q, draw_next_states(mdp, rng));
}

QFunction exact_q_bellman_apply(const Mdp& mdp, const QFunction& q) {
  check_q_length(mdp, q);
  const Vector best = state_minimum(q, mdp.n_states(), mdp.n_actions());
  return mdp.cost() + mdp.gamma() * (mdp.kernel() * best);
}

double q_bellman_error(const Mdp& mdp, const QFunction& q) {
  return (q - exact_q_bellman_apply(mdp, q)).lpNorm<Eigen::Infinity>();
}

OptimalSolution brute_force_optimal(const Mdp& mdp, long long max_policies) {
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  long long count = 1;
  for (int s = 0; s < n; ++s) {
    count *= m;
    if (count > max_policies)
      throw InstanceTooLarge("brute_force_optimal: more than " + std::to_string(max_policies) + " policies");
  }

  OptimalSolution best{Vector::Constant(n, std::numeric_limits<double>::infinity()), Policy(n, 0)};
  double best_sum = std::numeric_limits<double>::infinity();
  Policy pi(n, 0);
  for (long long i = 0; i < count; ++i) {
    const Vector value = policy_evaluation(mdp, pi).value;
    best.v_star = best.v_star.cwiseMin(value);
    // The optimal policy dominates entrywise, so it also has the smallest sum.
    if (value.sum() < best_sum) {
      best_sum = value.sum();
      best.pi_star = pi;
    }
    for (int s = 0; s < n; ++s) {
      if (++pi[s] < m) break;
      pi[s] = 0;
    }
  }
  return best;
}

}  // namespace qpi
