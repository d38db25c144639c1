#pragma once

#include "qpi/solver.hpp"

namespace qpi {

/// Result of screening a candidate iterate against the plain VI step.
struct SafeguardOutcome {
  ValueFunction v;
  BellmanResult bellman;  ///< T(v) and the greedy policy of the kept iterate
  double bellman_error = 0.0;
  bool activated = false;
};

/**
 * Keeps `candidate` as v_{k+1} when its Bellman error is at most
 * gamma^{k+1} * theta_0; otherwise falls back to `t_k` = T(v_k).
 */
SafeguardOutcome safeguard_wrap(const ValueFunction& candidate, const ValueFunction& t_k, double theta_0, int k,
                                const Mdp& mdp);

SolveResult vi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg);

/// Policy iteration; stops when the greedy policy repeats or the Bellman error is below epsilon.
SolveResult pi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg);

/// Nesterov-accelerated VI with v_{-1} = v_0.
SolveResult nvi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg);

/// Anderson-accelerated VI with memory one and v_{-1} = v_0.
SolveResult avi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg);

}  // namespace qpi
