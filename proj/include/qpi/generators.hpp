#pragma once

#include <cstdint>

#include "qpi/mdp.hpp"

namespace qpi {

/// Random Garnet MDP: each pair reaches `branching` distinct next states
/// chosen uniformly, with probabilities from sorted uniform cut points, and
/// costs uniform on [0, 1].
Mdp garnet(int n_states, int n_actions, int branching, std::uint64_t seed, double gamma = 0.9);

/**
 * Six-state treatment model; state 6 (index 5) is absorbing with cost 50.
 *
 * From states 1..5 under dosage a in {1, 2, 3}: improve (s -> max(s-1, 1))
 * with probability 0.1a, stay with 0.6 - 0.05a, deteriorate (s -> s+1) with
 * the remainder. The cost is the expected next-state label plus a.
 */
Mdp healthcare(double gamma = 0.9);

/**
 * Six-node path-finding MDP with 3 actions per node (advance, shortcut, stay)
 * and deterministic moves. Every move costs 1; node 6 (index 5) is an
 * absorbing zero-cost goal. A positive `cost_jitter` adds jitter * U[0, 1]
 * drawn from `seed` to each non-goal cost.
 */
Mdp graph(std::uint64_t seed = 0, double gamma = 0.9, double cost_jitter = 0.0);

}  // namespace qpi
