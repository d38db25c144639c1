#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "qpi/bellman.hpp"

namespace qpi {

struct SolverConfig {
  double epsilon = 1e-6;  ///< stop once ||v - T(v)||_inf <= epsilon
  int max_iters = 100000;
  bool safeguard = true;

  void validate() const;
};

/// One row of a convergence trace. Row k describes the iterate v_k.
struct IterationRecord {
  double bellman_error = 0.0;
  bool safeguard_activated = false;
  std::optional<double> step_size;
  /// Backtracking diagnostics: halvings used and ||G_k - I||_inf of the gain that produced v_k.
  std::optional<int> halvings;
  std::optional<double> gain_excess_norm;
  std::int64_t elapsed_ns = 0;
};

/// Rows 0..K for the initial iterate and every accepted update.
using IterationTrace = std::vector<IterationRecord>;

struct SolveResult {
  ValueFunction v;
  Policy policy;  ///< greedy policy w.r.t. the returned v
  IterationTrace trace;
  bool converged = false;

  /// Number of updates performed (trace rows minus the initial one).
  int iterations() const { return trace.empty() ? 0 : static_cast<int>(trace.size()) - 1; }
};

/// True when |denominator| is negligible next to `scale`, i.e. <= 1e-14 * (1 + scale).
inline bool negligible(double denominator, double scale) {
  return std::abs(denominator) <= 1e-14 * (1.0 + std::abs(scale));
}

}  // namespace qpi
