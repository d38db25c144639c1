#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qpi/bellman.hpp"
#include "qpi/quasi_policy.hpp"

namespace qpi {

using RateFn = std::function<double(int)>;

/// Learning rate alpha_k and correction weight beta_k.
struct LearningSchedule {
  RateFn alpha;
  RateFn beta;

  /// alpha_k = 1/(k+1), beta_k = 1/(k+1)^0.1.
  static LearningSchedule standard();
  /// Named rate: "one_over_k" (1/(k+1)), "slow_pow" (1/(k+1)^0.1) or "zero".
  static RateFn preset(const std::string& name);
};

/// M = 2 gamma ||c||_inf / (1 - gamma)^2.
double clip_bound(const Mdp& mdp);

/// Scales p onto the inf-norm ball of radius M; clip_inf(0) = 0.
Vector clip_inf(const Vector& p, double bound);

/// One synchronous QPL step with everything needed to audit it.
struct QplStep {
  QFunction q_next;
  Vector correction;  ///< p_k before clipping
  Vector clipped;     ///< Pi_M(p_k)
  double delta = 0.0;
  double lambda = 0.0;
};

/// Uniform-prior QPL on pre-drawn next states (one per pair).
QplStep qpl_step_detailed(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                          const std::vector<int>& next_states);

QFunction qpl_step(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched, Rng& rng);

/// Prior over state-action pairs: P((s,a),(s',a')) = P(s'|s,a) / m.
PriorState state_action_random_policy_prior(const Mdp& mdp);

/// QPL with an arbitrary fixed prior on the nm-dimensional space.
QplStep qpl_step_generic(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                         const PriorState& prior, const std::vector<int>& next_states);

/// One observed transition (s, a) -> s_next with its stage cost.
struct Transition {
  int s = 0;
  int a = 0;
  int s_next = 0;
  double cost = 0.0;
};

/// Single-sample QPL update; touches every entry of q when delta != 0.
QplStep qpl_step_async(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                       const Transition& sample);

/// q_{k+1} = q_k - alpha_k (q_k - That(q_k)).
QFunction ql_step(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                  const std::vector<int>& next_states);
QFunction ql_step(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched, Rng& rng);

/// Speedy QL; both operator evaluations share the same next states.
QFunction sql_step(const Mdp& mdp, const QFunction& q_k, const QFunction& q_km1, int k,
                   const std::vector<int>& next_states);
QFunction sql_step(const Mdp& mdp, const QFunction& q_k, const QFunction& q_km1, int k, Rng& rng);

struct ZqlStep {
  QFunction q_next;
  Matrix d;                  ///< D_k
  bool regularized = false;  ///< D_k was singular and 1e-10 I was added
};

/// 0/1 matrix with a single one per row, at (s_next, greedy action of q in s_next).
Matrix sampled_transition_matrix(const Mdp& mdp, const QFunction& q, const std::vector<int>& next_states);

/// Zap QL with alpha_k = beta_k = 1/(k+1); D_{-1} = 0.
ZqlStep zql_step(const Mdp& mdp, const QFunction& q_k, const Matrix& d_km1, int k,
                 const std::vector<int>& next_states);
ZqlStep zql_step(const Mdp& mdp, const QFunction& q_k, const Matrix& d_km1, int k, Rng& rng);

enum class MfAlgorithm { Ql, Sql, Zql, Qpl, QplAsync, QplMu };

MfAlgorithm mf_algorithm_from_name(const std::string& name);
std::string mf_algorithm_name(MfAlgorithm algo);

struct MfRunSummary {
  std::vector<double> error;  ///< exact ||q_k - Tbar(q_k)||_inf for k = 0..K
  std::vector<std::int64_t> elapsed_ns;  ///< cumulative algorithm time, sampling excluded
  double algorithm_seconds = 0.0;
  double sampling_seconds = 0.0;
  int regularized_steps = 0;
  double max_clip_norm = 0.0;  ///< largest ||Pi_M(p_k)||_inf seen (QPL variants)
};

struct MfResult {
  std::vector<double> mean_error;  ///< per-iteration mean over runs
  std::vector<std::int64_t> mean_elapsed_ns;
  std::vector<MfRunSummary> runs;
  double clip_bound = 0.0;

  double mean_algorithm_seconds() const;
  double mean_sampling_seconds() const;
};

/// Single run of `algo` for K iterations seeded with `seed`.
MfRunSummary mf_run(const Mdp& mdp, MfAlgorithm algo, const QFunction& q0, int iterations,
                    const LearningSchedule& sched, std::uint64_t seed);

/// `runs` independent runs with seeds seed, seed + 1, ...; runs may execute
/// on several threads, the mean is taken in run order.
MfResult mf_solve(const Mdp& mdp, MfAlgorithm algo, const QFunction& q0, int iterations,
                  const LearningSchedule& sched, std::uint64_t seed, int runs, int threads = 0);

}  // namespace qpi
