#pragma once

#include <optional>

#include "qpi/least_change.hpp"
#include "qpi/solver.hpp"

namespace qpi {

enum class PriorKind { Uniform, FixedMatrix, Recursive };

/// Prior transition approximation and its gain (I - gamma P_prior)^{-1}.
struct PriorState {
  Matrix p_prior;
  Matrix g_prior;
  PriorKind kind = PriorKind::Uniform;

  /// P = E / n with the closed-form gain I + gamma / (n (1 - gamma)) E.
  static PriorState uniform(int n, double gamma);
  /// Arbitrary row-stochastic prior; the gain is one dense inverse.
  static PriorState fixed(Matrix p_prior, double gamma);
  /// Transition matrix of the uniformly random policy.
  static PriorState random_policy(const Mdp& mdp);
  /// Recursive scheme started from E / n.
  static PriorState recursive(int n, double gamma);
};

/**
 * Intermediate quantities of one rank-one QPI step:
 *
 *   w = T - c - gamma P_prior v,   w_check = G_prior w,
 *   u = v - mean(v) 1,             u_check = G_prior^T u,
 *   tau = 1 / (u^T v),  eta = 1 / (u^T (v - w_check)),  both 0 when u^T v = 0,
 *   P_tilde = P_prior + tau / gamma * w u^T,   G_tilde = G_prior + eta * w_check u_check^T.
 *
 * The matrices are only filled in when materialization was requested.
 */
struct QpiStepArtifacts {
  Vector w;
  Vector w_check;
  Vector u;
  Vector u_check;
  double tau = 0.0;
  double eta = 0.0;
  std::optional<Matrix> p_tilde;
  std::optional<Matrix> g_tilde;
};

struct QpiStep {
  ValueFunction v_next;
  QpiStepArtifacts art;
};

struct UniformQpiStep {
  ValueFunction v_next;
  double delta = 0.0;
  double lambda = 0.0;
};

/**
 * Rank-one gain for a point x with image t = T(x) and affine offset c
 * (so that t = c + gamma P_true x). Dimension-agnostic: also used on
 * Q-functions by the model-free learner.
 */
QpiStepArtifacts rank_one_gain(const Vector& x, const Vector& t, const Vector& c, const PriorState& prior,
                               double gamma, bool materialize = false);

/// G_tilde * g without forming G_tilde.
Vector apply_gain(const QpiStepArtifacts& art, const PriorState& prior, const Vector& g);

/// ||G_tilde - I||_inf computed row by row in O(n^2).
double gain_excess_norm(const QpiStepArtifacts& art, const PriorState& prior);

/// v_{k+1} = v_k - G_tilde (v_k - T_k) with a fixed prior (P_prior 1 = 1).
QpiStep qpi_step_generic(const Mdp& mdp, const ValueFunction& v_k, const PriorState& prior,
                         bool materialize = false);

/// Closed form for the uniform prior: (1 - delta) T_k + delta c_k + lambda 1.
UniformQpiStep qpi_step_uniform(const Mdp& mdp, const ValueFunction& v_k);

/// Safeguarded QPI. Recursive priors are renormalized to ||P||_inf <= 1.
SolveResult qpi_solve(const Mdp& mdp, const ValueFunction& v0, PriorState prior, const SolverConfig& cfg);

/// Default backtracking contraction target (1 + gamma) / 2.
inline double default_gamma_prime(double gamma) { return 0.5 * (1.0 + gamma); }

/// Maximum step-size halvings per outer iteration before giving up.
inline constexpr int kMaxHalvings = 60;

/**
 * QPI with step-size backtracking instead of the safeguard:
 * v_{k+1} = T_k - alpha (G_tilde - I)(v_k - T_k), halving alpha from 1
 * until ||v_{k+1} - T(v_{k+1})|| <= gamma_prime * theta_k.
 */
SolveResult qpi_solve_backtracking(const Mdp& mdp, const ValueFunction& v0, PriorState prior, double gamma_prime,
                                   const SolverConfig& cfg);

struct TransitionApprox {
  Matrix p_tilde;
  Matrix g_tilde;
};

/**
 * Secant-augmented least-change update of the previous approximation.
 * With `same_policy` the constraints are P 1 = 1, P v_k = (T_k - c_k) / gamma
 * and gamma P (v_k - v_{k-1}) = T_k - T_{k-1}; otherwise the local one is
 * left out. On a conflict the secant constraint is dropped first, then the
 * local one.
 */
TransitionApprox qpi_b_approx(const TransitionApprox& prev, const ValueFunction& v_k, const ValueFunction& v_km1,
                              const ValueFunction& t_k, const ValueFunction& t_km1, const Vector& c_k,
                              bool same_policy, double gamma);

/// Backtracked QPI with secant-augmented approximations, started from E / n.
SolveResult qpi_b_solve(const Mdp& mdp, const ValueFunction& v0, double gamma_prime, const SolverConfig& cfg);

}  // namespace qpi
