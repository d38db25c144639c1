#include "qpi/quasi_policy.hpp"

#include <cmath>
#include <stdexcept>

#include "iteration_driver.hpp"

namespace qpi {

namespace {

void check_prior(const PriorState& prior, Eigen::Index n) {
  if (prior.p_prior.rows() != n || prior.p_prior.cols() != n || prior.g_prior.rows() != n ||
      prior.g_prior.cols() != n)
    throw std::invalid_argument("prior dimension does not match the iterate");
}

double inf_norm(const Matrix& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

// The prior of the recursive scheme is the previous approximation, kept at
// ||P||_inf <= 1 by scaling.
struct RecursiveGain {
  TransitionApprox approx;

  Vector next_gain_times(const ValueFunction& v, const ValueFunction& tv, const Vector& c, double gamma,
                         const Vector& g, double* excess) {
    const Eigen::Index n = v.size();
    std::vector<LinearConstraint> cons{{Vector::Ones(n), Vector::Ones(n)}, {v, (tv - c) / gamma}};
    LeastChangeUpdate upd;
    try {
      upd = least_change_update(approx.p_tilde, cons);
    } catch (const ConstraintConflict&) {
      cons.pop_back();
      upd = least_change_update(approx.p_tilde, cons);
    }
    Matrix p_new = upd.apply(approx.p_tilde);
    Matrix g_new = updated_gain(approx.g_tilde, p_new, upd, gamma);
    const double norm = inf_norm(p_new);
    if (norm > 1.0) {
      p_new /= norm;
      g_new = dense_gain(p_new, gamma);
    }
    approx = {std::move(p_new), std::move(g_new)};
    if (excess) *excess = inf_norm(approx.g_tilde - Matrix::Identity(n, n));
    return approx.g_tilde * g;
  }
};

UniformQpiStep uniform_step(const ValueFunction& v, const ValueFunction& tv, const Vector& g, const Vector& c,
                            double gamma) {
  const double n = static_cast<double>(v.size());
  const Vector z = c.array() - c.mean();
  const Vector y = g.array() - g.mean();
  // v^T y = u^T y and v^T (y + z) = u^T (y + z) since y and z have zero mean.
  const Vector u = v.array() - v.mean();

  UniformQpiStep out;
  if (!negligible(u.squaredNorm(), v.squaredNorm())) {
    const double denominator = u.dot(y + z);
    if (!negligible(denominator, u.norm() * (y + z).norm())) out.delta = u.dot(y) / denominator;
  }
  out.lambda = gamma / (n * (1.0 - gamma)) * ((out.delta - 1.0) * g + out.delta * c).sum();
  out.v_next = (1.0 - out.delta) * tv + out.delta * c + Vector::Constant(v.size(), out.lambda);
  return out;
}

TransitionApprox uniform_approx(Eigen::Index n, double gamma) {
  const PriorState u = PriorState::uniform(static_cast<int>(n), gamma);
  return {u.p_prior, u.g_prior};
}

// Step-size search shared by the backtracking variants. `direction` is
// (G_tilde - I) g_k; the candidate is T_k - alpha * direction.
void backtrack(detail::IterationDriver& run, Vector direction, double gamma_prime, double excess) {
  IterationRecord rec;
  rec.gain_excess_norm = excess;
  double alpha = 1.0;
  int halvings = 0;
  if (!direction.allFinite()) {
    alpha = 0.0;
    direction.setZero();
  }
  for (;;) {
    ValueFunction w = run.tv() - alpha * direction;
    BellmanResult b = bellman_apply(run.mdp(), w);
    const double theta = b.residual.lpNorm<Eigen::Infinity>();
    if (theta <= gamma_prime * run.theta()) {
      rec.step_size = alpha;
      rec.halvings = halvings;
      run.accept(std::move(w), std::move(b), theta, rec);
      return;
    }
    if (++halvings > kMaxHalvings)
      throw std::logic_error("backtracking exceeded " + std::to_string(kMaxHalvings) + " halvings");
    alpha *= 0.5;
  }
}

void check_gamma_prime(double gamma, double gamma_prime) {
  if (!(gamma_prime > gamma && gamma_prime < 1.0))
    throw std::invalid_argument("gamma_prime must lie in (gamma, 1)");
}

}  // namespace

PriorState PriorState::uniform(int n, double gamma) {
  PriorState s;
  s.kind = PriorKind::Uniform;
  s.p_prior = Matrix::Constant(n, n, 1.0 / n);
  s.g_prior = Matrix::Identity(n, n) + Matrix::Constant(n, n, gamma / (n * (1.0 - gamma)));
  return s;
}

PriorState PriorState::fixed(Matrix p_prior, double gamma) {
  if (p_prior.rows() != p_prior.cols()) throw std::invalid_argument("prior must be square");
  const Eigen::Index n = p_prior.rows();
  if ((p_prior * Vector::Ones(n) - Vector::Ones(n)).lpNorm<Eigen::Infinity>() > 1e-10)
    throw std::invalid_argument("prior rows must sum to one");
  PriorState s;
  s.kind = PriorKind::FixedMatrix;
  s.g_prior = dense_gain(p_prior, gamma);
  s.p_prior = std::move(p_prior);
  return s;
}

PriorState PriorState::random_policy(const Mdp& mdp) { return fixed(mdp.mean_action_matrix(), mdp.gamma()); }

PriorState PriorState::recursive(int n, double gamma) {
  PriorState s = uniform(n, gamma);
  s.kind = PriorKind::Recursive;
  return s;
}

QpiStepArtifacts rank_one_gain(const Vector& x, const Vector& t, const Vector& c, const PriorState& prior,
                               double gamma, bool materialize) {
  check_prior(prior, x.size());
  QpiStepArtifacts art;
  art.w = t - c - gamma * (prior.p_prior * x);
  art.w_check = prior.g_prior * art.w;
  art.u = x.array() - x.mean();
  art.u_check = prior.g_prior.transpose() * art.u;

  const double uv = art.u.squaredNorm();  // equals u^T x because u^T 1 = 0
  if (!negligible(uv, x.squaredNorm())) {
    const Vector shifted = x - art.w_check;
    const double denominator = art.u.dot(shifted);
    if (!negligible(denominator, art.u.norm() * shifted.norm())) {
      art.tau = 1.0 / uv;
      art.eta = 1.0 / denominator;
    }
  }
  if (materialize) {
    art.p_tilde = prior.p_prior + (art.tau / gamma) * art.w * art.u.transpose();
    art.g_tilde = prior.g_prior + art.eta * art.w_check * art.u_check.transpose();
  }
  return art;
}

Vector apply_gain(const QpiStepArtifacts& art, const PriorState& prior, const Vector& g) {
  Vector out = prior.g_prior * g;
  if (art.eta != 0.0) out += (art.eta * art.u_check.dot(g)) * art.w_check;
  return out;
}

double gain_excess_norm(const QpiStepArtifacts& art, const PriorState& prior) {
  const Eigen::Index n = prior.g_prior.rows();
  double best = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double entry = prior.g_prior(i, j) - (i == j ? 1.0 : 0.0) + art.eta * art.w_check(i) * art.u_check(j);
      row += std::abs(entry);
    }
    best = std::max(best, row);
  }
  return best;
}

QpiStep qpi_step_generic(const Mdp& mdp, const ValueFunction& v_k, const PriorState& prior, bool materialize) {
  const BellmanResult b = bellman_apply(mdp, v_k);
  const Vector c_k = mdp.policy_cost(b.greedy);
  QpiStep out;
  out.art = rank_one_gain(v_k, b.tv, c_k, prior, mdp.gamma(), materialize);
  out.v_next = v_k - apply_gain(out.art, prior, b.residual);
  return out;
}

UniformQpiStep qpi_step_uniform(const Mdp& mdp, const ValueFunction& v_k) {
  const BellmanResult b = bellman_apply(mdp, v_k);
  return uniform_step(v_k, b.tv, b.residual, mdp.policy_cost(b.greedy), mdp.gamma());
}

SolveResult qpi_solve(const Mdp& mdp, const ValueFunction& v0, PriorState prior, const SolverConfig& cfg) {
  const double gamma = mdp.gamma();
  check_prior(prior, mdp.n_states());
  detail::IterationDriver run(mdp, v0, cfg);
  RecursiveGain recursive{{prior.p_prior, prior.g_prior}};

  while (!run.finished()) {
    const Vector c_k = mdp.policy_cost(run.greedy());
    ValueFunction candidate;
    switch (prior.kind) {
      case PriorKind::Uniform:
        candidate = uniform_step(run.v(), run.tv(), run.residual(), c_k, gamma).v_next;
        break;
      case PriorKind::FixedMatrix: {
        const QpiStepArtifacts art = rank_one_gain(run.v(), run.tv(), c_k, prior, gamma);
        candidate = run.v() - apply_gain(art, prior, run.residual());
        break;
      }
      case PriorKind::Recursive: {
        const Vector& g = run.residual();
        candidate = run.v() - recursive.next_gain_times(run.v(), run.tv(), c_k, gamma, g, nullptr);
        break;
      }
    }
    run.advance(candidate);
  }
  return run.finish();
}

SolveResult qpi_solve_backtracking(const Mdp& mdp, const ValueFunction& v0, PriorState prior, double gamma_prime,
                                   const SolverConfig& cfg) {
  const double gamma = mdp.gamma();
  check_gamma_prime(gamma, gamma_prime);
  check_prior(prior, mdp.n_states());
  SolverConfig plain = cfg;
  plain.safeguard = false;
  detail::IterationDriver run(mdp, v0, plain);
  RecursiveGain recursive{{prior.p_prior, prior.g_prior}};

  while (!run.finished()) {
    const Vector c_k = mdp.policy_cost(run.greedy());
    const Vector& g = run.residual();
    Vector gain_g;
    double excess = 0.0;
    if (prior.kind == PriorKind::Recursive) {
      gain_g = recursive.next_gain_times(run.v(), run.tv(), c_k, gamma, g, &excess);
    } else {
      const QpiStepArtifacts art = rank_one_gain(run.v(), run.tv(), c_k, prior, gamma);
      gain_g = apply_gain(art, prior, g);
      excess = gain_excess_norm(art, prior);
    }
    backtrack(run, gain_g - g, gamma_prime, excess);
  }
  return run.finish();
}

TransitionApprox qpi_b_approx(const TransitionApprox& prev, const ValueFunction& v_k, const ValueFunction& v_km1,
                              const ValueFunction& t_k, const ValueFunction& t_km1, const Vector& c_k,
                              bool same_policy, double gamma) {
  const Eigen::Index n = v_k.size();
  const LinearConstraint stochastic{Vector::Ones(n), Vector::Ones(n)};
  const LinearConstraint local{v_k, (t_k - c_k) / gamma};
  const LinearConstraint secant{v_k - v_km1, (t_k - t_km1) / gamma};

  // Priority order: stochastic rows, local structure, secant.
  std::vector<std::vector<LinearConstraint>> attempts;
  if (same_policy) {
    attempts = {{stochastic, local, secant}, {stochastic, local}, {stochastic}};
  } else {
    attempts = {{stochastic, secant}, {stochastic}};
  }
  for (size_t i = 0; i < attempts.size(); ++i) {
    try {
      const LeastChangeUpdate upd = least_change_update(prev.p_tilde, attempts[i]);
      Matrix p_new = upd.apply(prev.p_tilde);
      Matrix g_new = updated_gain(prev.g_tilde, p_new, upd, gamma);
      return {std::move(p_new), std::move(g_new)};
    } catch (const ConstraintConflict&) {
      if (i + 1 == attempts.size()) throw;
    }
  }
  throw std::logic_error("qpi_b_approx: unreachable");
}

SolveResult qpi_b_solve(const Mdp& mdp, const ValueFunction& v0, double gamma_prime, const SolverConfig& cfg) {
  const double gamma = mdp.gamma();
  check_gamma_prime(gamma, gamma_prime);
  SolverConfig plain = cfg;
  plain.safeguard = false;
  detail::IterationDriver run(mdp, v0, plain);
  const Eigen::Index n = mdp.n_states();

  TransitionApprox approx = uniform_approx(n, gamma);
  ValueFunction v_prev;
  ValueFunction t_prev;
  Policy pi_prev;
  while (!run.finished()) {
    const Vector c_k = mdp.policy_cost(run.greedy());
    if (run.k() == 0) {
      const std::vector<LinearConstraint> cons{{Vector::Ones(n), Vector::Ones(n)}, {run.v(), (run.tv() - c_k) / gamma}};
      const LeastChangeUpdate upd = least_change_update(approx.p_tilde, cons);
      Matrix p_new = upd.apply(approx.p_tilde);
      approx.g_tilde = updated_gain(approx.g_tilde, p_new, upd, gamma);
      approx.p_tilde = std::move(p_new);
    } else {
      approx = qpi_b_approx(approx, run.v(), v_prev, run.tv(), t_prev, c_k, run.greedy() == pi_prev, gamma);
    }
    v_prev = run.v();
    t_prev = run.tv();
    pi_prev = run.greedy();

    const Vector& g = run.residual();
    const double excess = inf_norm(approx.g_tilde - Matrix::Identity(n, n));
    backtrack(run, approx.g_tilde * g - g, gamma_prime, excess);
  }
  return run.finish();
}

}  // namespace qpi
