#include "qpi/classic.hpp"

#include <cmath>

#include "iteration_driver.hpp"

namespace qpi {

void SolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("SolverConfig: epsilon must be positive");
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be at least 1");
}

SafeguardOutcome safeguard_wrap(const ValueFunction& candidate, const ValueFunction& t_k, double theta_0, int k,
                                const Mdp& mdp) {
  SafeguardOutcome out;
  out.bellman = bellman_apply(mdp, candidate);
  out.bellman_error = out.bellman.residual.lpNorm<Eigen::Infinity>();
  const double bound = std::pow(mdp.gamma(), k + 1) * theta_0;
  if (std::isfinite(out.bellman_error) && out.bellman_error <= bound) {
    out.v = candidate;
    return out;
  }
  out.activated = true;
  out.v = t_k;
  out.bellman = bellman_apply(mdp, t_k);
  out.bellman_error = out.bellman.residual.lpNorm<Eigen::Infinity>();
  return out;
}

SolveResult vi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg) {
  SolverConfig plain = cfg;
  plain.safeguard = false;  // the VI step is its own fallback
  detail::IterationDriver run(mdp, v0, plain);
  while (!run.finished()) run.advance(run.tv());
  return run.finish();
}

SolveResult pi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg) {
  SolverConfig plain = cfg;
  plain.safeguard = false;
  detail::IterationDriver run(mdp, v0, plain);
  bool stable = false;
  while (!stable && !run.finished()) {
    const Policy previous = run.greedy();
    run.advance(policy_evaluation(mdp, previous).value);
    stable = run.greedy() == previous;
  }
  return run.finish(stable || run.theta() <= cfg.epsilon);
}

SolveResult nvi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg) {
  const double gamma = mdp.gamma();
  const double momentum = (1.0 - std::sqrt(1.0 - gamma * gamma)) / gamma;
  detail::IterationDriver run(mdp, v0, cfg);
  ValueFunction previous = v0;
  while (!run.finished()) {
    const ValueFunction current = run.v();
    const ValueFunction y = current + momentum * (current - previous);
    const ValueFunction ty = bellman_apply(mdp, y).tv;
    run.advance(y - (y - ty) / (1.0 + gamma));
    previous = current;
  }
  return run.finish();
}

SolveResult avi_solve(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg) {
  detail::IterationDriver run(mdp, v0, cfg);
  ValueFunction previous = v0;
  ValueFunction t_previous = run.tv();
  while (!run.finished()) {
    const ValueFunction current = run.v();
    const ValueFunction t_current = run.tv();
    const Vector y = current - previous;
    const Vector z = t_current - t_previous;
    const double numerator = y.dot(current - t_current);
    const double denominator = y.dot(y - z);
    const double delta = negligible(denominator, numerator) ? 0.0 : numerator / denominator;
    run.advance((1.0 - delta) * t_current + delta * t_previous);
    previous = current;
    t_previous = t_current;
  }
  return run.finish();
}

}  // namespace qpi
