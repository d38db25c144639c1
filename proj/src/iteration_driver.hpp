#pragma once

#include <chrono>

#include "qpi/classic.hpp"

namespace qpi::detail {

/// Bookkeeping shared by the model-based solvers: current iterate, its
/// Bellman image, the trace and the termination test.
class IterationDriver {
 public:
  IterationDriver(const Mdp& mdp, const ValueFunction& v0, const SolverConfig& cfg)
      : mdp_(mdp), cfg_(cfg), start_(std::chrono::steady_clock::now()) {
    cfg_.validate();
    if (v0.size() != mdp.n_states()) throw std::invalid_argument("initial value has wrong length");
    v_ = v0;
    bellman_ = bellman_apply(mdp_, v_);
    theta_ = bellman_.residual.lpNorm<Eigen::Infinity>();
    theta0_ = theta_;
    IterationRecord first;
    push(first);
  }

  const Mdp& mdp() const { return mdp_; }
  const SolverConfig& config() const { return cfg_; }
  const ValueFunction& v() const { return v_; }
  const ValueFunction& tv() const { return bellman_.tv; }
  /// v - T(v)
  const Vector& residual() const { return bellman_.residual; }
  const Policy& greedy() const { return bellman_.greedy; }
  double theta() const { return theta_; }
  double theta0() const { return theta0_; }
  int k() const { return k_; }

  bool finished() const { return theta_ <= cfg_.epsilon || k_ >= cfg_.max_iters; }

  /// Screens `candidate` with the safeguard when enabled and makes it v_{k+1}.
  bool advance(const ValueFunction& candidate, IterationRecord rec = {}) {
    if (cfg_.safeguard) {
      SafeguardOutcome out = safeguard_wrap(candidate, bellman_.tv, theta0_, k_, mdp_);
      rec.safeguard_activated = out.activated;
      accept(std::move(out.v), std::move(out.bellman), out.bellman_error, rec);
      return rec.safeguard_activated;
    }
    BellmanResult b = bellman_apply(mdp_, candidate);
    const double theta = b.residual.lpNorm<Eigen::Infinity>();
    accept(candidate, std::move(b), theta, rec);
    return false;
  }

  void accept(ValueFunction v, BellmanResult b, double theta, IterationRecord rec) {
    v_ = std::move(v);
    bellman_ = std::move(b);
    theta_ = theta;
    ++k_;
    push(rec);
  }

  SolveResult finish(bool converged) {
    SolveResult out;
    out.v = std::move(v_);
    out.policy = std::move(bellman_.greedy);
    out.trace = std::move(trace_);
    out.converged = converged;
    return out;
  }

  SolveResult finish() { return finish(theta_ <= cfg_.epsilon); }

 private:
  void push(IterationRecord rec) {
    rec.bellman_error = theta_;
    rec.elapsed_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count();
    trace_.push_back(rec);
  }

  const Mdp& mdp_;
  SolverConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  ValueFunction v_;
  BellmanResult bellman_;
  double theta_ = 0.0;
  double theta0_ = 0.0;
  int k_ = 0;
  IterationTrace trace_;
};

}  // namespace qpi::detail
