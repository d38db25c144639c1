#include "qpi/learning.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace qpi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_rates(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("learning rate alpha_k must lie in (0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("correction weight beta_k must lie in [0, 1]");
}

double one_over_k(int k) { return 1.0 / (k + 1.0); }

// q + alpha (t - q), written exactly as the QL update so that a zero
// correction reproduces QL bit for bit.
QFunction relaxed(const QFunction& q, const QFunction& t, double alpha) { return q - alpha * (q - t); }

QplStep finish_qpl(const Mdp& mdp, const QFunction& q_k, const QFunction& t_hat, Vector correction, double alpha,
                   double beta) {
  QplStep out;
  out.correction = std::move(correction);
  out.clipped = clip_inf(out.correction, clip_bound(mdp));
  out.q_next = relaxed(q_k, t_hat, alpha);
  const double weight = alpha * beta;
  if (weight != 0.0) out.q_next += weight * out.clipped;
  return out;
}

}  // namespace

LearningSchedule LearningSchedule::standard() { return {preset("one_over_k"), preset("slow_pow")}; }

RateFn LearningSchedule::preset(const std::string& name) {
  if (name == "one_over_k") return one_over_k;
  if (name == "slow_pow") return [](int k) { return 1.0 / std::pow(k + 1.0, 0.1); };
  if (name == "zero") return [](int) { return 0.0; };
  throw std::invalid_argument("unknown learning-rate preset '" + name + "'");
}

double clip_bound(const Mdp& mdp) {
  const double gamma = mdp.gamma();
  return 2.0 * gamma * mdp.cost().lpNorm<Eigen::Infinity>() / ((1.0 - gamma) * (1.0 - gamma));
}

Vector clip_inf(const Vector& p, double bound) {
  const double norm = p.lpNorm<Eigen::Infinity>();
  if (norm <= bound) return p;
  // Rounding in the scale factor must not push an entry past the bound.
  return (p * (bound / norm)).cwiseMax(-bound).cwiseMin(bound);
}

QplStep qpl_step_detailed(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                          const std::vector<int>& next_states) {
  const double alpha = sched.alpha(k);
  const double beta = sched.beta(k);
  check_rates(alpha, beta);
  const double gamma = mdp.gamma();
  const double pairs = mdp.n_pairs();
  const Vector& c = mdp.cost();

  const QFunction t_hat = sampled_bellman_apply(mdp, q_k, next_states);
  const Vector z = c.array() - c.mean();
  const Vector g_hat = q_k - t_hat;
  const Vector y = g_hat.array() - g_hat.mean();
  const Vector u = q_k.array() - q_k.mean();

  double delta = 0.0;
  if (!negligible(u.squaredNorm(), q_k.squaredNorm())) {
    const double denominator = u.dot(y + z);
    if (!negligible(denominator, u.norm() * (y + z).norm())) delta = u.dot(y) / denominator;
  }
  const double lambda = gamma / (pairs * (1.0 - gamma)) * ((delta - 1.0) * g_hat + delta * c).sum();
  Vector correction = delta * (c - t_hat) + Vector::Constant(mdp.n_pairs(), lambda);

  QplStep out = finish_qpl(mdp, q_k, t_hat, std::move(correction), alpha, beta);
  out.delta = delta;
  out.lambda = lambda;
  return out;
}

QFunction qpl_step(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched, Rng& rng) {
  if (q_k.size() != mdp.n_pairs()) throw std::invalid_argument("Q-function has wrong length");
  return qpl_step_detailed(mdp, q_k, k, sched, draw_next_states(mdp, rng)).q_next;
}

PriorState state_action_random_policy_prior(const Mdp& mdp) {
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  Matrix p(mdp.n_pairs(), mdp.n_pairs());
  for (int row = 0; row < mdp.n_pairs(); ++row)
    for (int t = 0; t < n; ++t)
      for (int a = 0; a < m; ++a) p(row, t * m + a) = mdp.kernel()(row, t) / m;
  return PriorState::fixed(std::move(p), mdp.gamma());
}

QplStep qpl_step_generic(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                         const PriorState& prior, const std::vector<int>& next_states) {
  const double alpha = sched.alpha(k);
  const double beta = sched.beta(k);
  check_rates(alpha, beta);
  const QFunction t_hat = sampled_bellman_apply(mdp, q_k, next_states);
  const QpiStepArtifacts art = rank_one_gain(q_k, t_hat, mdp.cost(), prior, mdp.gamma());
  const Vector g_hat = q_k - t_hat;
  // (G_tilde - I)(t_hat - q) = g_hat - G_tilde g_hat
  return finish_qpl(mdp, q_k, t_hat, g_hat - apply_gain(art, prior, g_hat), alpha, beta);
}

QplStep qpl_step_async(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                       const Transition& sample) {
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  if (q_k.size() != mdp.n_pairs()) throw std::invalid_argument("Q-function has wrong length");
  if (sample.s < 0 || sample.s >= n || sample.a < 0 || sample.a >= m || sample.s_next < 0 || sample.s_next >= n)
    throw std::invalid_argument("qpl_step_async: sample indices out of range");
  const double alpha = sched.alpha(k);
  const double beta = sched.beta(k);
  check_rates(alpha, beta);

  const double gamma = mdp.gamma();
  const double pairs = mdp.n_pairs();
  const int idx = mdp.index(sample.s, sample.a);
  const double t_hat = sample.cost + gamma * q_k.segment(sample.s_next * m, m).minCoeff();
  const double tau = t_hat - q_k(idx);
  const double rho = q_k.mean();
  const double lambda = (t_hat - sample.cost - gamma * rho) * (q_k(idx) - rho);
  // ||q||^2 - nm rho^2 = ||q - rho 1||^2, evaluated without cancellation.
  const double eta = (q_k.array() - rho).matrix().squaredNorm() - lambda;
  const double delta = negligible(eta, q_k.squaredNorm()) ? 0.0 : lambda / eta;

  QplStep out;
  out.delta = delta;
  out.lambda = lambda;
  out.correction = Vector::Constant(mdp.n_pairs(), tau * gamma * (1.0 + delta) / (pairs * (1.0 - gamma)));
  out.correction(idx) += tau * delta;
  out.clipped = clip_inf(out.correction, clip_bound(mdp));
  out.q_next = q_k;
  out.q_next(idx) += alpha * tau;
  const double weight = alpha * beta;
  if (weight != 0.0) out.q_next += weight * out.clipped;
  return out;
}

QFunction ql_step(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched,
                  const std::vector<int>& next_states) {
  const double alpha = sched.alpha(k);
  check_rates(alpha, 0.0);
  return relaxed(q_k, sampled_bellman_apply(mdp, q_k, next_states), alpha);
}

QFunction ql_step(const Mdp& mdp, const QFunction& q_k, int k, const LearningSchedule& sched, Rng& rng) {
  if (q_k.size() != mdp.n_pairs()) throw std::invalid_argument("Q-function has wrong length");
  return ql_step(mdp, q_k, k, sched, draw_next_states(mdp, rng));
}

QFunction sql_step(const Mdp& mdp, const QFunction& q_k, const QFunction& q_km1, int k,
                   const std::vector<int>& next_states) {
  const double alpha = one_over_k(k);
  const QFunction t_k = sampled_bellman_apply(mdp, q_k, next_states);
  const QFunction t_km1 = sampled_bellman_apply(mdp, q_km1, next_states);
  return q_k - alpha * (q_k - t_km1) + (1.0 - alpha) * (t_k - t_km1);
}

QFunction sql_step(const Mdp& mdp, const QFunction& q_k, const QFunction& q_km1, int k, Rng& rng) {
  if (q_k.size() != mdp.n_pairs()) throw std::invalid_argument("Q-function has wrong length");
  return sql_step(mdp, q_k, q_km1, k, draw_next_states(mdp, rng));
}

Matrix sampled_transition_matrix(const Mdp& mdp, const QFunction& q, const std::vector<int>& next_states) {
  const Policy pi = q_greedy_policy(q, mdp.n_states(), mdp.n_actions());
  if (static_cast<int>(next_states.size()) != mdp.n_pairs())
    throw std::invalid_argument("need one sampled next state per state-action pair");
  Matrix p = Matrix::Zero(mdp.n_pairs(), mdp.n_pairs());
  for (int row = 0; row < mdp.n_pairs(); ++row) {
    const int s_next = next_states[row];
    p(row, mdp.index(s_next, pi[s_next])) = 1.0;
  }
  return p;
}

ZqlStep zql_step(const Mdp& mdp, const QFunction& q_k, const Matrix& d_km1, int k,
                 const std::vector<int>& next_states) {
  const int pairs = mdp.n_pairs();
  if (d_km1.rows() != pairs || d_km1.cols() != pairs) throw std::invalid_argument("zql_step: D has wrong shape");
  const double rate = one_over_k(k);
  const QFunction t_hat = sampled_bellman_apply(mdp, q_k, next_states);
  const Matrix p_hat = sampled_transition_matrix(mdp, q_k, next_states);

  ZqlStep out;
  out.d = (1.0 - rate) * d_km1 + rate * (Matrix::Identity(pairs, pairs) - mdp.gamma() * p_hat);
  const Vector rhs = q_k - t_hat;
  Eigen::PartialPivLU<Matrix> lu(out.d);
  Vector step = lu.solve(rhs);
  if (!(lu.rcond() > 1e-14) || !step.allFinite()) {
    out.regularized = true;
    step = (out.d + 1e-10 * Matrix::Identity(pairs, pairs)).partialPivLu().solve(rhs);
  }
  out.q_next = q_k - rate * step;
  return out;
}

ZqlStep zql_step(const Mdp& mdp, const QFunction& q_k, const Matrix& d_km1, int k, Rng& rng) {
  if (q_k.size() != mdp.n_pairs()) throw std::invalid_argument("Q-function has wrong length");
  return zql_step(mdp, q_k, d_km1, k, draw_next_states(mdp, rng));
}

MfAlgorithm mf_algorithm_from_name(const std::string& name) {
  if (name == "ql") return MfAlgorithm::Ql;
  if (name == "sql") return MfAlgorithm::Sql;
  if (name == "zql") return MfAlgorithm::Zql;
  if (name == "qpl") return MfAlgorithm::Qpl;
  if (name == "qpl-async") return MfAlgorithm::QplAsync;
  if (name == "qpl-mu") return MfAlgorithm::QplMu;
  throw std::invalid_argument("unknown model-free algorithm '" + name + "'");
}

std::string mf_algorithm_name(MfAlgorithm algo) {
  switch (algo) {
    case MfAlgorithm::Ql: return "ql";
    case MfAlgorithm::Sql: return "sql";
    case MfAlgorithm::Zql: return "zql";
    case MfAlgorithm::Qpl: return "qpl";
    case MfAlgorithm::QplAsync: return "qpl-async";
    case MfAlgorithm::QplMu: return "qpl-mu";
  }
  return "unknown";
}

double MfResult::mean_algorithm_seconds() const {
  double total = 0.0;
  for (const auto& r : runs) total += r.algorithm_seconds;
  return runs.empty() ? 0.0 : total / runs.size();
}

double MfResult::mean_sampling_seconds() const {
  double total = 0.0;
  for (const auto& r : runs) total += r.sampling_seconds;
  return runs.empty() ? 0.0 : total / runs.size();
}

MfRunSummary mf_run(const Mdp& mdp, MfAlgorithm algo, const QFunction& q0, int iterations,
                    const LearningSchedule& sched, std::uint64_t seed) {
  if (q0.size() != mdp.n_pairs()) throw std::invalid_argument("initial Q-function has wrong length");
  if (iterations < 0) throw std::invalid_argument("iteration count must be non-negative");

  const int m = mdp.n_actions();
  Rng rng(seed);
  MfRunSummary out;
  out.error.reserve(iterations + 1);
  out.error.push_back(q_bellman_error(mdp, q0));
  out.elapsed_ns.reserve(iterations + 1);
  out.elapsed_ns.push_back(0);

  QFunction q = q0;
  QFunction q_prev = q0;
  Matrix d;
  if (algo == MfAlgorithm::Zql) d = Matrix::Zero(mdp.n_pairs(), mdp.n_pairs());
  PriorState prior;
  if (algo == MfAlgorithm::QplMu) prior = state_action_random_policy_prior(mdp);

  for (int k = 0; k < iterations; ++k) {
    auto t0 = Clock::now();
    const std::vector<int> next = draw_next_states(mdp, rng);
    out.sampling_seconds += seconds_since(t0);

    t0 = Clock::now();
    QFunction q_next;
    switch (algo) {
      case MfAlgorithm::Ql:
        q_next = ql_step(mdp, q, k, sched, next);
        break;
      case MfAlgorithm::Sql:
        q_next = sql_step(mdp, q, q_prev, k, next);
        break;
      case MfAlgorithm::Zql: {
        ZqlStep step = zql_step(mdp, q, d, k, next);
        if (step.regularized) ++out.regularized_steps;
        d = std::move(step.d);
        q_next = std::move(step.q_next);
        break;
      }
      case MfAlgorithm::Qpl: {
        QplStep step = qpl_step_detailed(mdp, q, k, sched, next);
        out.max_clip_norm = std::max(out.max_clip_norm, step.clipped.lpNorm<Eigen::Infinity>());
        q_next = std::move(step.q_next);
        break;
      }
      case MfAlgorithm::QplMu: {
        QplStep step = qpl_step_generic(mdp, q, k, sched, prior, next);
        out.max_clip_norm = std::max(out.max_clip_norm, step.clipped.lpNorm<Eigen::Infinity>());
        q_next = std::move(step.q_next);
        break;
      }
      case MfAlgorithm::QplAsync: {
        // One sweep over all pairs in index order, one sample each.
        q_next = q;
        for (int row = 0; row < mdp.n_pairs(); ++row) {
          const Transition sample{row / m, row % m, next[row], mdp.cost()(row)};
          QplStep step = qpl_step_async(mdp, q_next, k, sched, sample);
          out.max_clip_norm = std::max(out.max_clip_norm, step.clipped.lpNorm<Eigen::Infinity>());
          q_next = std::move(step.q_next);
        }
        break;
      }
    }
    out.algorithm_seconds += seconds_since(t0);
    out.elapsed_ns.push_back(static_cast<std::int64_t>(out.algorithm_seconds * 1e9));

    q_prev = std::move(q);
    q = std::move(q_next);
    out.error.push_back(q_bellman_error(mdp, q));
  }
  return out;
}

MfResult mf_solve(const Mdp& mdp, MfAlgorithm algo, const QFunction& q0, int iterations,
                  const LearningSchedule& sched, std::uint64_t seed, int runs, int threads) {
  if (runs < 1) throw std::invalid_argument("mf_solve: runs must be at least 1");
  MfResult out;
  out.clip_bound = clip_bound(mdp);
  out.runs.resize(runs);

  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, runs);
  std::atomic<int> next_run{0};
  std::vector<std::exception_ptr> failures(workers);
  auto work = [&](int worker) {
    try {
      for (int r = next_run++; r < runs; r = next_run++)
        out.runs[r] = mf_run(mdp, algo, q0, iterations, sched, seed + static_cast<std::uint64_t>(r));
    } catch (...) {
      failures[worker] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  out.mean_error.assign(iterations + 1, 0.0);
  out.mean_elapsed_ns.assign(iterations + 1, 0);
  for (const auto& r : out.runs) {
    for (int k = 0; k <= iterations; ++k) {
      out.mean_error[k] += r.error[k];
      out.mean_elapsed_ns[k] += r.elapsed_ns[k];
    }
  }
  for (double& e : out.mean_error) e /= runs;
  for (auto& t : out.mean_elapsed_ns) t /= runs;
  return out;
}

}  // namespace qpi
