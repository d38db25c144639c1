#pragma once

// Independent reference computations for the test suite. Nothing here calls
// into the library's solver or approximation code.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qpi/mdp.hpp"

namespace oracle {

using qpi::Matrix;
using qpi::Vector;

/// The 2-state, 2-action test model: action 0 moves to state 0, action 1 to
/// state 1; c(0,0)=1, c(0,1)=0, c(1,0)=0, c(1,1)=1.
inline qpi::Mdp m2(double gamma = 0.5) {
  Matrix k(4, 2);
  k << 1, 0,  //
      0, 1,   //
      1, 0,   //
      0, 1;
  Vector c(4);
  c << 1, 0, 0, 1;
  return qpi::Mdp(2, 2, gamma, c, k);
}

/// Dense random MDP from std::mt19937_64 and std::uniform_real_distribution,
/// deliberately not the library generator.
inline qpi::Mdp random_mdp(int n, int m, double gamma, std::uint64_t seed, double sparsity = 0.3) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix k(n * m, n);
  for (int r = 0; r < n * m; ++r) {
    for (int j = 0; j < n; ++j) k(r, j) = u(gen) < sparsity ? 0.0 : u(gen);
    k(r, static_cast<int>(u(gen) * n) % n) += 0.1;
    k.row(r) /= k.row(r).sum();
  }
  Vector c(n * m);
  for (int i = 0; i < n * m; ++i) c(i) = u(gen);
  return qpi::Mdp(n, m, gamma, c, k);
}

inline Vector random_vector(int n, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

inline Matrix random_stochastic(int n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) p(i, j) = u(gen);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/**
 * Frobenius-nearest P to `p0` with P * r_j = b_j for every column j of R,
 * by solving the full KKT system over vec(P) with a complete orthogonal
 * decomposition (minimum-norm solution, so dependent rows are harmless).
 */
inline Matrix kkt_least_change(const Matrix& p0, const Matrix& r, const Matrix& b) {
  const int n = static_cast<int>(p0.rows());
  const int k = static_cast<int>(r.cols());
  const int nv = n * n;
  const int nc = n * k;
  Matrix kkt = Matrix::Zero(nv + nc, nv + nc);
  Vector rhs = Vector::Zero(nv + nc);
  kkt.topLeftCorner(nv, nv).setIdentity();
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) rhs(i * n + l) = p0(i, l);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const int row = nv + i * k + j;
      for (int l = 0; l < n; ++l) {
        kkt(row, i * n + l) = r(l, j);
        kkt(i * n + l, row) = r(l, j);
      }
      rhs(row) = b(i, j);
    }
  }
  const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  Matrix p(n, n);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) p(i, l) = sol(i * n + l);
  return p;
}

/// Value of a deterministic policy by plain fixed-point iteration to 1e-13.
inline Vector iterate_policy_value(const qpi::Mdp& mdp, const qpi::Policy& pi) {
  const int n = mdp.n_states();
  Vector v = Vector::Zero(n);
  for (int it = 0; it < 100000; ++it) {
    Vector next(n);
    for (int s = 0; s < n; ++s) {
      double e = 0.0;
      for (int t = 0; t < n; ++t) e += mdp.prob(s, pi[s], t) * v(t);
      next(s) = mdp.cost(s, pi[s]) + mdp.gamma() * e;
    }
    const double diff = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    if (diff < 1e-14 * (1.0 + v.lpNorm<Eigen::Infinity>())) break;
  }
  return v;
}

/// Bellman operator written from its scalar definition.
inline Vector bellman(const qpi::Mdp& mdp, const Vector& v) {
  Vector out(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s) {
    double best = 0.0;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      double e = 0.0;
      for (int t = 0; t < mdp.n_states(); ++t) e += mdp.prob(s, a, t) * v(t);
      const double val = mdp.cost(s, a) + mdp.gamma() * e;
      if (a == 0 || val < best) best = val;
    }
    out(s) = best;
  }
  return out;
}

inline double inf_norm(const Matrix& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace oracle
