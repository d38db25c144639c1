#include "qpi/least_change.hpp"

#include <sstream>

namespace qpi {

Matrix LeastChangeUpdate::apply(const Matrix& p_prior) const {
  if (left.cols() == 0) return p_prior;
  return p_prior + left * right.transpose();
}

LeastChangeUpdate least_change_update(const Matrix& p_prior, const std::vector<LinearConstraint>& constraints) {
  const Eigen::Index n = p_prior.rows();
  if (p_prior.cols() != n) throw std::invalid_argument("least_change: prior must be square");
  for (const auto& c : constraints)
    if (c.r.size() != n || c.b.size() != n) throw std::invalid_argument("least_change: constraint has wrong length");

  double frob_sq = 0.0;
  for (const auto& c : constraints) frob_sq += c.r.squaredNorm();
  const double drop_tol = 1e-10 * std::sqrt(frob_sq);

  // Modified Gram-Schmidt with one re-orthogonalization pass; R_kept = Q * tri.
  const int j = static_cast<int>(constraints.size());
  Matrix q(n, j);
  Matrix tri = Matrix::Zero(j, j);
  LeastChangeUpdate out;
  for (int i = 0; i < j; ++i) {
    Vector rem = constraints[i].r;
    const int kept = static_cast<int>(out.retained.size());
    Vector coeff = Vector::Zero(kept);
    for (int pass = 0; pass < 2; ++pass) {
      for (int col = 0; col < kept; ++col) {
        const double h = q.col(col).dot(rem);
        rem -= h * q.col(col);
        coeff(col) += h;
      }
    }
    const double norm = rem.norm();
    if (norm <= drop_tol || norm == 0.0) continue;
    q.col(kept) = rem / norm;
    tri.block(0, kept, kept, 1) = coeff;
    tri(kept, kept) = norm;
    out.retained.push_back(i);
  }

  const int r = static_cast<int>(out.retained.size());
  Matrix rk(n, r);
  Matrix bk(n, r);
  for (int col = 0; col < r; ++col) {
    rk.col(col) = constraints[out.retained[col]].r;
    bk.col(col) = constraints[out.retained[col]].b;
  }
  // (B - P R)(R^T R)^{-1} R^T = (B - P R) tri^{-1} Q^T
  const Matrix residual = bk - p_prior * rk;
  const auto upper = tri.topLeftCorner(r, r).triangularView<Eigen::Upper>();
  out.left = upper.transpose().solve(residual.transpose()).transpose();
  out.right = q.leftCols(r);

  if (static_cast<int>(out.retained.size()) < j) {
    const Matrix p_new = out.apply(p_prior);
    for (int i = 0, next = 0; i < j; ++i) {
      if (next < r && out.retained[next] == i) {
        ++next;
        continue;
      }
      const auto& c = constraints[i];
      const double miss = (p_new * c.r - c.b).lpNorm<Eigen::Infinity>();
      if (miss > 1e-8 * (1.0 + c.b.lpNorm<Eigen::Infinity>())) {
        std::ostringstream msg;
        msg << "least_change: dependent constraint " << i << " is inconsistent (miss " << miss << ")";
        throw ConstraintConflict(msg.str(), i);
      }
    }
  }
  return out;
}

Matrix least_change_approx(const Matrix& p_prior, const std::vector<LinearConstraint>& constraints) {
  return least_change_update(p_prior, constraints).apply(p_prior);
}

double gain_residual(const Matrix& g, const Matrix& p, double gamma) {
  const Eigen::Index n = p.rows();
  return (g * (Matrix::Identity(n, n) - gamma * p) - Matrix::Identity(n, n)).norm();
}

Matrix dense_gain(const Matrix& p, double gamma) {
  const Eigen::Index n = p.rows();
  return (Matrix::Identity(n, n) - gamma * p).partialPivLu().inverse();
}

Matrix updated_gain(const Matrix& g_prior, const Matrix& p_new, const LeastChangeUpdate& update, double gamma) {
  if (update.rank() == 0) return g_prior;
  // I - gamma P_new = H - gamma L R^T with H^{-1} = G:
  // G_new = G + G L (I - gamma R^T G L)^{-1} gamma R^T G
  const Matrix gl = g_prior * update.left;
  const Matrix rg = update.right.transpose() * g_prior;
  const int r = update.rank();
  const Matrix capacitance = Matrix::Identity(r, r) - gamma * update.right.transpose() * gl;
  Eigen::FullPivLU<Matrix> lu(capacitance);
  if (lu.isInvertible()) {
    Matrix g_new = g_prior + gl * lu.solve(gamma * rg);
    if (g_new.allFinite() && gain_residual(g_new, p_new, gamma) <= 1e-8) return g_new;
  }
  return dense_gain(p_new, gamma);
}

}  // namespace qpi
