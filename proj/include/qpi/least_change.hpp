#pragma once

#include <stdexcept>
#include <vector>

#include "qpi/mdp.hpp"

namespace qpi {

/// Linear constraint P r = b on an n x n matrix P.
struct LinearConstraint {
  Vector r;
  Vector b;
};

/// A dependent constraint whose right-hand side disagrees with the retained ones.
class ConstraintConflict : public std::runtime_error {
 public:
  ConstraintConflict(const std::string& what, int index) : std::runtime_error(what), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

/// Low-rank correction P_new = P_prior + left * right^T; `retained` lists the
/// constraints that survived the dependence filter, in input order.
struct LeastChangeUpdate {
  Matrix left;
  Matrix right;
  std::vector<int> retained;

  int rank() const { return static_cast<int>(left.cols()); }
  Matrix apply(const Matrix& p_prior) const;
};

/**
 * Frobenius-nearest matrix to `p_prior` subject to P r_i = b_i.
 *
 * Constraints are orthogonalized in the given order (earlier ones win); a
 * column whose orthogonal remainder is below 1e-10 * ||R||_F is dropped as
 * dependent. Dropped constraints must already be satisfied by the result to
 * within 1e-8 * (1 + ||b_i||_inf), otherwise ConstraintConflict is thrown.
 */
LeastChangeUpdate least_change_update(const Matrix& p_prior, const std::vector<LinearConstraint>& constraints);

Matrix least_change_approx(const Matrix& p_prior, const std::vector<LinearConstraint>& constraints);

/// ||G (I - gamma P) - I||_F
double gain_residual(const Matrix& g, const Matrix& p, double gamma);

/// Dense (I - gamma P)^{-1}.
Matrix dense_gain(const Matrix& p, double gamma);

/**
 * Gain of P_prior + left * right^T from the prior gain by the Woodbury
 * identity. Falls back to a dense inverse when the result misses
 * G (I - gamma P_new) = I by more than 1e-8 in Frobenius norm.
 */
Matrix updated_gain(const Matrix& g_prior, const Matrix& p_new, const LeastChangeUpdate& update, double gamma);

}  // namespace qpi
