// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

namespace flexi {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column i pairs with values(i)
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps rotate every (p, q) pair in row order until the off-diagonal
/// Frobenius norm drops below `tolerance * max(1, ||A||_F)`. Throws
/// NumericError after `max_sweeps` sweeps without convergence, and
/// DimensionMismatchError for non-square input. Only the upper triangle's
/// symmetric part is meaningful; the input is symmetrized first.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tolerance = 1e-10, int max_sweeps = 100);

/// Principal square root V diag(sqrt(max(lambda, 0))) V^T of a symmetric
/// positive semi-definite matrix; negative eigenvalues are clipped to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a);

}  // namespace flexi
