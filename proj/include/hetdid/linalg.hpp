#pragma once

#include <Eigen/Dense>

namespace hetdid::linalg {

// Singular values at or below kRankTolerance * sigma_max count as zero.
inline constexpr double kRankTolerance = 1e-10;

// Thin SVD truncated to the numerical rank: A ~= U * diag(sigma) * V'.
struct TruncatedSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd V;
  // Right singular vectors spanning the null space of A (columns).
  Eigen::MatrixXd null_space;
  int rank = 0;
};

TruncatedSvd truncated_svd(const Eigen::MatrixXd& A, double rel_tol = kRankTolerance);

// Moore-Penrose inverse via the truncated SVD.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& A, double rel_tol = kRankTolerance);
Eigen::MatrixXd pseudo_inverse(const TruncatedSvd& svd);

// I - A A^+, the orthogonal projector onto the orthocomplement of Im(A).
Eigen::MatrixXd complement_projector(const Eigen::MatrixXd& A,
                                     double rel_tol = kRankTolerance);
Eigen::MatrixXd complement_projector(const TruncatedSvd& svd, Eigen::Index rows);

}  // namespace hetdid::linalg
