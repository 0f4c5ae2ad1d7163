#include "hetdid/linalg.hpp"

namespace hetdid::linalg {

TruncatedSvd truncated_svd(const Eigen::MatrixXd& A, double rel_tol) {
  TruncatedSvd out;
  const Eigen::Index n = A.cols();
  if (A.size() == 0) {
    out.U = Eigen::MatrixXd(A.rows(), 0);
    out.V = Eigen::MatrixXd(n, 0);
    out.null_space = Eigen::MatrixXd::Identity(n, n);
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV | Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  int r = 0;
  if (smax > 0.0) {
    while (r < s.size() && s(r) > rel_tol * smax) ++r;
  }
  out.rank = r;
  out.U = svd.matrixU().leftCols(r);
  out.sigma = s.head(r);
  out.V = svd.matrixV().leftCols(r);
  out.null_space = svd.matrixV().rightCols(n - r);
  return out;
}

Eigen::MatrixXd pseudo_inverse(const TruncatedSvd& svd) {
  return svd.V * svd.sigma.cwiseInverse().asDiagonal() * svd.U.transpose();
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& A, double rel_tol) {
  Eigen::MatrixXd p = pseudo_inverse(truncated_svd(A, rel_tol));
  if (p.rows() != A.cols() || p.cols() != A.rows()) p.setZero(A.cols(), A.rows());
  return p;
}

Eigen::MatrixXd complement_projector(const TruncatedSvd& svd, Eigen::Index rows) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(rows, rows);
  if (svd.rank > 0) P.noalias() -= svd.U * svd.U.transpose();
  return P;
}

Eigen::MatrixXd complement_projector(const Eigen::MatrixXd& A, double rel_tol) {
  return complement_projector(truncated_svd(A, rel_tol), A.rows());
}

}  // namespace hetdid::linalg
