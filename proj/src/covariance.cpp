#include "lcpnp/covariance.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <vector>

#include "lcpnp/errors.hpp"

namespace lcpnp {

Eigen::VectorXd residual_cov(const Eigen::VectorXd& r_gt,
                             const std::optional<HuberConfig>& huber) {
  Eigen::VectorXd m = r_gt.array().square();
  if (huber) {
    const double delta = huber->delta_for(
        std::vector<double>(r_gt.data(), r_gt.data() + r_gt.size()));
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      m[j] = huber_of_square(m[j], delta);
    }
  }
  return m;
}

Matrix6d pose_cov(const Eigen::MatrixXd& A, const Eigen::VectorXd& M_diag) {
  if (A.rows() != 6 || A.cols() != M_diag.size()) {
    throw InvalidArgument("pose_cov: dimension mismatch");
  }
  if ((M_diag.array() < 0.0).any()) {
    throw InvalidArgument("pose_cov: negative residual covariance entry");
  }
  Matrix6d C = A * M_diag.asDiagonal() * A.transpose();
  C = 0.5 * (C + C.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(C);
  const double emin = eig.eigenvalues().minCoeff();
  if (emin < -1e-10) {
    throw InvalidArgument("pose_cov: covariance not PSD beyond roundoff");
  }
  if (emin < 0.0) {
    C = eig.eigenvectors() *
        eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
        eig.eigenvectors().transpose();
    C = 0.5 * (C + C.transpose()).eval();
  }
  return C;
}

Eigen::VectorXd transform_cov_diag(const Matrix6d& C6,
                                   const Eigen::MatrixXd& J) {
  if (J.cols() != 6) throw InvalidArgument("transform_cov_diag: J must be Kx6");
  const Matrix6d S = 0.5 * (C6 + C6.transpose());
  const Eigen::Index K = J.rows();
  Eigen::VectorXd d(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    d[k] = std::max(J.row(k).dot(S * J.row(k).transpose()), 0.0);
  }
  return d;
}

Matrix6d prior_cov(const Matrix6d& H) {
  const Eigen::LDLT<Matrix6d> ldlt(0.5 * (H + H.transpose()));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw DegenerateHessian("prior_cov: Hessian not positive definite");
  }
  const Matrix6d inv = ldlt.solve(Matrix6d::Identity());
  if ((H * inv - Matrix6d::Identity()).norm() > 1e-8 * (1.0 + H.norm())) {
    throw DegenerateHessian("prior_cov: inverse residual too large");
  }
  return 0.5 * (inv + inv.transpose());
}

CovarianceResult covariances_for(const LinearizationResult& lin,
                                 const Eigen::MatrixXd& J_rep,
                                 const std::optional<HuberConfig>& huber) {
  CovarianceResult out;
  out.C6 = pose_cov(lin.A, residual_cov(lin.r_gt, huber));
  out.diagK = transform_cov_diag(out.C6, J_rep);
  out.prior_diagK = transform_cov_diag(prior_cov(lin.H), J_rep);
  return out;
}

}  // namespace lcpnp
