#pragma once

#include <Eigen/Core>
#include <optional>

#include "lcpnp/geometry.hpp"
#include "lcpnp/linearize.hpp"
#include "lcpnp/robust.hpp"

namespace lcpnp {

/// Diagonal of the residual covariance M: element-wise squared residuals,
/// Huber-capped when a config is supplied (adaptive threshold from the
/// residual magnitudes).
Eigen::VectorXd residual_cov(const Eigen::VectorXd& r_gt,
                             const std::optional<HuberConfig>& huber = {});

/// Pose covariance C = A diag(M) A^T. Symmetrized; eigenvalues in
/// [-1e-10, 0) are clamped to zero, anything lower throws InvalidArgument
/// (a PSD violation of that size is a logic error, not roundoff).
Matrix6d pose_cov(const Eigen::MatrixXd& A, const Eigen::VectorXd& M_diag);

/// diag(J C6 J^T) computed row by row in O(6^2 K); C6 is symmetrized first
/// and tiny negative outputs are clamped to zero.
Eigen::VectorXd transform_cov_diag(const Matrix6d& C6,
                                   const Eigen::MatrixXd& J);

/// Prior pose covariance: H^-1 via LDLT. Throws DegenerateHessian when the
/// factorization fails or the inverse does not reproduce the identity.
Matrix6d prior_cov(const Matrix6d& H);

struct CovarianceResult {
  Matrix6d C6;                  // pose covariance in the local chart
  Eigen::VectorXd diagK;        // diag of the representation-space covariance
  Eigen::VectorXd prior_diagK;  // diag of the transformed prior covariance
};

/// Convenience assembly of the full covariance picture for one scene.
CovarianceResult covariances_for(const LinearizationResult& lin,
                                 const Eigen::MatrixXd& J_rep,
                                 const std::optional<HuberConfig>& huber = {});

}  // namespace lcpnp
