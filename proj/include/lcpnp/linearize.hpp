#pragma once

#include <Eigen/Core>
#include <optional>

#include "lcpnp/geometry.hpp"
#include "lcpnp/pnp.hpp"
#include "lcpnp/robust.hpp"

namespace lcpnp {

/// First-order model of the weighted PnP solver around a linearization pose:
/// the solution seen from y_ref is the local increment A * r, with r the
/// residual against the perfect projections x_p.
struct LinearizationResult {
  Eigen::VectorXd x_p;   // 2N perfect projections at the anchor pose
  Eigen::VectorXd r_gt;  // 2N residuals x - x_p
  Matrix6d H;            // NLL Hessian in the local chart
  Eigen::MatrixXd A;     // 6 x 2N solver-sensitivity matrix
  RigidPose y_gt_ref;    // anchor pose (chart origin)
};

struct LinearizeOptions {
  std::optional<HuberConfig> huber;  // caps the squared weights in H and A
  double cond_max = 1e12;
};

/// Linearize the solver at the ground-truth pose with perfect
/// correspondences: x_p = pi(z, y_gt), H = sum J_i^T diag(w_i^2) J_i, and
/// A's column pair for point i is H^-1 J_i^T diag(w_i^2). The 3D points are
/// constants here. Throws DegenerateHessian when cond(H) >= cond_max and
/// NonPositiveDepth if a point lies behind the camera at y_gt.
LinearizationResult linearize_at_gt(const CorrespondenceSet& corrs,
                                    const RigidPose& y_gt,
                                    const LinearizeOptions& opts = {});

/// Linear-model prediction of the solver output: the increment A * r_gt
/// anchored at y_gt in the local chart.
LocalPose6 predict_pose_linear(const LinearizationResult& lin);

}  // namespace lcpnp
