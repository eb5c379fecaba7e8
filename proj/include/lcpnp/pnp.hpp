#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "lcpnp/geometry.hpp"

namespace lcpnp {

/// N weighted 2D-3D correspondences. Layouts are flat: x and w interleave
/// (u, v) pairs, z interleaves (X, Y, Z) triplets. Weights act per image
/// axis and must be non-negative.
struct CorrespondenceSet {
  Eigen::VectorXd x;  // 2N image points, pixels
  Eigen::VectorXd z;  // 3N object points, scene units
  Eigen::VectorXd w;  // 2N non-negative weights
  CameraIntrinsics intrinsics;

  int size() const { return static_cast<int>(x.size()) / 2; }

  Eigen::Vector2d x_i(int i) const { return x.segment<2>(2 * i); }
  Eigen::Vector3d z_i(int i) const { return z.segment<3>(3 * i); }
  Eigen::Vector2d w_i(int i) const { return w.segment<2>(2 * i); }

  /// Throws InvalidArgument on inconsistent lengths or negative weights.
  void validate() const;

  /// Subset by correspondence index, in the given order.
  CorrespondenceSet subset(const std::vector<int>& indices) const;

  /// Same points with all weights set to one.
  CorrespondenceSet with_unit_weights() const;
};

struct SolverConfig {
  int max_iters = 100;
  double step_tol = 1e-10;       // relative gradient-norm stop
  double damping_init = 1e-6;    // initial Levenberg-Marquardt lambda
  std::optional<double> huber_delta;  // pixels; IRLS reweighting when set
};

/// Weighted reprojection NLL: 1/2 sum_i ||w_i o (x_i - pi(z_i, pose))||^2.
double nll(const CorrespondenceSet& corrs, const RigidPose& pose);

enum class SolveStatus { Converged, MaxIters };

struct SolveResult {
  RigidPose pose;
  int iters = 0;          // accepted Levenberg-Marquardt steps
  double final_nll = 0.0;
  SolveStatus status = SolveStatus::Converged;
};

/// Levenberg-Marquardt weighted PnP on the 6D local chart, re-anchoring the
/// reference at every accepted step. Requires N >= 4. Throws SingularHessian
/// on degenerate normal equations, NonPositiveDepth if the initial pose puts
/// a point behind the camera.
SolveResult solve_weighted(const CorrespondenceSet& corrs,
                           const RigidPose& init,
                           const SolverConfig& cfg = {});

struct RansacParams {
  int iters = 256;
  double inlier_px = 2.0;
  int min_set = 4;
  std::uint64_t seed = 0;
};

struct RansacResult {
  RigidPose pose;
  std::vector<bool> inlier_mask;
};

/// Unweighted RANSAC over 4-point samples, refined by solve_weighted with
/// unit weights on the consensus set. Throws NoConsensus when no sampled
/// model reaches 4 inliers.
RansacResult solve_ransac(const CorrespondenceSet& corrs,
                          const RansacParams& params = {});

}  // namespace lcpnp
