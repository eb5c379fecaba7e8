#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lcpnp/geometry.hpp"
#include "lcpnp/loss.hpp"
#include "lcpnp/pnp.hpp"

namespace lcpnp {

struct SceneConfig {
  int n_points = 64;
  Eigen::Vector3d bbox_half_extents{0.5, 0.4, 0.3};
  CameraIntrinsics intrinsics{600.0, 600.0, 320.0, 240.0};
  double noise_px = 1.0;
  double outlier_frac = 0.0;
  std::pair<double, double> depth_range{4.0, 8.0};
  std::uint64_t seed = 0;
};

struct SceneSample {
  CorrespondenceSet corrs;  // noisy x, unit weights
  RigidPose y_gt;
  std::array<Eigen::Vector3d, 8> bbox;
  std::vector<Eigen::Vector3d> model_points;
  std::vector<bool> outlier_mask;

  double diameter() const;  // bounding-box diagonal
};

/// Deterministic synthetic scene: object points uniform in the box, pose
/// with the object center inside the camera frustum at a depth in range,
/// Gaussian pixel noise plus uniform [20, 100] px displacements on an
/// outlier fraction. Throws FrustumFailure after 1000 pose rejections.
SceneSample gen_scene(const SceneConfig& cfg);

/// Fraction of correspondences with nonzero residual whose reprojection
/// error strictly decreases after the step x_i - step * g_i. Zero-residual
/// points leave the denominator; throws AllResidualsZero when none remain.
double gradient_correctness(const CorrespondenceSet& corrs,
                            const Eigen::VectorXd& grad_x,
                            const Eigen::VectorXd& x_p, double step);

enum class LossKind { LC, BPnPStyle, SurrogateOnly };

struct ClipConfig {
  int window = 100;
  double factor = 10.0;
};

struct TrainStep {
  double loss = 0.0;
  double correctness = 0.0;
  double rot_err_deg = 0.0;
  double trans_err = 0.0;
  double add = 0.0;
  bool solver_failure = false;
};

struct TrainTrace {
  std::vector<TrainStep> records;  // steps + 1, including the initial state
  CorrespondenceSet final_corrs;
};

/// Gradient descent treating the 2D locations and weights as free
/// parameters, isolating the loss comparison from any network. LC descends
/// the linear-covariance loss; BPnPStyle solves PnP and descends the
/// representation-space pose error with gradients through the solver
/// optimum; SurrogateOnly descends the L1 residual sum. Gradient norms are
/// capped at clip.factor times their running median. A solver failure is
/// recorded and the previous (clipped) gradient is reused.
TrainTrace toy_train(const SceneSample& scene, LossKind kind, int steps,
                     double lr, const ClipConfig& clip = {});

struct AveragingResult {
  std::array<double, 2> grads;
  std::array<bool, 2> correct;
};

/// Two-measurement averaging toy: loss |mean(a_hat) - a|. Reports the
/// subgradient on each estimate and whether a negative-gradient step
/// shrinks that estimate's own error.
AveragingResult averaging_demo(const std::array<double, 2>& a_hats, double a);

/// Empirical pose covariance: resample x = x_p + N(0, sigma^2) `samples`
/// times, solve from y_gt, accumulate local increments. Failed solves are
/// skipped and counted into *failures when given.
Matrix6d monte_carlo_pose_cov(const SceneSample& scene, double sigma_px,
                              int samples, std::uint64_t seed,
                              int* failures = nullptr);

struct AddMetrics {
  double add = 0.0;
  bool recall_ok = false;
};

/// ADD / ADD-S: mean (nearest for symmetric) distance between model points
/// under the two poses; recall_ok below 10% of the diameter.
AddMetrics add_metrics(const RigidPose& pred, const RigidPose& gt,
                       std::span<const Eigen::Vector3d> model_points,
                       double diameter, bool symmetric);

}  // namespace lcpnp
