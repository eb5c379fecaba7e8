#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>

namespace lcpnp {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Depth below which a point counts as behind the camera.
inline constexpr double kDepthEps = 1e-6;

/// Pinhole camera, pixels. No distortion model.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Rigid transform taking object-frame points into the camera frame:
/// p_cam = rotation * p_obj + translation.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidPose Identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  /// Frobenius departure from orthonormality, ||R^T R - I||.
  double orthonormality_error() const;
};

/// Minimal 6-parameter pose increment anchored at a reference pose. The
/// rotation increment acts on the left: R = exp([omega]x) * reference.R,
/// t = reference.t + tau. The 6-vector order is [omega; tau].
struct LocalPose6 {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d tau = Eigen::Vector3d::Zero();
  RigidPose reference;

  RigidPose compose() const;

  Vector6d vector() const {
    Vector6d v;
    v << omega, tau;
    return v;
  }

  static LocalPose6 from_vector(const Vector6d& v, const RigidPose& ref) {
    return {v.head<3>(), v.tail<3>(), ref};
  }

  /// Zero increment anchored at ref (equal to ref itself).
  static LocalPose6 identity_at(const RigidPose& ref) {
    return {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), ref};
  }
};

/// Difference pose - ref expressed in ref's local chart. Throws
/// NearPiRotation when the relative rotation angle is within 1e-6 of pi.
LocalPose6 pose_difference(const RigidPose& pose, const RigidPose& ref);

enum class RepKind {
  Corners3D,       // K = 24: camera-frame bounding-box corners
  Corners2D,       // K = 16: projected bounding-box corners
  QuaternionTrans, // K = 7:  unit quaternion (w,x,y,z) + translation
  AxisAngleTrans,  // K = 6:  axis-angle + translation
  TwoColumnTrans,  // K = 9:  first two rotation columns + translation
};

/// Target representation y^K = f(y^6) used by the loss. Corner kinds need
/// the bounding box; Corners2D additionally needs the camera.
struct PoseRepresentation {
  RepKind kind = RepKind::Corners3D;
  std::optional<std::array<Eigen::Vector3d, 8>> bbox;
  std::optional<CameraIntrinsics> intrinsics;

  int dim() const;
  /// Size of the groups the loss reduces over: 3 for 3D corners, 2 for 2D
  /// corners, the whole vector otherwise.
  int group_size() const;

  static PoseRepresentation corners3d(const std::array<Eigen::Vector3d, 8>& b);
  static PoseRepresentation corners2d(const std::array<Eigen::Vector3d, 8>& b,
                                      const CameraIntrinsics& K);
};

/// Corners of the axis-aligned box [-h, h]^3 in binary order of the
/// (x, y, z) min/max flags: index bit 2 -> x, bit 1 -> y, bit 0 -> z,
/// flag 0 = -h, flag 1 = +h.
std::array<Eigen::Vector3d, 8> box_corners(const Eigen::Vector3d& half_extents);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Rodrigues exponential; always returns an orthonormal matrix.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega);

/// Inverse of exp_so3 on rotations with angle < pi - 1e-6; throws
/// NearPiRotation beyond that.
Eigen::Vector3d log_so3(const Eigen::Matrix3d& R);

/// Left Jacobian of SO(3): exp(omega + d) = exp(Jl(omega) d) * exp(omega)
/// to first order.
Eigen::Matrix3d left_jacobian_so3(const Eigen::Vector3d& omega);

struct Projection {
  Eigen::Vector2d uv;
  Eigen::Matrix<double, 2, 6> J_pose;   // d(uv)/d[omega; tau] at the pose
  Eigen::Matrix<double, 2, 3> J_point;  // d(uv)/dz
};

/// Perspective projection of object point z under pose, with analytic
/// Jacobians w.r.t. the local pose increment (anchored at `pose`) and the
/// 3D point. Throws NonPositiveDepth for depth <= kDepthEps.
Projection project(const Eigen::Vector3d& z, const RigidPose& pose,
                   const CameraIntrinsics& K);

/// Projection value only (same depth check, no Jacobians).
Eigen::Vector2d project_uv(const Eigen::Vector3d& z, const RigidPose& pose,
                           const CameraIntrinsics& K);

struct Represented {
  Eigen::VectorXd y;  // K
  Eigen::MatrixXd J;  // K x 6, d y / d [omega; tau]
};

/// Evaluate the representation map and its Jacobian at the given local pose.
/// The Jacobian is exact (forward-mode differentiation of the same code
/// path that produces y).
Represented represent(const LocalPose6& pose, const PoseRepresentation& rep);

}  // namespace lcpnp
