#include "lcpnp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lcpnp/dual.hpp"
#include "lcpnp/errors.hpp"

namespace lcpnp {

namespace {

using std::atan2;
using std::cos;
using std::log;
using std::sin;
using std::sqrt;

template <class T>
using Mat3 = Eigen::Matrix<T, 3, 3>;
template <class T>
using Vec3 = Eigen::Matrix<T, 3, 1>;

template <class T>
Mat3<T> skew_t(const Vec3<T>& v) {
  Mat3<T> m;
  m << T(0.0), -v.z(), v.y(),  //
      v.z(), T(0.0), -v.x(),   //
      -v.y(), v.x(), T(0.0);
  return m;
}

template <class T>
Mat3<T> exp_so3_t(const Vec3<T>& w) {
  const T theta2 = w.squaredNorm();
  const Mat3<T> W = skew_t(w);
  T a, b;  // R = I + a*W + b*W^2
  if (value(theta2) < 1e-16) {
    // Series around zero keeps the derivative exact through the branch.
    a = T(1.0) - theta2 / 6.0;
    b = T(0.5) - theta2 / 24.0;
  } else {
    const T theta = sqrt(theta2);
    a = sin(theta) / theta;
    b = (T(1.0) - cos(theta)) / theta2;
  }
  return Mat3<T>::Identity() + a * W + b * (W * W);
}

// Quaternion (w,x,y,z) from a rotation matrix, Shepperd-style branch on the
// largest diagonal combination, canonicalized to w >= 0.
template <class T>
Eigen::Matrix<T, 4, 1> quat_from_rot(const Mat3<T>& R) {
  Eigen::Matrix<T, 4, 1> q;
  const T tr = R(0, 0) + R(1, 1) + R(2, 2);
  if (value(tr) > 0.0) {
    T s = sqrt(tr + 1.0) * 2.0;
    q << s / 4.0, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s,
        (R(1, 0) - R(0, 1)) / s;
  } else if (value(R(0, 0)) > value(R(1, 1)) &&
             value(R(0, 0)) > value(R(2, 2))) {
    T s = sqrt(T(1.0) + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q << (R(2, 1) - R(1, 2)) / s, s / 4.0, (R(0, 1) + R(1, 0)) / s,
        (R(0, 2) + R(2, 0)) / s;
  } else if (value(R(1, 1)) > value(R(2, 2))) {
    T s = sqrt(T(1.0) + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    q << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, s / 4.0,
        (R(1, 2) + R(2, 1)) / s;
  } else {
    T s = sqrt(T(1.0) + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    q << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s,
        (R(1, 2) + R(2, 1)) / s, s / 4.0;
  }
  if (value(q(0)) < 0.0) q = -q;
  return q;
}

template <class T>
Vec3<T> log_so3_t(const Mat3<T>& R) {
  const T tr = R(0, 0) + R(1, 1) + R(2, 2);
  Vec3<T> axis_2sin;  // (R - R^T)^vee = 2 sin(theta) * axis
  axis_2sin << R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1);
  const double ctheta = std::clamp((value(tr) - 1.0) / 2.0, -1.0, 1.0);
  const double theta_v = std::acos(ctheta);
  if (theta_v >= std::numbers::pi - 1e-6) {
    throw NearPiRotation("log_so3: rotation angle within 1e-6 of pi");
  }
  if (theta_v < 1e-8) {
    // theta/(2 sin theta) ~ 1/2 + theta^2/12
    const T s2 = axis_2sin.squaredNorm();  // ~ 4 theta^2
    return (T(0.5) + s2 / 48.0) * axis_2sin;
  }
  const T cos_theta = (tr - 1.0) / 2.0;
  const T sin_theta = sqrt(T(1.0) - cos_theta * cos_theta);
  const T theta = atan2(sin_theta, cos_theta);
  return (theta / (T(2.0) * sin_theta)) * axis_2sin;
}

template <class T>
Eigen::Matrix<T, 2, 1> pinhole(const Vec3<T>& p, const CameraIntrinsics& K) {
  if (value(p.z()) <= kDepthEps) {
    throw NonPositiveDepth("projection: point depth <= depth_eps");
  }
  Eigen::Matrix<T, 2, 1> uv;
  uv << K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy;
  return uv;
}

// Representation map evaluated at a local increment (omega, tau) around the
// reference pose. Templated so the public represent() can seed duals on the
// six chart coordinates and read exact Jacobian columns.
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, 1> rep_eval(const Vec3<T>& omega,
                                             const Vec3<T>& tau,
                                             const RigidPose& ref,
                                             const PoseRepresentation& rep) {
  const Mat3<T> R = exp_so3_t<T>(omega) * ref.rotation.cast<T>();
  const Vec3<T> t = ref.translation.cast<T>() + tau;
  Eigen::Matrix<T, Eigen::Dynamic, 1> y(rep.dim());
  switch (rep.kind) {
    case RepKind::Corners3D: {
      if (!rep.bbox) throw MissingBBox("Corners3D requires a bounding box");
      for (int i = 0; i < 8; ++i) {
        y.template segment<3>(3 * i) = R * (*rep.bbox)[i].cast<T>() + t;
      }
      break;
    }
    case RepKind::Corners2D: {
      if (!rep.bbox) throw MissingBBox("Corners2D requires a bounding box");
      if (!rep.intrinsics) {
        throw InvalidArgument("Corners2D requires camera intrinsics");
      }
      for (int i = 0; i < 8; ++i) {
        const Vec3<T> p = R * (*rep.bbox)[i].cast<T>() + t;
        y.template segment<2>(2 * i) = pinhole<T>(p, *rep.intrinsics);
      }
      break;
    }
    case RepKind::QuaternionTrans: {
      y.template head<4>() = quat_from_rot<T>(R);
      y.template tail<3>() = t;
      break;
    }
    case RepKind::AxisAngleTrans: {
      y.template head<3>() = log_so3_t<T>(R);
      y.template tail<3>() = t;
      break;
    }
    case RepKind::TwoColumnTrans: {
      y.template segment<3>(0) = R.col(0);
      y.template segment<3>(3) = R.col(1);
      y.template tail<3>() = t;
      break;
    }
  }
  return y;
}

}  // namespace

double RigidPose::orthonormality_error() const {
  return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
      .norm();
}

RigidPose LocalPose6::compose() const {
  return {exp_so3(omega) * reference.rotation, reference.translation + tau};
}

LocalPose6 pose_difference(const RigidPose& pose, const RigidPose& ref) {
  LocalPose6 d;
  d.omega = log_so3(pose.rotation * ref.rotation.transpose());
  d.tau = pose.translation - ref.translation;
  d.reference = ref;
  return d;
}

int PoseRepresentation::dim() const {
  switch (kind) {
    case RepKind::Corners3D: return 24;
    case RepKind::Corners2D: return 16;
    case RepKind::QuaternionTrans: return 7;
    case RepKind::AxisAngleTrans: return 6;
    case RepKind::TwoColumnTrans: return 9;
  }
  return 0;
}

int PoseRepresentation::group_size() const {
  switch (kind) {
    case RepKind::Corners3D: return 3;
    case RepKind::Corners2D: return 2;
    default: return dim();
  }
}

PoseRepresentation PoseRepresentation::corners3d(
    const std::array<Eigen::Vector3d, 8>& b) {
  return {RepKind::Corners3D, b, std::nullopt};
}

PoseRepresentation PoseRepresentation::corners2d(
    const std::array<Eigen::Vector3d, 8>& b, const CameraIntrinsics& K) {
  return {RepKind::Corners2D, b, K};
}

std::array<Eigen::Vector3d, 8> box_corners(
    const Eigen::Vector3d& half_extents) {
  std::array<Eigen::Vector3d, 8> corners;
  for (int i = 0; i < 8; ++i) {
    corners[i] = Eigen::Vector3d((i & 4) ? half_extents.x() : -half_extents.x(),
                                 (i & 2) ? half_extents.y() : -half_extents.y(),
                                 (i & 1) ? half_extents.z() : -half_extents.z());
  }
  return corners;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) { return skew_t<double>(v); }

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega) {
  return exp_so3_t<double>(omega);
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& R) {
  return log_so3_t<double>(R);
}

Eigen::Matrix3d left_jacobian_so3(const Eigen::Vector3d& omega) {
  const double theta2 = omega.squaredNorm();
  const Eigen::Matrix3d W = skew(omega);
  double b, c;  // Jl = I + b*W + c*W^2
  if (theta2 < 1e-16) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Eigen::Matrix3d::Identity() + b * W + c * (W * W);
}

Projection project(const Eigen::Vector3d& z, const RigidPose& pose,
                   const CameraIntrinsics& K) {
  const Eigen::Vector3d u = pose.rotation * z;  // rotated, untranslated
  const Eigen::Vector3d p = u + pose.translation;
  if (p.z() <= kDepthEps) {
    throw NonPositiveDepth("project: point depth <= depth_eps");
  }
  Projection out;
  const double inv_z = 1.0 / p.z();
  // Same expression as pinhole() so both paths agree bitwise.
  out.uv << K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy;

  Eigen::Matrix<double, 2, 3> P;  // d(uv)/dp
  P << K.fx * inv_z, 0.0, -K.fx * p.x() * inv_z * inv_z,  //
      0.0, K.fy * inv_z, -K.fy * p.y() * inv_z * inv_z;

  // p(omega, tau) = exp([omega]x) u + t + tau, so dp/domega = -[u]x at 0.
  out.J_pose.leftCols<3>() = P * (-skew(u));
  out.J_pose.rightCols<3>() = P;
  out.J_point = P * pose.rotation;
  return out;
}

Eigen::Vector2d project_uv(const Eigen::Vector3d& z, const RigidPose& pose,
                           const CameraIntrinsics& K) {
  return pinhole<double>(pose.apply(z), K);
}

Represented represent(const LocalPose6& pose, const PoseRepresentation& rep) {
  Represented out;
  out.y = rep_eval<double>(pose.omega, pose.tau, pose.reference, rep);
  const int K = rep.dim();
  out.J.resize(K, 6);
  for (int k = 0; k < 6; ++k) {
    Vec3<Dual> omega = pose.omega.cast<Dual>();
    Vec3<Dual> tau = pose.tau.cast<Dual>();
    if (k < 3) {
      omega[k].d = 1.0;
    } else {
      tau[k - 3].d = 1.0;
    }
    const auto yd = rep_eval<Dual>(omega, tau, pose.reference, rep);
    for (int r = 0; r < K; ++r) out.J(r, k) = yd[r].d;
  }
  return out;
}

}  // namespace lcpnp
