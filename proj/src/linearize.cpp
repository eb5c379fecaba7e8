#include "lcpnp/linearize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "lcpnp/errors.hpp"

namespace lcpnp {

LinearizationResult linearize_at_gt(const CorrespondenceSet& corrs,
                                    const RigidPose& y_gt,
                                    const LinearizeOptions& opts) {
  corrs.validate();
  const int n = corrs.size();
  if (n < 4) {
    throw InvalidArgument("linearize_at_gt: needs at least 4 correspondences");
  }

  LinearizationResult lin;
  lin.y_gt_ref = y_gt;
  lin.x_p.resize(2 * n);
  lin.A.resize(6, 2 * n);
  lin.H.setZero();

  // Capped squared weights; the threshold comes from the weight magnitudes.
  Eigen::VectorXd w2(2 * n);
  if (opts.huber) {
    const double delta = opts.huber->delta_for(
        std::vector<double>(corrs.w.data(), corrs.w.data() + 2 * n));
    for (int j = 0; j < 2 * n; ++j) {
      w2[j] = huber_of_square(corrs.w[j] * corrs.w[j], delta);
    }
  } else {
    w2 = corrs.w.array().square();
  }

  std::vector<Eigen::Matrix<double, 2, 6>> J(n);
  for (int i = 0; i < n; ++i) {
    const Projection proj = project(corrs.z_i(i), y_gt, corrs.intrinsics);
    lin.x_p.segment<2>(2 * i) = proj.uv;
    J[i] = proj.J_pose;
    lin.H.noalias() +=
        J[i].transpose() * w2.segment<2>(2 * i).asDiagonal() * J[i];
  }
  lin.r_gt = corrs.x - lin.x_p;

  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(lin.H);
  const double emin = eig.eigenvalues().minCoeff();
  const double emax = eig.eigenvalues().maxCoeff();
  if (!(emin > 0.0) || emax >= opts.cond_max * emin) {
    throw DegenerateHessian("linearize_at_gt: ill-conditioned Hessian");
  }

  const Eigen::LDLT<Matrix6d> ldlt(lin.H);
  for (int i = 0; i < n; ++i) {
    lin.A.middleCols<2>(2 * i) =
        ldlt.solve(J[i].transpose() * w2.segment<2>(2 * i).asDiagonal());
  }
  return lin;
}

LocalPose6 predict_pose_linear(const LinearizationResult& lin) {
  const Vector6d delta = lin.A * lin.r_gt;
  return LocalPose6::from_vector(delta, lin.y_gt_ref);
}

}  // namespace lcpnp
