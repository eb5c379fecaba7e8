#include "lcpnp/pnp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "lcpnp/errors.hpp"
#include "lcpnp/rng.hpp"

namespace lcpnp {

namespace {

struct NormalEquations {
  Matrix6d H = Matrix6d::Zero();
  Vector6d g = Vector6d::Zero();  // descent direction is +H^-1 g
  double cost = 0.0;
};

// Builds the (optionally Huber-reweighted) normal equations at `pose`.
// cost is the objective actually minimized: the quadratic NLL, or the Huber
// composite when cfg.huber_delta is set.
NormalEquations build_normal_equations(const CorrespondenceSet& corrs,
                                       const RigidPose& pose,
                                       const SolverConfig& cfg) {
  NormalEquations ne;
  const int n = corrs.size();
  for (int i = 0; i < n; ++i) {
    const Projection proj = project(corrs.z_i(i), pose, corrs.intrinsics);
    const Eigen::Vector2d r = corrs.x_i(i) - proj.uv;
    const Eigen::Vector2d wi = corrs.w_i(i);
    for (int a = 0; a < 2; ++a) {
      const double e = wi[a] * r[a];  // weighted scalar residual
      double s = 1.0;                 // IRLS scale
      if (cfg.huber_delta) {
        const double d = *cfg.huber_delta;
        const double ae = std::abs(e);
        if (ae > d) {
          s = d / ae;
          ne.cost += d * ae - 0.5 * d * d;
        } else {
          ne.cost += 0.5 * e * e;
        }
      } else {
        ne.cost += 0.5 * e * e;
      }
      const Vector6d Ja = wi[a] * proj.J_pose.row(a).transpose();
      ne.H.noalias() += (s * Ja) * Ja.transpose();
      ne.g.noalias() += s * Ja * e;
    }
  }
  return ne;
}

double objective(const CorrespondenceSet& corrs, const RigidPose& pose,
                 const SolverConfig& cfg) {
  if (!cfg.huber_delta) return nll(corrs, pose);
  const double d = *cfg.huber_delta;
  double cost = 0.0;
  const int n = corrs.size();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d uv = project_uv(corrs.z_i(i), pose, corrs.intrinsics);
    const Eigen::Vector2d e = corrs.w_i(i).cwiseProduct(corrs.x_i(i) - uv);
    for (int a = 0; a < 2; ++a) {
      const double ae = std::abs(e[a]);
      cost += ae > d ? d * ae - 0.5 * d * d : 0.5 * e[a] * e[a];
    }
  }
  return cost;
}

RigidPose apply_step(const RigidPose& pose, const Vector6d& delta) {
  return {exp_so3(delta.head<3>()) * pose.rotation,
          pose.translation + delta.tail<3>()};
}

// Rough pose guess for a minimal sample: identity-ish rotation with the
// object centroid placed on the back-projected ray of the 2D centroid, at a
// depth that matches the projected and observed point spreads.
RigidPose coarse_init(const CorrespondenceSet& corrs,
                      const Eigen::Matrix3d& rotation) {
  const int n = corrs.size();
  Eigen::Vector2d x_mean = Eigen::Vector2d::Zero();
  Eigen::Vector3d z_mean = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    x_mean += corrs.x_i(i);
    z_mean += corrs.z_i(i);
  }
  x_mean /= n;
  z_mean /= n;
  double spread2 = 0.0, spread3 = 0.0;
  for (int i = 0; i < n; ++i) {
    spread2 += (corrs.x_i(i) - x_mean).squaredNorm();
    spread3 += (corrs.z_i(i) - z_mean).squaredNorm();
  }
  spread2 = std::sqrt(spread2 / n);
  spread3 = std::sqrt(spread3 / n);
  const double f = 0.5 * (corrs.intrinsics.fx + corrs.intrinsics.fy);
  const double depth =
      spread2 > 1e-9 ? std::max(f * spread3 / spread2, 10.0 * kDepthEps) : 1.0;
  const Eigen::Vector3d ray((x_mean.x() - corrs.intrinsics.cx) /
                                corrs.intrinsics.fx,
                            (x_mean.y() - corrs.intrinsics.cy) /
                                corrs.intrinsics.fy,
                            1.0);
  RigidPose pose;
  pose.rotation = rotation;
  pose.translation = depth * ray - rotation * z_mean;
  return pose;
}

int count_inliers(const CorrespondenceSet& corrs, const RigidPose& pose,
                  double inlier_px, std::vector<bool>* mask) {
  const int n = corrs.size();
  int count = 0;
  if (mask) mask->assign(n, false);
  for (int i = 0; i < n; ++i) {
    double err = std::numeric_limits<double>::infinity();
    try {
      err = (corrs.x_i(i) - project_uv(corrs.z_i(i), pose, corrs.intrinsics))
                .norm();
    } catch (const NonPositiveDepth&) {
    }
    if (err <= inlier_px) {
      ++count;
      if (mask) (*mask)[i] = true;
    }
  }
  return count;
}

}  // namespace

void CorrespondenceSet::validate() const {
  const int n = size();
  if (n < 1 || x.size() != 2 * n || w.size() != 2 * n || z.size() != 3 * n) {
    throw InvalidArgument("correspondence set: inconsistent array lengths");
  }
  if ((w.array() < 0.0).any()) {
    throw InvalidArgument("correspondence set: negative weight");
  }
}

CorrespondenceSet CorrespondenceSet::subset(
    const std::vector<int>& indices) const {
  CorrespondenceSet out;
  const int m = static_cast<int>(indices.size());
  out.x.resize(2 * m);
  out.z.resize(3 * m);
  out.w.resize(2 * m);
  out.intrinsics = intrinsics;
  for (int k = 0; k < m; ++k) {
    out.x.segment<2>(2 * k) = x_i(indices[k]);
    out.z.segment<3>(3 * k) = z_i(indices[k]);
    out.w.segment<2>(2 * k) = w_i(indices[k]);
  }
  return out;
}

CorrespondenceSet CorrespondenceSet::with_unit_weights() const {
  CorrespondenceSet out = *this;
  out.w.setOnes();
  return out;
}

double nll(const CorrespondenceSet& corrs, const RigidPose& pose) {
  double cost = 0.0;
  const int n = corrs.size();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d uv = project_uv(corrs.z_i(i), pose, corrs.intrinsics);
    cost += corrs.w_i(i).cwiseProduct(corrs.x_i(i) - uv).squaredNorm();
  }
  return 0.5 * cost;
}

SolveResult solve_weighted(const CorrespondenceSet& corrs,
                           const RigidPose& init, const SolverConfig& cfg) {
  corrs.validate();
  if (corrs.size() < 4) {
    throw InvalidArgument("solve_weighted: needs at least 4 correspondences");
  }
  if (cfg.max_iters < 1 || cfg.step_tol <= 0.0) {
    throw InvalidArgument("solve_weighted: bad solver config");
  }

  SolveResult res;
  res.pose = init;
  res.status = SolveStatus::MaxIters;
  double lambda = cfg.damping_init;

  NormalEquations ne = build_normal_equations(corrs, res.pose, cfg);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (!ne.H.allFinite() || !ne.g.allFinite()) {
      throw SingularHessian("solve_weighted: non-finite normal equations");
    }
    if (ne.g.norm() <= cfg.step_tol * (1.0 + ne.cost)) {
      res.status = SolveStatus::Converged;
      break;
    }
    bool accepted = false;
    while (lambda < 1e16) {
      // Multiplicative damping keeps the iteration invariant to uniform
      // weight rescaling.
      Matrix6d damped = ne.H;
      damped.diagonal() *= 1.0 + lambda;
      const Eigen::LDLT<Matrix6d> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        throw SingularHessian("solve_weighted: factorization failed");
      }
      const Vector6d delta = ldlt.solve(ne.g);
      if (!delta.allFinite()) {
        throw SingularHessian("solve_weighted: singular damped Hessian");
      }
      const RigidPose trial = apply_step(res.pose, delta);
      double trial_cost = std::numeric_limits<double>::infinity();
      try {
        trial_cost = objective(corrs, trial, cfg);
      } catch (const NonPositiveDepth&) {
        // step pushed points behind the camera; treat as a failed step
      }
      if (trial_cost <= ne.cost) {
        res.pose = trial;
        res.iters = iter + 1;
        lambda = std::max(lambda / 3.0, 1e-14);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;  // stalled: report best iterate as MaxIters
    ne = build_normal_equations(corrs, res.pose, cfg);
    if (ne.g.norm() <= cfg.step_tol * (1.0 + ne.cost)) {
      res.status = SolveStatus::Converged;
      break;
    }
  }

  // Undamped Gauss-Newton polish. Near the optimum the cost landscape is
  // flat below floating-point resolution while the gradient still resolves,
  // so steps are accepted on gradient-norm decrease (with a cost guard).
  // Quadratic convergence pins the result to the attractor independent of
  // which iteration the damped loop stopped on.
  NormalEquations fin = build_normal_equations(corrs, res.pose, cfg);
  for (int k = 0; k < 3; ++k) {
    if (!fin.H.allFinite() || !fin.g.allFinite()) break;
    const Eigen::LDLT<Matrix6d> ldlt(fin.H);
    if (ldlt.info() != Eigen::Success) break;
    const Vector6d delta = ldlt.solve(fin.g);
    if (!delta.allFinite()) break;
    const RigidPose trial = apply_step(res.pose, delta);
    NormalEquations trial_ne;
    try {
      trial_ne = build_normal_equations(corrs, trial, cfg);
    } catch (const NonPositiveDepth&) {
      break;
    }
    if (trial_ne.g.norm() <= fin.g.norm() &&
        trial_ne.cost <= fin.cost * (1.0 + 1e-10) + 1e-30) {
      res.pose = trial;
      fin = trial_ne;
    } else {
      break;
    }
  }
  if (fin.g.norm() <= cfg.step_tol * (1.0 + fin.cost)) {
    res.status = SolveStatus::Converged;
  }
  res.final_nll = objective(corrs, res.pose, cfg);
  return res;
}

RansacResult solve_ransac(const CorrespondenceSet& corrs,
                          const RansacParams& params) {
  corrs.validate();
  const int n = corrs.size();
  if (params.min_set < 4) {
    throw InvalidArgument("solve_ransac: min_set must be >= 4");
  }
  if (n < params.min_set) {
    throw NoConsensus("solve_ransac: fewer correspondences than minimal set");
  }

  const CorrespondenceSet unit = corrs.with_unit_weights();
  Rng rng(params.seed);
  SolverConfig minimal_cfg;
  minimal_cfg.max_iters = 40;
  minimal_cfg.step_tol = 1e-12;

  // Fixed rotation hypotheses give the minimal solves a basin that covers
  // SO(3) well enough; the consensus test rejects wrong ones.
  const std::array<Eigen::Matrix3d, 4> rotations = {
      Eigen::Matrix3d::Identity(),
      exp_so3(Eigen::Vector3d(std::numbers::pi, 0, 0)),
      exp_so3(Eigen::Vector3d(0, std::numbers::pi, 0)),
      exp_so3(Eigen::Vector3d(0, 0, std::numbers::pi)),
  };

  int best_count = 0;
  double best_err = std::numeric_limits<double>::infinity();
  RigidPose best_pose;
  for (int it = 0; it < params.iters; ++it) {
    std::vector<int> sample;
    while (static_cast<int>(sample.size()) < params.min_set) {
      const int idx = rng.uniform_int(n);
      if (std::find(sample.begin(), sample.end(), idx) == sample.end()) {
        sample.push_back(idx);
      }
    }
    const CorrespondenceSet sub = unit.subset(sample);
    for (const Eigen::Matrix3d& R0 : rotations) {
      SolveResult fit;
      try {
        fit = solve_weighted(sub, coarse_init(sub, R0), minimal_cfg);
      } catch (const Error&) {
        continue;
      }
      std::vector<bool> mask;
      const int count = count_inliers(unit, fit.pose, params.inlier_px, &mask);
      if (count > best_count ||
          (count == best_count && fit.final_nll < best_err)) {
        best_count = count;
        best_err = fit.final_nll;
        best_pose = fit.pose;
      }
    }
  }
  if (best_count < 4) {
    throw NoConsensus("solve_ransac: no sampled model reached 4 inliers");
  }

  std::vector<bool> mask;
  count_inliers(unit, best_pose, params.inlier_px, &mask);
  std::vector<int> consensus;
  for (int i = 0; i < n; ++i) {
    if (mask[i]) consensus.push_back(i);
  }
  const SolveResult refined =
      solve_weighted(unit.subset(consensus), best_pose, SolverConfig{});

  RansacResult out;
  out.pose = refined.pose;
  count_inliers(unit, refined.pose, params.inlier_px, &out.inlier_mask);
  return out;
}

}  // namespace lcpnp
