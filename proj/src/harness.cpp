#include "lcpnp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "lcpnp/errors.hpp"
#include "lcpnp/linearize.hpp"
#include "lcpnp/parallel.hpp"
#include "lcpnp/rng.hpp"

namespace lcpnp {

namespace {

constexpr double kWeightFloor = 1e-3;  // keeps H invertible during descent

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

double rotation_error_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = std::clamp(((a * b.transpose()).trace() - 1.0) / 2.0, -1.0,
                              1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double median_of(std::deque<double> values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double med = values[mid];
  if (values.size() % 2 == 0) {
    const double lo = *std::max_element(values.begin(), values.begin() + mid);
    med = 0.5 * (lo + med);
  }
  return med;
}

struct StepGrads {
  double loss = 0.0;
  Eigen::VectorXd gx;
  Eigen::VectorXd gw;
};

// One evaluation of the chosen training loss and its gradients at the
// current correspondence state.
StepGrads eval_loss(const SceneSample& scene, const CorrespondenceSet& corrs,
                    LossKind kind, const LossConfig& lc_cfg,
                    RigidPose* warm_pose) {
  StepGrads out;
  const int m = 2 * corrs.size();
  switch (kind) {
    case LossKind::LC: {
      const LossBreakdown b = lc_loss(corrs, scene.y_gt, lc_cfg);
      out.loss = b.l_lc;
      out.gx = b.grad_x;
      out.gw = b.grad_w;
      break;
    }
    case LossKind::BPnPStyle: {
      // Solve, then differentiate the representation-space pose error
      // through the solver optimum (nonzero residuals).
      const SolveResult sol = solve_weighted(corrs, *warm_pose);
      *warm_pose = sol.pose;
      const LinearizationResult lin =
          linearize_at_gt(corrs, sol.pose);  // anchored at the optimum
      const Represented rep_hat =
          represent(LocalPose6::identity_at(sol.pose), lc_cfg.representation);
      const Represented rep_gt =
          represent(LocalPose6::identity_at(scene.y_gt), lc_cfg.representation);
      const Eigen::VectorXd e = rep_hat.y - rep_gt.y;
      const int gs = lc_cfg.representation.group_size();
      const int groups = static_cast<int>(e.size()) / gs;
      Eigen::VectorXd dL_de(e.size());
      out.loss = 0.0;
      for (int g = 0; g < groups; ++g) {
        const double norm =
            std::sqrt(e.segment(g * gs, gs).squaredNorm() + 1e-12);
        out.loss += norm / groups;
        dL_de.segment(g * gs, gs) = e.segment(g * gs, gs) / (norm * groups);
      }
      // dL/dy6 through the representation, then dy6/dx and dy6/dw via the
      // implicit function theorem at the optimum.
      const Vector6d dL_dy = rep_hat.J.transpose() * dL_de;
      out.gx = lin.A.transpose() * dL_dy;
      out.gw.resize(m);
      const Eigen::LDLT<Matrix6d> ldlt(lin.H);
      for (int i = 0; i < corrs.size(); ++i) {
        const Projection proj =
            project(corrs.z_i(i), sol.pose, corrs.intrinsics);
        const Eigen::Vector2d r = corrs.x_i(i) - proj.uv;
        for (int a = 0; a < 2; ++a) {
          const int j = 2 * i + a;
          // d y / d w_j = 2 w_j r_j H^-1 J_row_j^T
          const Vector6d dy_dw =
              2.0 * corrs.w[j] * r[a] *
              ldlt.solve(proj.J_pose.row(a).transpose());
          out.gw[j] = dL_dy.dot(dy_dw);
        }
      }
      break;
    }
    case LossKind::SurrogateOnly: {
      const LinearizationResult lin = linearize_at_gt(corrs, scene.y_gt);
      out.loss = lin.r_gt.lpNorm<1>();
      out.gx.resize(m);
      for (int j = 0; j < m; ++j) {
        out.gx[j] = lin.r_gt[j] > 0.0 ? 1.0 : (lin.r_gt[j] < 0.0 ? -1.0 : 0.0);
      }
      out.gw = Eigen::VectorXd::Zero(m);
      break;
    }
  }
  return out;
}

}  // namespace

double SceneSample::diameter() const {
  double d2 = 0.0;
  for (const auto& a : bbox) {
    for (const auto& b : bbox) d2 = std::max(d2, (a - b).squaredNorm());
  }
  return std::sqrt(d2);
}

SceneSample gen_scene(const SceneConfig& cfg) {
  if (cfg.n_points < 4 || cfg.noise_px < 0.0 || cfg.outlier_frac < 0.0 ||
      cfg.outlier_frac >= 1.0 || cfg.depth_range.first <= 0.0 ||
      cfg.depth_range.second < cfg.depth_range.first) {
    throw InvalidArgument("gen_scene: bad scene config");
  }
  Rng rng(cfg.seed);
  SceneSample s;
  s.bbox = box_corners(cfg.bbox_half_extents);

  const int n = cfg.n_points;
  s.corrs.intrinsics = cfg.intrinsics;
  s.corrs.z.resize(3 * n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      s.corrs.z[3 * i + a] = rng.uniform(-cfg.bbox_half_extents[a],
                                         cfg.bbox_half_extents[a]);
    }
  }

  bool placed = false;
  for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
    s.y_gt.rotation = random_rotation(rng);
    const double depth =
        rng.uniform(cfg.depth_range.first, cfg.depth_range.second);
    const double tan_x = rng.uniform(-0.25, 0.25);
    const double tan_y = rng.uniform(-0.25, 0.25);
    s.y_gt.translation =
        Eigen::Vector3d(tan_x * depth, tan_y * depth, depth);
    placed = true;
    for (int i = 0; i < n; ++i) {
      if (s.y_gt.apply(s.corrs.z_i(i)).z() <= 1e-3) {
        placed = false;
        break;
      }
    }
  }
  if (!placed) {
    throw FrustumFailure("gen_scene: no valid pose in 1000 attempts");
  }

  s.corrs.x.resize(2 * n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d uv =
        project_uv(s.corrs.z_i(i), s.y_gt, cfg.intrinsics);
    const double nx = rng.normal();
    const double ny = rng.normal();
    s.corrs.x[2 * i] = uv.x() + cfg.noise_px * nx;
    s.corrs.x[2 * i + 1] = uv.y() + cfg.noise_px * ny;
  }

  s.outlier_mask.assign(n, false);
  const int n_out = static_cast<int>(std::lround(cfg.outlier_frac * n));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }
  for (int k = 0; k < n_out; ++k) {
    const int i = order[k];
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double mag = rng.uniform(20.0, 100.0);
    s.corrs.x[2 * i] += mag * std::cos(angle);
    s.corrs.x[2 * i + 1] += mag * std::sin(angle);
    s.outlier_mask[i] = true;
  }

  s.corrs.w = Eigen::VectorXd::Ones(2 * n);
  s.model_points.reserve(n);
  for (int i = 0; i < n; ++i) s.model_points.push_back(s.corrs.z_i(i));
  return s;
}

double gradient_correctness(const CorrespondenceSet& corrs,
                            const Eigen::VectorXd& grad_x,
                            const Eigen::VectorXd& x_p, double step) {
  if (step <= 0.0) throw InvalidArgument("gradient_correctness: step <= 0");
  const int n = corrs.size();
  int considered = 0;
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d r = corrs.x_i(i) - x_p.segment<2>(2 * i);
    if (r.squaredNorm() == 0.0) continue;
    ++considered;
    const Eigen::Vector2d moved =
        corrs.x_i(i) - step * grad_x.segment<2>(2 * i);
    if ((moved - x_p.segment<2>(2 * i)).norm() < r.norm()) ++correct;
  }
  if (considered == 0) {
    throw AllResidualsZero("gradient_correctness: every residual is zero");
  }
  return static_cast<double>(correct) / considered;
}

TrainTrace toy_train(const SceneSample& scene, LossKind kind, int steps,
                     double lr, const ClipConfig& clip) {
  if (steps < 0 || lr <= 0.0 || clip.window < 1 || clip.factor <= 0.0) {
    throw InvalidArgument("toy_train: bad training config");
  }
  LossConfig lc_cfg;
  lc_cfg.representation = PoseRepresentation::corners3d(scene.bbox);
  // Toy-scale stabilizer: descent drives residuals many orders below pixel
  // level, and the default 1e-12 floor would let converged points oscillate.
  lc_cfg.sqrt_eps = 3e-8;

  CorrespondenceSet corrs = scene.corrs;
  RigidPose warm_pose = scene.y_gt;  // BPnP warm start
  const double diam = scene.diameter();

  TrainTrace trace;
  trace.records.reserve(steps + 1);
  std::deque<double> norm_window;
  StepGrads grads;
  bool have_grads = false;

  for (int s = 0; s <= steps; ++s) {
    TrainStep rec;
    try {
      grads = eval_loss(scene, corrs, kind, lc_cfg, &warm_pose);
      have_grads = true;
    } catch (const Error&) {
      rec.solver_failure = true;
      if (!have_grads) {  // nothing to fall back on
        grads.loss = std::numeric_limits<double>::quiet_NaN();
        grads.gx = Eigen::VectorXd::Zero(corrs.x.size());
        grads.gw = Eigen::VectorXd::Zero(corrs.w.size());
      }
    }
    rec.loss = grads.loss;

    // Median-tracking clip over the joint gradient norm.
    const double gnorm = std::sqrt(grads.gx.squaredNorm() +
                                   grads.gw.squaredNorm());
    double scale = 1.0;
    if (!norm_window.empty()) {
      const double cap = clip.factor * median_of(norm_window);
      if (gnorm > cap && gnorm > 0.0) scale = cap / gnorm;
    }
    if (std::isfinite(gnorm) && gnorm > 0.0) {
      norm_window.push_back(gnorm);
      if (static_cast<int>(norm_window.size()) > clip.window) {
        norm_window.pop_front();
      }
    }

    // Perfect projections for bookkeeping at this state.
    Eigen::VectorXd x_p(corrs.x.size());
    for (int i = 0; i < corrs.size(); ++i) {
      x_p.segment<2>(2 * i) =
          project_uv(corrs.z_i(i), scene.y_gt, corrs.intrinsics);
    }
    try {
      rec.correctness =
          gradient_correctness(corrs, scale * grads.gx, x_p, lr);
    } catch (const AllResidualsZero&) {
      rec.correctness = 1.0;  // converged state: nothing left to move
    }
    try {
      const SolveResult sol = solve_weighted(corrs, scene.y_gt);
      rec.rot_err_deg = rotation_error_deg(sol.pose.rotation,
                                           scene.y_gt.rotation);
      rec.trans_err = (sol.pose.translation - scene.y_gt.translation).norm();
      rec.add = add_metrics(sol.pose, scene.y_gt, scene.model_points, diam,
                            false)
                    .add;
    } catch (const Error&) {
      rec.solver_failure = true;
    }
    trace.records.push_back(rec);

    if (s == steps) break;
    corrs.x -= (lr * scale) * grads.gx;
    corrs.w = (corrs.w - (lr * scale) * grads.gw).cwiseMax(kWeightFloor);
  }
  trace.final_corrs = corrs;
  return trace;
}

AveragingResult averaging_demo(const std::array<double, 2>& a_hats,
                               double a) {
  const double mean = 0.5 * (a_hats[0] + a_hats[1]);
  const double s = mean > a ? 1.0 : (mean < a ? -1.0 : 0.0);
  AveragingResult out;
  out.grads = {0.5 * s, 0.5 * s};
  for (int i = 0; i < 2; ++i) {
    const double err = a_hats[i] - a;
    // A step along -grad shrinks |err| iff the gradient points with err;
    // zero gradient means no motion and counts as correct.
    out.correct[i] =
        out.grads[i] == 0.0 || (out.grads[i] > 0.0) == (err > 0.0);
  }
  return out;
}

Matrix6d monte_carlo_pose_cov(const SceneSample& scene, double sigma_px,
                              int samples, std::uint64_t seed,
                              int* failures) {
  if (samples < 2) {
    throw InvalidArgument("monte_carlo_pose_cov: needs at least 2 samples");
  }
  const int n = scene.corrs.size();
  Eigen::VectorXd x_p(2 * n);
  for (int i = 0; i < n; ++i) {
    x_p.segment<2>(2 * i) =
        project_uv(scene.corrs.z_i(i), scene.y_gt, scene.corrs.intrinsics);
  }

  std::vector<Vector6d> increments(samples, Vector6d::Zero());
  std::vector<char> ok(samples, 0);
  parallel_for(samples, [&](int k) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(k)));
    CorrespondenceSet corrs = scene.corrs;
    for (int j = 0; j < 2 * n; ++j) {
      corrs.x[j] = x_p[j] + sigma_px * rng.normal();
    }
    try {
      const SolveResult sol = solve_weighted(corrs, scene.y_gt);
      increments[k] = pose_difference(sol.pose, scene.y_gt).vector();
      ok[k] = 1;
    } catch (const Error&) {
      ok[k] = 0;
    }
  });

  int used = 0;
  Vector6d mean = Vector6d::Zero();
  for (int k = 0; k < samples; ++k) {
    if (ok[k]) {
      mean += increments[k];
      ++used;
    }
  }
  if (failures) *failures = samples - used;
  if (used < 2) {
    throw SolverFailure("monte_carlo_pose_cov: too few successful solves");
  }
  mean /= used;
  Matrix6d cov = Matrix6d::Zero();
  for (int k = 0; k < samples; ++k) {
    if (!ok[k]) continue;
    const Vector6d d = increments[k] - mean;
    cov += d * d.transpose();
  }
  return cov / (used - 1);
}

AddMetrics add_metrics(const RigidPose& pred, const RigidPose& gt,
                       std::span<const Eigen::Vector3d> model_points,
                       double diameter, bool symmetric) {
  if (model_points.empty() || !(diameter > 0.0)) {
    throw InvalidArgument("add_metrics: empty model or bad diameter");
  }
  double sum = 0.0;
  if (!symmetric) {
    for (const auto& p : model_points) {
      sum += (pred.apply(p) - gt.apply(p)).norm();
    }
  } else {
    std::vector<Eigen::Vector3d> gt_pts;
    gt_pts.reserve(model_points.size());
    for (const auto& p : model_points) gt_pts.push_back(gt.apply(p));
    for (const auto& p : model_points) {
      const Eigen::Vector3d q = pred.apply(p);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& g : gt_pts) best = std::min(best, (q - g).norm());
      sum += best;
    }
  }
  AddMetrics out;
  out.add = sum / static_cast<double>(model_points.size());
  out.recall_ok = out.add < 0.1 * diameter;
  return out;
}

}  // namespace lcpnp
