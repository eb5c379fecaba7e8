#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lcpnp/errors.hpp"
#include "lcpnp/harness.hpp"
#include "lcpnp/linearize.hpp"
#include "lcpnp/loss.hpp"
#include "lcpnp/rng.hpp"
#include "support/frozen_oracle.hpp"
#include "support/test_util.hpp"

using namespace lcpnp;
using test::make_scene;

namespace {

LossConfig config_for(const SceneSample& scene, RepKind kind,
                      Distribution dist) {
  LossConfig cfg;
  cfg.representation.kind = kind;
  cfg.representation.bbox = scene.bbox;
  cfg.representation.intrinsics = scene.corrs.intrinsics;
  cfg.distribution = dist;
  return cfg;
}

SceneSample weighted_scene(std::uint64_t seed, int n = 10,
                           double noise = 1.5) {
  SceneSample scene = make_scene(seed, n, noise);
  Rng rng(seed ^ 0x5eed);
  for (int j = 0; j < 2 * n; ++j) scene.corrs.w[j] = rng.uniform(0.4, 1.8);
  return scene;
}

}  // namespace

TEST_CASE("corner_norm_mean basics") {
  const std::vector<double> zeros(24, 0.0);
  CHECK(corner_norm_mean(zeros, 3, 0.0) == doctest::Approx(0.0));

  const std::vector<double> ones(24, 1.0);
  CHECK(corner_norm_mean(ones, 3, 0.0) ==
        doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  Rng rng(3);
  std::vector<double> d(24);
  for (double& v : d) v = rng.uniform(0.0, 2.0);
  double manual = 0.0;
  for (int g = 0; g < 8; ++g) {
    manual += std::sqrt(d[3 * g] + d[3 * g + 1] + d[3 * g + 2] + 1e-12);
  }
  manual /= 8.0;
  CHECK(corner_norm_mean(d, 3, 1e-12) == doctest::Approx(manual).epsilon(1e-12));

  CHECK_THROWS_AS(corner_norm_mean(std::vector<double>(5, 1.0), 3, 0.0),
                  InvalidArgument);
}

TEST_CASE("lc_combine matches the closed form") {
  CHECK(lc_combine(0.0, 1.0, 0.0, Distribution::Laplace) ==
        doctest::Approx(0.0));
  CHECK(lc_combine(1.0, 1.0, 1.0, Distribution::Laplace) ==
        doctest::Approx(1.0));
  const double e = std::exp(1.0);
  CHECK(lc_combine(e, e, e, Distribution::Laplace) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(lc_combine(1.0, 0.0, 1.0, Distribution::Laplace),
                  NonPositivePrior);
}

TEST_CASE("lc_combine is minimized where the prior matches half the error") {
  const double e_cov = 0.8, e_linear = 0.6;
  const double opt = 0.5 * (e_cov + e_linear);
  const double at_opt = lc_combine(e_cov, opt, e_linear,
                                   Distribution::Laplace);
  for (const double factor : {0.5, 0.9, 1.1, 2.0}) {
    CHECK(lc_combine(e_cov, opt * factor, e_linear, Distribution::Laplace) >
          at_opt);
  }
}

TEST_CASE("zero residuals zero out e_cov and e_linear but not e_prior") {
  SceneSample scene = make_scene(1, 12, 0.0);
  const LossConfig cfg = config_for(scene, RepKind::Corners3D,
                                    Distribution::Laplace);
  const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
  // With r = 0 both terms sit exactly on the sqrt_eps floor.
  CHECK(b.e_cov == doctest::Approx(std::sqrt(cfg.sqrt_eps)).epsilon(1e-12));
  CHECK(b.e_linear == doctest::Approx(std::sqrt(cfg.sqrt_eps)).epsilon(1e-12));
  CHECK(b.e_prior > 1e-6);
  CHECK(b.grad_x.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("lc_loss scalars agree with loss_terms through the public kernels") {
  for (int trial = 0; trial < 10; ++trial) {
    const SceneSample scene = weighted_scene(100 + trial);
    for (const Distribution dist :
         {Distribution::Laplace, Distribution::Gaussian}) {
      const LossConfig cfg = config_for(scene, RepKind::Corners3D, dist);
      const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
      const LossTerms t =
          loss_terms(linearize_at_gt(scene.corrs, scene.y_gt), cfg);
      CHECK(b.e_cov == doctest::Approx(t.e_cov).epsilon(1e-12));
      CHECK(b.e_prior == doctest::Approx(t.e_prior).epsilon(1e-12));
      CHECK(b.e_linear == doctest::Approx(t.e_linear).epsilon(1e-12));
      CHECK(b.l_lc ==
            doctest::Approx(lc_combine(t.e_cov, t.e_prior, t.e_linear, dist))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("uniform weight scaling moves only the prior term") {
  for (int trial = 0; trial < 10; ++trial) {
    const SceneSample scene = weighted_scene(200 + trial);
    const LossConfig cfg = config_for(scene, RepKind::Corners3D,
                                      Distribution::Laplace);
    const LossBreakdown base = lc_loss(scene.corrs, scene.y_gt, cfg);

    const double k = 3.7;
    SceneSample scaled = scene;
    scaled.corrs.w *= k;
    const LossBreakdown b = lc_loss(scaled.corrs, scaled.y_gt, cfg);
    CHECK(b.e_cov == doctest::Approx(base.e_cov).epsilon(1e-9));
    CHECK(b.e_linear == doctest::Approx(base.e_linear).epsilon(1e-9));
    CHECK(b.e_prior == doctest::Approx(base.e_prior / k).epsilon(1e-9));
  }
}

TEST_CASE("e_linear matches the representation-space recomputation") {
  // Small noise keeps the first-order error-vector route within tolerance
  // of the recomposed represent() difference.
  for (int trial = 0; trial < 10; ++trial) {
    const SceneSample scene = make_scene(300 + trial, 12, 0.01);
    const LossConfig cfg = config_for(scene, RepKind::Corners3D,
                                      Distribution::Laplace);
    const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);

    const LinearizationResult lin = linearize_at_gt(scene.corrs, scene.y_gt);
    const LocalPose6 pred = predict_pose_linear(lin);
    const Eigen::VectorXd y_hat = represent(pred, cfg.representation).y;
    const Eigen::VectorXd y_gt =
        represent(LocalPose6::identity_at(scene.y_gt), cfg.representation).y;
    const Eigen::VectorXd diff_sq = (y_hat - y_gt).array().square();
    const double recomputed =
        corner_norm_mean({diff_sq.data(), diff_sq.data() + diff_sq.size()}, 3,
                         cfg.sqrt_eps);
    CHECK(b.e_linear == doctest::Approx(recomputed).epsilon(1e-6));
  }
}

TEST_CASE("gradients match the frozen finite-difference oracle") {
  const RepKind kinds[] = {RepKind::Corners3D, RepKind::Corners2D,
                           RepKind::QuaternionTrans, RepKind::AxisAngleTrans,
                           RepKind::TwoColumnTrans};
  int scenes = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const SceneSample scene = weighted_scene(400 + trial);
    for (const Distribution dist :
         {Distribution::Laplace, Distribution::Gaussian}) {
      const LossConfig cfg = config_for(scene, kinds[trial % 5], dist);
      const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
      const test::FrozenOracle oracle(scene.corrs, scene.y_gt, cfg);

      const int m = 2 * scene.corrs.size();
      Eigen::VectorXd fd_x(m), fd_w(m);
      const double hx = 1e-5, hw = 1e-6;
      for (int j = 0; j < m; ++j) {
        Eigen::VectorXd xu = scene.corrs.x, xd = scene.corrs.x;
        xu[j] += hx;
        xd[j] -= hx;
        fd_x[j] = (oracle.scalar(xu, scene.corrs.w) -
                   oracle.scalar(xd, scene.corrs.w)) /
                  (2.0 * hx);
        Eigen::VectorXd wu = scene.corrs.w, wd = scene.corrs.w;
        wu[j] += hw;
        wd[j] -= hw;
        fd_w[j] = (oracle.scalar(scene.corrs.x, wu) -
                   oracle.scalar(scene.corrs.x, wd)) /
                  (2.0 * hw);
      }
      CHECK(test::rel_err(b.grad_x, fd_x) < 1e-5);
      CHECK(test::rel_err(b.grad_w, fd_w) < 1e-5);
      ++scenes;
    }
  }
  CHECK(scenes == 20);
}

TEST_CASE("huber-capped loss still matches the oracle") {
  for (int trial = 0; trial < 5; ++trial) {
    SceneSample scene = weighted_scene(500 + trial, 12, 2.0);
    scene.corrs.x[3] += 40.0;  // push residuals past the cap
    scene.corrs.x[7] -= 25.0;
    LossConfig cfg = config_for(scene, RepKind::Corners3D,
                                Distribution::Laplace);
    cfg.huber = HuberConfig{};
    const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
    const test::FrozenOracle oracle(scene.corrs, scene.y_gt, cfg);

    const int m = 2 * scene.corrs.size();
    Eigen::VectorXd fd_x(m), fd_w(m);
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd xu = scene.corrs.x, xd = scene.corrs.x;
      xu[j] += 1e-5;
      xd[j] -= 1e-5;
      fd_x[j] = (oracle.scalar(xu, scene.corrs.w) -
                 oracle.scalar(xd, scene.corrs.w)) /
                2e-5;
      Eigen::VectorXd wu = scene.corrs.w, wd = scene.corrs.w;
      wu[j] += 1e-6;
      wd[j] -= 1e-6;
      fd_w[j] = (oracle.scalar(scene.corrs.x, wu) -
                 oracle.scalar(scene.corrs.x, wd)) /
                2e-6;
    }
    CHECK(test::rel_err(b.grad_x, fd_x) < 1e-5);
    CHECK(test::rel_err(b.grad_w, fd_w) < 1e-5);
  }
}

TEST_CASE("location gradients are radial per image axis") {
  // Each component of grad_x carries the sign of its own residual (positive
  // per-axis factors), which is what makes the negative gradient shrink
  // every reprojection error.
  for (int trial = 0; trial < 10; ++trial) {
    const SceneSample scene = weighted_scene(600 + trial, 12, 2.0);
    const LossConfig cfg = config_for(scene, RepKind::Corners3D,
                                      Distribution::Laplace);
    const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
    const LinearizationResult lin = linearize_at_gt(scene.corrs, scene.y_gt);
    for (int j = 0; j < 2 * scene.corrs.size(); ++j) {
      if (std::abs(lin.r_gt[j]) < 1e-12) continue;
      CHECK(b.grad_x[j] * lin.r_gt[j] > 0.0);
    }
  }
}

TEST_CASE("a small negative-gradient step improves nearly every point") {
  int total = 0, correct = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const SceneSample scene = make_scene(700 + trial, 16, 2.0);
    const LossConfig cfg = config_for(scene, RepKind::Corners3D,
                                      Distribution::Laplace);
    const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
    const LinearizationResult lin = linearize_at_gt(scene.corrs, scene.y_gt);
    for (int i = 0; i < scene.corrs.size(); ++i) {
      const Eigen::Vector2d r = lin.r_gt.segment<2>(2 * i);
      if (r.norm() == 0.0) continue;
      ++total;
      const Eigen::Vector2d moved = r - 1e-3 * b.grad_x.segment<2>(2 * i);
      if (moved.norm() < r.norm()) ++correct;
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("all outputs stay finite across representations and noise levels") {
  const RepKind kinds[] = {RepKind::Corners3D, RepKind::Corners2D,
                           RepKind::QuaternionTrans, RepKind::AxisAngleTrans,
                           RepKind::TwoColumnTrans};
  for (int trial = 0; trial < 20; ++trial) {
    const SceneSample scene =
        weighted_scene(800 + trial, 10, trial % 3 == 0 ? 0.0 : 5.0);
    for (const RepKind kind : kinds) {
      const LossConfig cfg = config_for(scene, kind, Distribution::Laplace);
      const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
      CHECK(std::isfinite(b.l_lc));
      CHECK(b.e_cov >= 0.0);
      CHECK(b.e_prior > 0.0);
      CHECK(b.e_linear >= 0.0);
      CHECK(b.grad_x.allFinite());
      CHECK(b.grad_w.allFinite());
    }
  }
}

TEST_CASE("degenerate scenes raise DegenerateHessian") {
  SceneSample scene = make_scene(13, 8, 1.0);
  for (int i = 0; i < scene.corrs.size(); ++i) {
    const double t = i / 7.0;
    scene.corrs.z.segment<3>(3 * i) = Eigen::Vector3d(t, t, t) * 0.3;
  }
  const LossConfig cfg = config_for(scene, RepKind::Corners3D,
                                    Distribution::Laplace);
  CHECK_THROWS_AS(lc_loss(scene.corrs, scene.y_gt, cfg), DegenerateHessian);
}
