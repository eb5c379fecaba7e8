#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lcpnp/errors.hpp"
#include "lcpnp/harness.hpp"
#include "lcpnp/linearize.hpp"
#include "lcpnp/rng.hpp"
#include "support/test_util.hpp"

using namespace lcpnp;

TEST_CASE("identical seeds give bitwise-identical scenes") {
  SceneConfig cfg;
  cfg.seed = 42;
  cfg.noise_px = 1.5;
  cfg.outlier_frac = 0.25;
  const SceneSample a = gen_scene(cfg);
  const SceneSample b = gen_scene(cfg);
  CHECK(a.corrs.x == b.corrs.x);
  CHECK(a.corrs.z == b.corrs.z);
  CHECK(a.corrs.w == b.corrs.w);
  CHECK(a.y_gt.rotation == b.y_gt.rotation);
  CHECK(a.y_gt.translation == b.y_gt.translation);
  CHECK(a.outlier_mask == b.outlier_mask);

  SceneConfig other = cfg;
  other.seed = 43;
  CHECK(gen_scene(other).corrs.x != a.corrs.x);
}

TEST_CASE("zero noise reproduces the perfect projections exactly") {
  SceneConfig cfg;
  cfg.seed = 7;
  cfg.noise_px = 0.0;
  const SceneSample s = gen_scene(cfg);
  for (int i = 0; i < s.corrs.size(); ++i) {
    const Eigen::Vector2d uv =
        project_uv(s.corrs.z_i(i), s.y_gt, s.corrs.intrinsics);
    CHECK(s.corrs.x.segment<2>(2 * i) == uv);
  }
}

TEST_CASE("seed 42 with 64 points keeps every depth positive") {
  SceneConfig cfg;
  cfg.seed = 42;
  cfg.n_points = 64;
  const SceneSample s = gen_scene(cfg);
  double min_depth = 1e300;
  for (int i = 0; i < s.corrs.size(); ++i) {
    min_depth = std::min(min_depth, s.y_gt.apply(s.corrs.z_i(i)).z());
  }
  CHECK(min_depth > 0.0);

  // Generated points and bbox agree with the scene invariants.
  for (int i = 0; i < s.corrs.size(); ++i) {
    const Eigen::Vector3d z = s.corrs.z_i(i);
    for (int a = 0; a < 3; ++a) {
      CHECK(std::abs(z[a]) <= cfg.bbox_half_extents[a] + 1e-12);
    }
  }
  CHECK(s.model_points.size() == static_cast<std::size_t>(cfg.n_points));
}

TEST_CASE("outlier fraction marks the requested share of points") {
  SceneConfig cfg;
  cfg.seed = 3;
  cfg.n_points = 40;
  cfg.outlier_frac = 0.3;
  const SceneSample s = gen_scene(cfg);
  int count = 0;
  for (const bool b : s.outlier_mask) count += b ? 1 : 0;
  CHECK(count == 12);
}

TEST_CASE("gradient correctness counts exact improvements") {
  const SceneSample s = test::make_scene(11, 10, 2.0);
  const LinearizationResult lin = linearize_at_gt(s.corrs, s.y_gt);

  // Gradients pointing exactly from x_p toward x always improve.
  const Eigen::VectorXd toward = s.corrs.x - lin.x_p;
  CHECK(gradient_correctness(s.corrs, toward, lin.x_p, 1e-3) ==
        doctest::Approx(1.0));
  CHECK(gradient_correctness(s.corrs, -toward, lin.x_p, 1e-3) ==
        doctest::Approx(0.0));
}

TEST_CASE("all-zero residuals cannot be scored") {
  const SceneSample s = test::make_scene(12, 8, 0.0);
  const LinearizationResult lin = linearize_at_gt(s.corrs, s.y_gt);
  CHECK_THROWS_AS(gradient_correctness(s.corrs, lin.r_gt, lin.x_p, 1e-3),
                  AllResidualsZero);
}

TEST_CASE("toy_train with zero steps records only the initial state") {
  const SceneSample s = test::make_scene(13, 16, 1.0);
  const TrainTrace t = toy_train(s, LossKind::LC, 0, 0.05);
  CHECK(t.records.size() == 1);
  CHECK(t.final_corrs.x == s.corrs.x);
}

TEST_CASE("toy_train is bitwise reproducible") {
  const SceneSample s = test::make_scene(14, 16, 2.0);
  const TrainTrace a = toy_train(s, LossKind::LC, 25, 0.05);
  const TrainTrace b = toy_train(s, LossKind::LC, 25, 0.05);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.final_corrs.x == b.final_corrs.x);
  CHECK(a.final_corrs.w == b.final_corrs.w);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].loss == b.records[i].loss);
    CHECK(a.records[i].correctness == b.records[i].correctness);
  }
}

TEST_CASE("LC keeps correctness high while BPnP-style descent does not") {
  const SceneSample s = test::make_scene(15, 32, 2.0);
  const auto tail = [](const TrainTrace& t) {
    double acc = 0.0;
    int n = 0;
    for (std::size_t i = t.records.size() - 100; i < t.records.size(); ++i) {
      acc += t.records[i].correctness;
      ++n;
    }
    return acc / n;
  };
  const TrainTrace lc = toy_train(s, LossKind::LC, 300, 0.05);
  const TrainTrace bp = toy_train(s, LossKind::BPnPStyle, 300, 0.05);
  CHECK(tail(lc) >= 0.99);
  CHECK(tail(bp) <= 0.90);
  CHECK(tail(bp) < tail(lc));
}

TEST_CASE("LC loss gradients score at least 99% correctness") {
  const SceneSample s = test::make_scene(25, 32, 2.0);
  LossConfig cfg;
  cfg.representation = PoseRepresentation::corners3d(s.bbox);
  const LossBreakdown b = lc_loss(s.corrs, s.y_gt, cfg);
  const LinearizationResult lin = linearize_at_gt(s.corrs, s.y_gt);
  CHECK(gradient_correctness(s.corrs, b.grad_x, lin.x_p, 1e-3) >= 0.99);
}

TEST_CASE("LC descent never worsens the solved pose over 20 seeds") {
  for (int seed = 0; seed < 20; ++seed) {
    const SceneSample s = test::make_scene(700 + seed, 24, 2.0);
    const TrainTrace t = toy_train(s, LossKind::LC, 300, 0.05);
    const TrainStep& first = t.records.front();
    const TrainStep& last = t.records.back();
    CHECK(last.rot_err_deg + last.trans_err <=
          first.rot_err_deg + first.trans_err);
  }
}

TEST_CASE("surrogate descent shrinks the L1 residual") {
  const SceneSample s = test::make_scene(16, 16, 2.0);
  const TrainTrace t = toy_train(s, LossKind::SurrogateOnly, 50, 0.05);
  CHECK(t.records.back().loss < t.records.front().loss);
}

TEST_CASE("averaging demo reproduces the straddling pathology") {
  const AveragingResult r = averaging_demo({0.4, 0.8}, 0.5);
  CHECK(r.grads[0] == doctest::Approx(0.5));
  CHECK(r.grads[1] == doctest::Approx(0.5));
  CHECK_FALSE(r.correct[0]);
  CHECK(r.correct[1]);

  const AveragingResult same_side = averaging_demo({0.7, 0.9}, 0.5);
  CHECK(same_side.correct[0]);
  CHECK(same_side.correct[1]);

  const AveragingResult centered = averaging_demo({0.3, 0.7}, 0.5);
  CHECK(centered.grads[0] == 0.0);
  CHECK(centered.grads[1] == 0.0);
  CHECK(centered.correct[0]);
  CHECK(centered.correct[1]);
}

TEST_CASE("every straddling configuration flags exactly one estimate") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = rng.uniform(-1.0, 1.0);
    const double lo = a - rng.uniform(0.01, 1.0);
    const double hi = a + rng.uniform(0.01, 1.0);
    if (lo + hi == 2.0 * a) continue;  // mean exactly on target
    const AveragingResult r = averaging_demo({lo, hi}, a);
    CHECK((r.correct[0] ? 1 : 0) + (r.correct[1] ? 1 : 0) == 1);
  }
}

TEST_CASE("monte carlo covariance vanishes at zero noise") {
  const SceneSample s = test::make_scene(18, 12, 1.0);
  const Matrix6d cov = monte_carlo_pose_cov(s, 0.0, 50, 5);
  CHECK(cov.norm() < 1e-20);
}

TEST_CASE("monte carlo covariance scales with the noise variance") {
  const SceneSample s = test::make_scene(19, 24, 1.0);
  const Matrix6d c1 = monte_carlo_pose_cov(s, 0.5, 4000, 7);
  const Matrix6d c2 = monte_carlo_pose_cov(s, 1.0, 4000, 7);
  const double ratio = c2.trace() / c1.trace();
  CHECK(ratio > 3.6);
  CHECK(ratio < 4.4);
}

TEST_CASE("monte carlo covariance is independent of the worker count") {
  const SceneSample s = test::make_scene(20, 12, 1.0);
  setenv("LC_PNP_THREADS", "1", 1);
  const Matrix6d serial = monte_carlo_pose_cov(s, 0.5, 200, 11);
  setenv("LC_PNP_THREADS", "4", 1);
  const Matrix6d parallel = monte_carlo_pose_cov(s, 0.5, 200, 11);
  unsetenv("LC_PNP_THREADS");
  CHECK((serial - parallel).norm() == 0.0);
}

TEST_CASE("add metrics basics") {
  const SceneSample s = test::make_scene(21, 32, 1.0);
  const double diam = s.diameter();

  const AddMetrics same =
      add_metrics(s.y_gt, s.y_gt, s.model_points, diam, false);
  CHECK(same.add == doctest::Approx(0.0));
  CHECK(same.recall_ok);

  RigidPose shifted = s.y_gt;
  shifted.translation += Eigen::Vector3d(0.03, 0.0, 0.0);
  const AddMetrics off =
      add_metrics(shifted, s.y_gt, s.model_points, diam, false);
  CHECK(off.add == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("symmetric ADD never exceeds the asymmetric one") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const SceneSample s = test::make_scene(600 + trial, 16, 1.0);
    RigidPose pred = s.y_gt;
    pred.rotation = test::random_rotation(rng) * pred.rotation;
    pred.translation += test::random_vec3(rng, 0.1);
    const double diam = s.diameter();
    const AddMetrics plain =
        add_metrics(pred, s.y_gt, s.model_points, diam, false);
    const AddMetrics sym =
        add_metrics(pred, s.y_gt, s.model_points, diam, true);
    CHECK(sym.add <= plain.add + 1e-15);
  }
}

TEST_CASE("bad scene configs are rejected") {
  SceneConfig cfg;
  cfg.n_points = 3;
  CHECK_THROWS_AS(gen_scene(cfg), InvalidArgument);
  cfg = SceneConfig{};
  cfg.outlier_frac = 1.0;
  CHECK_THROWS_AS(gen_scene(cfg), InvalidArgument);
  cfg = SceneConfig{};
  cfg.depth_range = {5.0, 4.0};
  CHECK_THROWS_AS(gen_scene(cfg), InvalidArgument);
}
