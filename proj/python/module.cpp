#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lcpnp/covariance.hpp"
#include "lcpnp/encoding.hpp"
#include "lcpnp/errors.hpp"
#include "lcpnp/geometry.hpp"
#include "lcpnp/harness.hpp"
#include "lcpnp/linearize.hpp"
#include "lcpnp/loss.hpp"
#include "lcpnp/pnp.hpp"

namespace py = pybind11;
using namespace lcpnp;

namespace {

PoseRepresentation make_representation(
    const std::string& kind,
    const std::optional<std::array<Eigen::Vector3d, 8>>& bbox,
    const std::optional<CameraIntrinsics>& intrinsics) {
  PoseRepresentation rep;
  if (kind == "corners3d") {
    rep.kind = RepKind::Corners3D;
  } else if (kind == "corners2d") {
    rep.kind = RepKind::Corners2D;
  } else if (kind == "quat") {
    rep.kind = RepKind::QuaternionTrans;
  } else if (kind == "axisangle") {
    rep.kind = RepKind::AxisAngleTrans;
  } else if (kind == "twocol") {
    rep.kind = RepKind::TwoColumnTrans;
  } else {
    throw InvalidArgument("unknown representation kind '" + kind + "'");
  }
  rep.bbox = bbox;
  rep.intrinsics = intrinsics;
  return rep;
}

}  // namespace

PYBIND11_MODULE(lcpnp, m) {
  m.doc() = "Linear-covariance loss toolkit for weighted PnP pose estimation";

  py::register_exception<Error>(m, "LcpnpError");

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<double, double, double, double>(), py::arg("fx"),
           py::arg("fy"), py::arg("cx"), py::arg("cy"))
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy);

  py::class_<RigidPose>(m, "RigidPose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
             return RigidPose{R, t};
           }),
           py::arg("rotation"), py::arg("translation"))
      .def_readwrite("rotation", &RigidPose::rotation)
      .def_readwrite("translation", &RigidPose::translation)
      .def("apply", &RigidPose::apply)
      .def("orthonormality_error", &RigidPose::orthonormality_error);

  py::class_<LocalPose6>(m, "LocalPose6")
      .def_readwrite("omega", &LocalPose6::omega)
      .def_readwrite("tau", &LocalPose6::tau)
      .def_readwrite("reference", &LocalPose6::reference)
      .def("compose", &LocalPose6::compose)
      .def("vector", &LocalPose6::vector)
      .def_static("identity_at", &LocalPose6::identity_at);

  py::class_<CorrespondenceSet>(m, "CorrespondenceSet")
      .def(py::init([](const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                       const Eigen::VectorXd& w, const CameraIntrinsics& K) {
             CorrespondenceSet c{x, z, w, K};
             c.validate();
             return c;
           }),
           py::arg("x"), py::arg("z"), py::arg("w"), py::arg("intrinsics"))
      .def_readwrite("x", &CorrespondenceSet::x)
      .def_readwrite("z", &CorrespondenceSet::z)
      .def_readwrite("w", &CorrespondenceSet::w)
      .def_readwrite("intrinsics", &CorrespondenceSet::intrinsics)
      .def("__len__", &CorrespondenceSet::size);

  m.def("exp_so3", &exp_so3, py::arg("omega"));
  m.def("log_so3", &log_so3, py::arg("R"));
  m.def(
      "project",
      [](const Eigen::Vector3d& z, const RigidPose& pose,
         const CameraIntrinsics& K) {
        const Projection p = project(z, pose, K);
        return py::make_tuple(p.uv, p.J_pose, p.J_point);
      },
      py::arg("z"), py::arg("pose"), py::arg("intrinsics"),
      "Returns (uv, J_pose, J_point)");
  m.def(
      "represent",
      [](const LocalPose6& pose, const std::string& kind,
         const std::optional<std::array<Eigen::Vector3d, 8>>& bbox,
         const std::optional<CameraIntrinsics>& intrinsics) {
        const Represented r =
            represent(pose, make_representation(kind, bbox, intrinsics));
        return py::make_tuple(r.y, r.J);
      },
      py::arg("pose"), py::arg("kind"), py::arg("bbox") = std::nullopt,
      py::arg("intrinsics") = std::nullopt, "Returns (y, J)");
  m.def("box_corners", &box_corners, py::arg("half_extents"));

  m.def("nll", &nll, py::arg("corrs"), py::arg("pose"));
  m.def(
      "solve_weighted",
      [](const CorrespondenceSet& corrs, const RigidPose& init, int max_iters,
         double step_tol, std::optional<double> huber_delta) {
        SolverConfig cfg;
        cfg.max_iters = max_iters;
        cfg.step_tol = step_tol;
        cfg.huber_delta = huber_delta;
        const SolveResult r = solve_weighted(corrs, init, cfg);
        return py::make_tuple(r.pose, r.iters, r.final_nll,
                              r.status == SolveStatus::Converged);
      },
      py::arg("corrs"), py::arg("init"), py::arg("max_iters") = 100,
      py::arg("step_tol") = 1e-10, py::arg("huber_delta") = std::nullopt,
      "Returns (pose, iters, final_nll, converged)");
  m.def(
      "solve_ransac",
      [](const CorrespondenceSet& corrs, int iters, double inlier_px,
         std::uint64_t seed) {
        RansacParams params;
        params.iters = iters;
        params.inlier_px = inlier_px;
        params.seed = seed;
        const RansacResult r = solve_ransac(corrs, params);
        return py::make_tuple(r.pose, r.inlier_mask);
      },
      py::arg("corrs"), py::arg("iters") = 256, py::arg("inlier_px") = 2.0,
      py::arg("seed") = 0, "Returns (pose, inlier_mask)");

  py::class_<LinearizationResult>(m, "LinearizationResult")
      .def_readonly("x_p", &LinearizationResult::x_p)
      .def_readonly("r_gt", &LinearizationResult::r_gt)
      .def_readonly("H", &LinearizationResult::H)
      .def_readonly("A", &LinearizationResult::A)
      .def_readonly("y_gt_ref", &LinearizationResult::y_gt_ref);
  m.def(
      "linearize_at_gt",
      [](const CorrespondenceSet& corrs, const RigidPose& y_gt) {
        return linearize_at_gt(corrs, y_gt);
      },
      py::arg("corrs"), py::arg("y_gt"));
  m.def("predict_pose_linear", &predict_pose_linear, py::arg("lin"));

  m.def(
      "residual_cov",
      [](const Eigen::VectorXd& r) { return residual_cov(r); },
      py::arg("r_gt"));
  m.def("pose_cov", &pose_cov, py::arg("A"), py::arg("M_diag"));
  m.def("transform_cov_diag", &transform_cov_diag, py::arg("C6"),
        py::arg("J"));
  m.def("prior_cov", &prior_cov, py::arg("H"));

  py::class_<LossBreakdown>(m, "LossBreakdown")
      .def_readonly("e_cov", &LossBreakdown::e_cov)
      .def_readonly("e_prior", &LossBreakdown::e_prior)
      .def_readonly("e_linear", &LossBreakdown::e_linear)
      .def_readonly("l_lc", &LossBreakdown::l_lc)
      .def_readonly("grad_w", &LossBreakdown::grad_w)
      .def_readonly("grad_x", &LossBreakdown::grad_x);
  m.def(
      "corner_norm_mean",
      [](const Eigen::VectorXd& d, int group_size, double sqrt_eps) {
        return corner_norm_mean({d.data(), d.data() + d.size()}, group_size,
                                sqrt_eps);
      },
      py::arg("d"), py::arg("group_size"), py::arg("sqrt_eps") = 1e-12);
  m.def(
      "lc_combine",
      [](double e_cov, double e_prior, double e_linear,
         const std::string& distribution) {
        return lc_combine(e_cov, e_prior, e_linear,
                          distribution == "gaussian" ? Distribution::Gaussian
                                                     : Distribution::Laplace);
      },
      py::arg("e_cov"), py::arg("e_prior"), py::arg("e_linear"),
      py::arg("distribution") = "laplace");
  m.def(
      "lc_loss",
      [](const CorrespondenceSet& corrs, const RigidPose& y_gt,
         const std::string& kind,
         const std::optional<std::array<Eigen::Vector3d, 8>>& bbox,
         const std::string& distribution, double sqrt_eps) {
        LossConfig cfg;
        cfg.representation = make_representation(
            kind, bbox,
            kind == "corners2d" ? std::optional(corrs.intrinsics)
                                : std::nullopt);
        cfg.distribution = distribution == "gaussian" ? Distribution::Gaussian
                                                      : Distribution::Laplace;
        cfg.sqrt_eps = sqrt_eps;
        return lc_loss(corrs, y_gt, cfg);
      },
      py::arg("corrs"), py::arg("y_gt"), py::arg("kind") = "corners3d",
      py::arg("bbox") = std::nullopt, py::arg("distribution") = "laplace",
      py::arg("sqrt_eps") = 1e-12);

  m.def(
      "allocate_bits",
      [](const std::array<double, 3>& sizes, int n_max) {
        return allocate_bits(sizes, n_max);
      },
      py::arg("sizes"), py::arg("n_max") = 7);
  m.def(
      "encode_component",
      [](double c, double c_min, double c_max, int n_bits) {
        return encode_component(c, ComponentCodec{c_min, c_max, n_bits});
      },
      py::arg("c"), py::arg("c_min"), py::arg("c_max"), py::arg("n_bits"));
  m.def(
      "decode_soft",
      [](const std::vector<double>& probs,
         const std::optional<std::vector<int>>& gt) {
        return decode_soft(probs, gt);
      },
      py::arg("bit_probs"), py::arg("gt_bits") = std::nullopt);

  py::class_<SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("n_points", &SceneConfig::n_points)
      .def_readwrite("bbox_half_extents", &SceneConfig::bbox_half_extents)
      .def_readwrite("intrinsics", &SceneConfig::intrinsics)
      .def_readwrite("noise_px", &SceneConfig::noise_px)
      .def_readwrite("outlier_frac", &SceneConfig::outlier_frac)
      .def_readwrite("depth_range", &SceneConfig::depth_range)
      .def_readwrite("seed", &SceneConfig::seed);
  py::class_<SceneSample>(m, "SceneSample")
      .def_readonly("corrs", &SceneSample::corrs)
      .def_readonly("y_gt", &SceneSample::y_gt)
      .def_readonly("bbox", &SceneSample::bbox)
      .def_readonly("model_points", &SceneSample::model_points)
      .def_readonly("outlier_mask", &SceneSample::outlier_mask)
      .def("diameter", &SceneSample::diameter);
  m.def("gen_scene", &gen_scene, py::arg("config"));
  m.def("gradient_correctness", &gradient_correctness, py::arg("corrs"),
        py::arg("grad_x"), py::arg("x_p"), py::arg("step"));
  m.def(
      "averaging_demo",
      [](double a1, double a2, double a) {
        const AveragingResult r = averaging_demo({a1, a2}, a);
        return py::make_tuple(r.grads, r.correct);
      },
      py::arg("a1"), py::arg("a2"), py::arg("a"),
      "Returns (grads, correct)");
  m.def(
      "monte_carlo_pose_cov",
      [](const SceneSample& scene, double sigma_px, int samples,
         std::uint64_t seed) {
        return monte_carlo_pose_cov(scene, sigma_px, samples, seed);
      },
      py::arg("scene"), py::arg("sigma_px"), py::arg("samples"),
      py::arg("seed") = 0);
  m.def(
      "add_metrics",
      [](const RigidPose& pred, const RigidPose& gt,
         const std::vector<Eigen::Vector3d>& pts, double diameter,
         bool symmetric) {
        const AddMetrics r = add_metrics(pred, gt, pts, diameter, symmetric);
        return py::make_tuple(r.add, r.recall_ok);
      },
      py::arg("pred"), py::arg("gt"), py::arg("model_points"),
      py::arg("diameter"), py::arg("symmetric") = false,
      "Returns (add, recall_ok)");
  m.def(
      "toy_train",
      [](const SceneSample& scene, const std::string& kind, int steps,
         double lr) {
        LossKind k = LossKind::LC;
        if (kind == "bpnp") {
          k = LossKind::BPnPStyle;
        } else if (kind == "surrogate") {
          k = LossKind::SurrogateOnly;
        } else if (kind != "lc") {
          throw InvalidArgument("loss kind must be lc, bpnp or surrogate");
        }
        const TrainTrace trace = toy_train(scene, k, steps, lr);
        py::list records;
        for (const TrainStep& r : trace.records) {
          py::dict d;
          d["loss"] = r.loss;
          d["correctness"] = r.correctness;
          d["rot_err_deg"] = r.rot_err_deg;
          d["trans_err"] = r.trans_err;
          d["add"] = r.add;
          d["solver_failure"] = r.solver_failure;
          records.append(d);
        }
        return records;
      },
      py::arg("scene"), py::arg("kind") = "lc", py::arg("steps") = 500,
      py::arg("lr") = 0.5);
}
