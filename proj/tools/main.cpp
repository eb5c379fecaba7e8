// Command line front end: deterministic experiment orchestration over the
// library. Every subcommand is a pure function of its inputs, flags and
// seed; outputs are written atomically.

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lcpnp/covariance.hpp"
#include "lcpnp/encoding.hpp"
#include "lcpnp/errors.hpp"
#include "lcpnp/harness.hpp"
#include "lcpnp/io.hpp"
#include "lcpnp/linearize.hpp"
#include "lcpnp/loss.hpp"
#include "lcpnp/pnp.hpp"

namespace {

using nlohmann::json;
using namespace lcpnp;

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    if (content.empty() || content.back() != '\n') std::cout << '\n';
  } else {
    write_text_atomic(path, content);
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

PoseRepresentation representation_for(const std::string& name,
                                      const SceneDocument& doc) {
  const auto need_bbox = [&]() -> std::array<Eigen::Vector3d, 8> {
    if (!doc.bbox) throw MissingBBox("this representation needs a bbox");
    return *doc.bbox;
  };
  if (name == "corners3d") return PoseRepresentation::corners3d(need_bbox());
  if (name == "corners2d") {
    return PoseRepresentation::corners2d(need_bbox(), doc.corrs.intrinsics);
  }
  PoseRepresentation rep;
  if (name == "quat") {
    rep.kind = RepKind::QuaternionTrans;
  } else if (name == "axisangle") {
    rep.kind = RepKind::AxisAngleTrans;
  } else if (name == "twocol") {
    rep.kind = RepKind::TwoColumnTrans;
  } else {
    throw InvalidArgument("unknown representation '" + name + "'");
  }
  return rep;
}

ExperimentConfig load_experiment(const std::string& config_path,
                                 const std::vector<std::string>& overrides,
                                 std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = experiment_from_json(load_json_file(config_path));
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  if (seed) cfg.scene.seed = *seed;
  return cfg;
}

int cmd_solve(const std::string& input, const std::string& output,
              bool use_ransac, double inlier_px, std::uint64_t seed) {
  const SceneDocument doc = scene_from_json(load_json_file(input));
  RansacParams params;
  params.inlier_px = inlier_px;
  params.seed = seed;
  const RansacResult rr = solve_ransac(doc.corrs, params);

  // With --ransac the weighted refinement runs on the consensus set only;
  // otherwise outlier handling is left to the document's weights.
  CorrespondenceSet refine_set = doc.corrs;
  if (use_ransac) {
    std::vector<int> consensus;
    for (int i = 0; i < doc.corrs.size(); ++i) {
      if (rr.inlier_mask[i]) consensus.push_back(i);
    }
    refine_set = doc.corrs.subset(consensus);
  }
  const SolveResult sr = solve_weighted(refine_set, rr.pose);
  const RigidPose pose = sr.pose;

  json out;
  out["iters"] = sr.iters;
  out["final_nll"] = sr.final_nll;
  if (use_ransac) {
    json mask = json::array();
    for (const bool b : rr.inlier_mask) mask.push_back(b);
    out["inlier_mask"] = mask;
  }
  out["pose"] = to_json(pose);
  if (doc.gt_pose) {
    out["rotation_frobenius_error"] =
        (pose.rotation - doc.gt_pose->rotation).norm();
    const double c = std::clamp(
        ((pose.rotation * doc.gt_pose->rotation.transpose()).trace() - 1.0) /
            2.0,
        -1.0, 1.0);
    out["rotation_error_deg"] = std::acos(c) * 180.0 / std::numbers::pi;
    out["translation_error"] =
        (pose.translation - doc.gt_pose->translation).norm();
  }
  emit(output, dump(out));
  return 0;
}

int cmd_loss(const std::string& input, const std::string& output,
             const std::string& rep_name, const std::string& dist_name) {
  const SceneDocument doc = scene_from_json(load_json_file(input));
  if (!doc.gt_pose) throw InvalidArgument("loss: input needs gt_pose");
  LossConfig cfg;
  cfg.representation = representation_for(rep_name, doc);
  cfg.distribution =
      dist_name == "gaussian" ? Distribution::Gaussian : Distribution::Laplace;
  if (!(dist_name == "gaussian" || dist_name == "laplace")) {
    throw InvalidArgument("distribution must be laplace or gaussian");
  }
  const LossBreakdown b = lc_loss(doc.corrs, *doc.gt_pose, cfg);
  emit(output, dump(to_json(b)));
  return 0;
}

int cmd_simulate(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 std::optional<std::uint64_t> seed, const std::string& output,
                 const std::string& summary_path) {
  const ExperimentConfig cfg = load_experiment(config_path, overrides, seed);
  const SceneSample scene = gen_scene(cfg.scene);
  const TrainTrace trace =
      toy_train(scene, cfg.loss_kind, cfg.steps, cfg.lr, cfg.clip);
  emit(output, trace_to_csv(trace));

  int tail = std::min<int>(100, static_cast<int>(trace.records.size()));
  double mean_corr = 0.0;
  int failures = 0;
  for (const auto& r : trace.records) failures += r.solver_failure ? 1 : 0;
  for (std::size_t s = trace.records.size() - tail; s < trace.records.size();
       ++s) {
    mean_corr += trace.records[s].correctness;
  }
  mean_corr /= tail;
  json summary = {
      {"steps", cfg.steps},
      {"final_loss", trace.records.back().loss},
      {"mean_correctness_last_100", mean_corr},
      {"final_rot_err_deg", trace.records.back().rot_err_deg},
      {"final_trans_err", trace.records.back().trans_err},
      {"final_add", trace.records.back().add},
      {"solver_failures", failures},
  };
  if (!summary_path.empty()) emit(summary_path, dump(summary));
  return 0;
}

int cmd_correctness(const std::string& config_path,
                    const std::vector<std::string>& overrides,
                    std::optional<std::uint64_t> seed, double step,
                    const std::string& output) {
  const ExperimentConfig cfg = load_experiment(config_path, overrides, seed);
  const SceneSample scene = gen_scene(cfg.scene);
  LossConfig lcfg;
  lcfg.representation = PoseRepresentation::corners3d(scene.bbox);
  lcfg.distribution = cfg.distribution;
  const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, lcfg);
  const LinearizationResult lin = linearize_at_gt(scene.corrs, scene.y_gt);
  const double frac =
      gradient_correctness(scene.corrs, b.grad_x, lin.x_p, step);
  const json out = {{"correctness", frac},
                    {"step", step},
                    {"n_points", cfg.scene.n_points},
                    {"seed", cfg.scene.seed}};
  emit(output, dump(out));
  return 0;
}

int cmd_mc_cov(const std::string& config_path,
               const std::vector<std::string>& overrides,
               std::optional<std::uint64_t> seed, int samples, double sigma,
               const std::string& output) {
  const ExperimentConfig cfg = load_experiment(config_path, overrides, seed);
  const SceneSample scene = gen_scene(cfg.scene);
  const LinearizationResult lin = linearize_at_gt(scene.corrs, scene.y_gt);
  const Matrix6d analytic = pose_cov(
      lin.A, Eigen::VectorXd::Constant(2 * scene.corrs.size(),
                                       sigma * sigma));
  int failures = 0;
  const Matrix6d empirical =
      monte_carlo_pose_cov(scene, sigma, samples, cfg.scene.seed, &failures);
  const auto mat_to_json = [](const Matrix6d& m) {
    json arr = json::array();
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) arr.push_back(m(r, c));
    }
    return arr;
  };
  const json out = {
      {"analytic", mat_to_json(analytic)},
      {"empirical", mat_to_json(empirical)},
      {"rel_frobenius_error", (analytic - empirical).norm() / analytic.norm()},
      {"samples", samples},
      {"skipped", failures},
      {"sigma_px", sigma},
  };
  emit(output, dump(out));
  return 0;
}

int cmd_encode(std::optional<double> value, double c_min, double c_max,
               int bits, const std::vector<double>& sizes, int n_max,
               const std::string& output) {
  json out;
  if (!sizes.empty()) {
    if (sizes.size() != 3) {
      throw InvalidArgument("encode: --sizes needs exactly 3 values");
    }
    const auto alloc =
        allocate_bits({sizes[0], sizes[1], sizes[2]}, n_max);
    out["bit_allocation"] = {alloc[0], alloc[1], alloc[2]};
  }
  if (value) {
    const ComponentCodec codec{c_min, c_max, bits};
    const auto encoded = encode_component(*value, codec);
    out["bits"] = encoded;
    out["normalized"] = normalize_component(*value, codec);
    out["decoded_integer"] = decode_bits(encoded);
  }
  if (out.empty()) {
    throw InvalidArgument("encode: give --value and/or --sizes");
  }
  emit(output, dump(out));
  return 0;
}

int cmd_demo_averaging(double a1, double a2, double a,
                       const std::string& output) {
  const AveragingResult r = averaging_demo({a1, a2}, a);
  const json out = {{"grads", {r.grads[0], r.grads[1]}},
                    {"correct", {r.correct[0], r.correct[1]}},
                    {"a_hats", {a1, a2}},
                    {"a", a}};
  emit(output, dump(out));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear-covariance PnP toolkit"};
  app.require_subcommand(1);

  std::string input, output, summary, config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  auto* solve = app.add_subcommand("solve", "solve pose from a scene JSON");
  bool use_ransac = false;
  double inlier_px = 2.0;
  std::uint64_t solve_seed = 0;
  solve->add_option("--input,-i", input, "scene JSON")->required();
  solve->add_option("--output,-o", output, "output JSON (default stdout)");
  solve->add_flag("--ransac", use_ransac,
                  "report the RANSAC consensus mask as well");
  solve->add_option("--inlier-px", inlier_px, "RANSAC inlier threshold");
  solve->add_option("--seed", solve_seed, "RANSAC seed");

  auto* loss = app.add_subcommand("loss", "LC loss breakdown for a scene");
  std::string rep_name = "corners3d";
  std::string dist_name = "laplace";
  loss->add_option("--input,-i", input, "scene JSON with gt_pose")->required();
  loss->add_option("--output,-o", output, "output JSON (default stdout)");
  loss->add_option("--rep", rep_name,
                   "corners3d|corners2d|quat|axisangle|twocol");
  loss->add_option("--dist", dist_name, "laplace|gaussian");

  auto* simulate = app.add_subcommand("simulate", "toy descent experiment");
  simulate->add_option("--config", config, "experiment config JSON");
  simulate->add_option("--set", overrides, "config override key=value");
  simulate->add_option("--seed", seed, "scene seed override");
  simulate->add_option("--output,-o", output, "trace CSV path")->required();
  simulate->add_option("--summary", summary, "summary JSON path");

  auto* correct = app.add_subcommand(
      "correctness", "gradient correctness of the LC loss on a scene");
  double corr_step = 1e-3;
  correct->add_option("--config", config, "experiment config JSON");
  correct->add_option("--set", overrides, "config override key=value");
  correct->add_option("--seed", seed, "scene seed override");
  correct->add_option("--step", corr_step, "probe step size");
  correct->add_option("--output,-o", output, "output JSON (default stdout)");

  auto* mc = app.add_subcommand("mc-cov",
                                "Monte-Carlo check of the pose covariance");
  int samples = 20000;
  double sigma = 0.5;
  mc->add_option("--config", config, "experiment config JSON");
  mc->add_option("--set", overrides, "config override key=value");
  mc->add_option("--seed", seed, "scene seed override");
  mc->add_option("--samples", samples, "number of resamples");
  mc->add_option("--sigma", sigma, "noise sigma in pixels");
  mc->add_option("--output,-o", output, "output JSON (default stdout)");

  auto* encode = app.add_subcommand("encode", "binary coordinate codec");
  std::optional<double> enc_value;
  double c_min = 0.0, c_max = 1.0;
  int enc_bits = 7, n_max = 7;
  std::vector<double> sizes;
  encode->add_option("--value", enc_value, "coordinate to encode");
  encode->add_option("--min", c_min, "component minimum");
  encode->add_option("--max", c_max, "component maximum");
  encode->add_option("--bits", enc_bits, "bit count");
  encode->add_option("--sizes", sizes, "3 span sizes for bit allocation")
      ->expected(0, 3);
  encode->add_option("--nmax", n_max, "bits for the largest component");
  encode->add_option("--output,-o", output, "output JSON (default stdout)");

  auto* demo = app.add_subcommand("demo-averaging",
                                  "two-estimate averaging gradient demo");
  double a1 = 0.4, a2 = 0.8, a_true = 0.5;
  demo->add_option("--a1", a1, "first estimate");
  demo->add_option("--a2", a2, "second estimate");
  demo->add_option("--a", a_true, "true value");
  demo->add_option("--output,-o", output, "output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0, usage errors exit 2
  }

  try {
    if (solve->parsed()) {
      return cmd_solve(input, output, use_ransac, inlier_px, solve_seed);
    }
    if (loss->parsed()) return cmd_loss(input, output, rep_name, dist_name);
    if (simulate->parsed()) {
      return cmd_simulate(config, overrides, seed, output, summary);
    }
    if (correct->parsed()) {
      return cmd_correctness(config, overrides, seed, corr_step, output);
    }
    if (mc->parsed()) {
      return cmd_mc_cov(config, overrides, seed, samples, sigma, output);
    }
    if (encode->parsed()) {
      return cmd_encode(enc_value, c_min, c_max, enc_bits, sizes, n_max,
                        output);
    }
    if (demo->parsed()) return cmd_demo_averaging(a1, a2, a_true, output);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
