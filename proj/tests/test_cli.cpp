#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lcpnp/errors.hpp"
#include "lcpnp/harness.hpp"
#include "lcpnp/io.hpp"
#include "lcpnp/loss.hpp"
#include "support/test_util.hpp"

using namespace lcpnp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("LCPNP_CLI");
  return env ? env : "";
}

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

RunResult run_cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "lcpnp_cli_stdout.txt";
  const std::string cmd =
      cli_path() + " " + args + " > " + out.string() + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WEXITSTATUS(rc);
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  res.stdout_text = ss.str();
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_scene_file(const SceneSample& scene, const std::string& name) {
  const fs::path path = fs::temp_directory_path() / name;
  write_text_atomic(path.string(),
                    to_json(SceneDocument::from_sample(scene)).dump(2));
  return path;
}

}  // namespace

TEST_CASE("scene documents round-trip through JSON") {
  const SceneSample scene = test::make_scene(3, 12, 1.0, 0.1);
  const SceneDocument doc = SceneDocument::from_sample(scene);
  const SceneDocument back = scene_from_json(to_json(doc));
  CHECK(back.corrs.x == doc.corrs.x);
  CHECK(back.corrs.z == doc.corrs.z);
  CHECK(back.corrs.w == doc.corrs.w);
  REQUIRE(back.gt_pose.has_value());
  CHECK(back.gt_pose->rotation == doc.gt_pose->rotation);
  CHECK(back.gt_pose->translation == doc.gt_pose->translation);
  REQUIRE(back.bbox.has_value());
  for (int i = 0; i < 8; ++i) CHECK((*back.bbox)[i] == (*doc.bbox)[i]);
}

TEST_CASE("schema violations fail before computation") {
  CHECK_THROWS_AS(scene_from_json(json{{"points", json::array()}}), IoError);
  CHECK_THROWS_AS(
      scene_from_json(json{{"intrinsics", {{"fx", 1.0}}},
                           {"points", json::array()}}),
      IoError);
  json bad_rot = {{"intrinsics",
                   {{"fx", 1.0}, {"fy", 1.0}, {"cx", 0.0}, {"cy", 0.0}}},
                  {"points",
                   json::array({{{"x", {0.0, 0.0}}, {"z", {0.0, 0.0, 1.0}}}})},
                  {"gt_pose",
                   {{"rotation", {2, 0, 0, 0, 1, 0, 0, 0, 1}},
                    {"translation", {0, 0, 0}}}}};
  CHECK_THROWS_AS(scene_from_json(bad_rot), IoError);
}

TEST_CASE("experiment config rejects unknown keys") {
  CHECK_THROWS_AS(experiment_from_json(json{{"bogus", 1}}), IoError);
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_override(cfg, "nope=1"), InvalidArgument);
  CHECK_THROWS_AS(apply_override(cfg, "no-equals"), InvalidArgument);
  apply_override(cfg, "noise_px=2.5");
  CHECK(cfg.scene.noise_px == doctest::Approx(2.5));
  apply_override(cfg, "loss=bpnp");
  CHECK(cfg.loss_kind == LossKind::BPnPStyle);
}

TEST_CASE("trace CSV uses the fixed column layout") {
  TrainTrace trace;
  trace.records.resize(2);
  trace.records[0].loss = 1.5;
  trace.records[1].correctness = 0.25;
  const std::string csv = trace_to_csv(trace);
  CHECK(csv.starts_with("step,loss,correctness,rot_err_deg,trans_err,add\n"));
  CHECK(csv.find("\n0,1.5,0,0,0,0\n") != std::string::npos);
  CHECK(csv.find("\n1,0,0.25,0,0,0\n") != std::string::npos);
}

TEST_CASE("atomic writes leave no temp file behind") {
  const fs::path target = fs::temp_directory_path() / "lcpnp_atomic.txt";
  write_text_atomic(target.string(), "payload");
  CHECK(slurp(target) == "payload");
  CHECK_FALSE(fs::exists(target.string() + ".tmp"));
  fs::remove(target);
}

TEST_CASE("cli loss output reproduces the library result" *
          doctest::skip(cli_path().empty())) {
  const SceneSample scene = test::make_scene(5, 12, 1.5);
  const fs::path scene_path = write_scene_file(scene, "lcpnp_scene.json");

  const RunResult run = run_cli("loss --input " + scene_path.string());
  REQUIRE(run.exit_code == 0);
  const json out = json::parse(run.stdout_text);

  LossConfig cfg;
  cfg.representation = PoseRepresentation::corners3d(scene.bbox);
  const LossBreakdown b = lc_loss(scene.corrs, scene.y_gt, cfg);
  CHECK(out["l_lc"].get<double>() == doctest::Approx(b.l_lc).epsilon(1e-12));
  CHECK(out["e_cov"].get<double>() ==
        doctest::Approx(b.e_cov).epsilon(1e-12));
  for (int j = 0; j < 2 * scene.corrs.size(); ++j) {
    CHECK(out["grad_x"][j].get<double>() ==
          doctest::Approx(b.grad_x[j]).epsilon(1e-12));
    CHECK(out["grad_w"][j].get<double>() ==
          doctest::Approx(b.grad_w[j]).epsilon(1e-12));
  }
  fs::remove(scene_path);
}

TEST_CASE("cli solve reports near-zero error on a noise-free scene" *
          doctest::skip(cli_path().empty())) {
  const SceneSample scene = test::make_scene(6, 16, 0.0);
  const fs::path scene_path = write_scene_file(scene, "lcpnp_clean.json");
  const RunResult run =
      run_cli("solve --input " + scene_path.string() + " --seed 9");
  REQUIRE(run.exit_code == 0);
  const json out = json::parse(run.stdout_text);
  CHECK(out["rotation_frobenius_error"].get<double>() < 1e-8);
  CHECK(out["translation_error"].get<double>() < 1e-8);
  fs::remove(scene_path);
}

TEST_CASE("cli simulate is byte-identical across runs" *
          doctest::skip(cli_path().empty())) {
  const fs::path dir = fs::temp_directory_path();
  const fs::path csv_a = dir / "lcpnp_trace_a.csv";
  const fs::path csv_b = dir / "lcpnp_trace_b.csv";
  const std::string common =
      "simulate --seed 11 --set steps=20 --set n_points=16 --summary ";
  const RunResult a = run_cli(common + (dir / "sum_a.json").string() +
                              " -o " + csv_a.string());
  const RunResult b = run_cli(common + (dir / "sum_b.json").string() +
                              " -o " + csv_b.string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(csv_a) == slurp(csv_b));
  CHECK(slurp(dir / "sum_a.json") == slurp(dir / "sum_b.json"));
  for (const auto& p : {csv_a, csv_b, dir / "sum_a.json", dir / "sum_b.json"})
    fs::remove(p);
}

TEST_CASE("cli exit codes distinguish usage from computation errors" *
          doctest::skip(cli_path().empty())) {
  CHECK(run_cli("--bogus").exit_code == 2);
  CHECK(run_cli("loss").exit_code == 2);  // missing required --input
  CHECK(run_cli("mc-cov --samples 0 --seed 1").exit_code == 1);
  CHECK(run_cli("encode").exit_code == 1);  // no value, no sizes
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("cli encode matches the codec" *
          doctest::skip(cli_path().empty())) {
  const RunResult run = run_cli(
      "encode --value 0.5 --min 0 --max 1 --bits 3 --sizes 80 40 10 "
      "--nmax 7");
  REQUIRE(run.exit_code == 0);
  const json out = json::parse(run.stdout_text);
  CHECK(out["bit_allocation"] == json({7, 6, 4}));
  CHECK(out["bits"] == json({1, 0, 0}));  // round(0.5 * 7) = 4
  CHECK(out["decoded_integer"].get<double>() == 4.0);
}

TEST_CASE("cli averaging demo flags the straddling estimate" *
          doctest::skip(cli_path().empty())) {
  const RunResult run = run_cli("demo-averaging --a1 0.4 --a2 0.8 --a 0.5");
  REQUIRE(run.exit_code == 0);
  const json out = json::parse(run.stdout_text);
  CHECK(out["grads"][0].get<double>() == doctest::Approx(0.5));
  CHECK(out["correct"][0].get<bool>() == false);
  CHECK(out["correct"][1].get<bool>() == true);
}
