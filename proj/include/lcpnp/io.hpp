#pragma once

#include <array>
#include <optional>
#include <string>

#include <json.hpp>

#include "lcpnp/harness.hpp"
#include "lcpnp/loss.hpp"
#include "lcpnp/pnp.hpp"

namespace lcpnp {

/// On-disk scene document:
/// { "intrinsics": {fx, fy, cx, cy},
///   "points": [{"x": [u, v], "z": [X, Y, Z], "w": [wu, wv]}, ...],
///   "gt_pose": {"rotation": [9 row-major], "translation": [3]},   (optional)
///   "bbox": [[x, y, z] * 8] }                                      (optional)
struct SceneDocument {
  CorrespondenceSet corrs;
  std::optional<RigidPose> gt_pose;
  std::optional<std::array<Eigen::Vector3d, 8>> bbox;

  static SceneDocument from_sample(const SceneSample& s);
};

nlohmann::json to_json(const CameraIntrinsics& K);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RigidPose& pose);
RigidPose pose_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SceneDocument& doc);
SceneDocument scene_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LossBreakdown& b);

/// Scene generation and toy-training knobs read by the CLI. Unknown keys
/// are rejected up front.
struct ExperimentConfig {
  SceneConfig scene;
  LossKind loss_kind = LossKind::LC;
  int steps = 500;
  double lr = 0.05;
  ClipConfig clip;
  Distribution distribution = Distribution::Laplace;
  // Mixing weights for composite surrogate + pose losses, named after the
  // dense/sparse baselines they weight. Plain toy runs ignore them.
  double alpha_gdr = 0.25;
  double alpha_zebra = 3.0;
  double beta_gdr = 0.02;
  double beta_zebra = 0.03;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// Apply a "key=value" override; throws InvalidArgument on unknown keys or
/// unparsable values.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

std::string trace_to_csv(const TrainTrace& trace);

/// Serialize with 17 significant digits so repeated runs are byte-equal.
std::string format_double(double v);

/// Parse a whole file as JSON; throws IoError with the path on failure.
nlohmann::json load_json_file(const std::string& path);

/// Atomic write: temp file in the same directory, then rename.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace lcpnp
