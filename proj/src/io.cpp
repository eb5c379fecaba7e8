#include "lcpnp/io.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lcpnp/errors.hpp"

namespace lcpnp {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw IoError(std::string("missing JSON key '") + key + "'");
  }
  return *it;
}

double require_number(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) {
    throw IoError(std::string("JSON key '") + key + "' must be a number");
  }
  return v.get<double>();
}

Eigen::Vector3d vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw IoError(std::string(what) + " must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

SceneDocument SceneDocument::from_sample(const SceneSample& s) {
  SceneDocument doc;
  doc.corrs = s.corrs;
  doc.gt_pose = s.y_gt;
  doc.bbox = s.bbox;
  return doc;
}

json to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics K;
  K.fx = require_number(j, "fx");
  K.fy = require_number(j, "fy");
  K.cx = require_number(j, "cx");
  K.cy = require_number(j, "cy");
  if (!(K.fx > 0.0) || !(K.fy > 0.0)) {
    throw IoError("intrinsics: focal lengths must be positive");
  }
  return K;
}

json to_json(const RigidPose& pose) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  }
  json tr = json::array();
  for (int i = 0; i < 3; ++i) tr.push_back(pose.translation[i]);
  return {{"rotation", rot}, {"translation", tr}};
}

RigidPose pose_from_json(const json& j) {
  const json& rot = require(j, "rotation");
  const json& tr = require(j, "translation");
  if (!rot.is_array() || rot.size() != 9) {
    throw IoError("pose: rotation must be 9 row-major numbers");
  }
  if (!tr.is_array() || tr.size() != 3) {
    throw IoError("pose: translation must be 3 numbers");
  }
  RigidPose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      pose.rotation(r, c) = rot[3 * r + c].get<double>();
    }
  }
  for (int i = 0; i < 3; ++i) pose.translation[i] = tr[i].get<double>();
  if (pose.orthonormality_error() > 1e-6 ||
      pose.rotation.determinant() < 0.0) {
    throw IoError("pose: rotation is not orthonormal with det +1");
  }
  return pose;
}

json to_json(const SceneDocument& doc) {
  json points = json::array();
  for (int i = 0; i < doc.corrs.size(); ++i) {
    const Eigen::Vector2d x = doc.corrs.x_i(i);
    const Eigen::Vector3d z = doc.corrs.z_i(i);
    const Eigen::Vector2d w = doc.corrs.w_i(i);
    points.push_back({{"x", {x[0], x[1]}},
                      {"z", {z[0], z[1], z[2]}},
                      {"w", {w[0], w[1]}}});
  }
  json j = {{"intrinsics", to_json(doc.corrs.intrinsics)},
            {"points", points}};
  if (doc.gt_pose) j["gt_pose"] = to_json(*doc.gt_pose);
  if (doc.bbox) {
    json bb = json::array();
    for (const auto& c : *doc.bbox) bb.push_back({c[0], c[1], c[2]});
    j["bbox"] = bb;
  }
  return j;
}

SceneDocument scene_from_json(const json& j) {
  SceneDocument doc;
  doc.corrs.intrinsics = intrinsics_from_json(require(j, "intrinsics"));
  const json& points = require(j, "points");
  if (!points.is_array() || points.empty()) {
    throw IoError("scene: points must be a non-empty array");
  }
  const int n = static_cast<int>(points.size());
  doc.corrs.x.resize(2 * n);
  doc.corrs.z.resize(3 * n);
  doc.corrs.w.resize(2 * n);
  for (int i = 0; i < n; ++i) {
    const json& p = points[i];
    const json& x = require(p, "x");
    const json& z = require(p, "z");
    if (!x.is_array() || x.size() != 2 || !z.is_array() || z.size() != 3) {
      throw IoError("scene point: x needs 2 numbers, z needs 3");
    }
    doc.corrs.x[2 * i] = x[0].get<double>();
    doc.corrs.x[2 * i + 1] = x[1].get<double>();
    for (int a = 0; a < 3; ++a) doc.corrs.z[3 * i + a] = z[a].get<double>();
    if (p.contains("w")) {
      const json& w = p["w"];
      if (!w.is_array() || w.size() != 2) {
        throw IoError("scene point: w needs 2 numbers");
      }
      doc.corrs.w[2 * i] = w[0].get<double>();
      doc.corrs.w[2 * i + 1] = w[1].get<double>();
    } else {
      doc.corrs.w[2 * i] = doc.corrs.w[2 * i + 1] = 1.0;
    }
  }
  doc.corrs.validate();
  if (j.contains("gt_pose")) doc.gt_pose = pose_from_json(j["gt_pose"]);
  if (j.contains("bbox")) {
    const json& bb = j["bbox"];
    if (!bb.is_array() || bb.size() != 8) {
      throw IoError("scene: bbox must list 8 corners");
    }
    std::array<Eigen::Vector3d, 8> corners;
    for (int i = 0; i < 8; ++i) corners[i] = vec3_from(bb[i], "bbox corner");
    doc.bbox = corners;
  }
  return doc;
}

json to_json(const LossBreakdown& b) {
  return {{"e_cov", b.e_cov},
          {"e_prior", b.e_prior},
          {"e_linear", b.e_linear},
          {"l_lc", b.l_lc},
          {"grad_w", vec_to_json(b.grad_w)},
          {"grad_x", vec_to_json(b.grad_x)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  static const std::array<std::string, 18> known = {
      "n_points",     "bbox_half_extents", "intrinsics",  "noise_px",
      "outlier_frac", "depth_min",         "depth_max",   "seed",
      "loss",         "steps",             "lr",          "clip_factor",
      "clip_window",  "distribution",      "alpha_gdr",   "alpha_zebra",
      "beta_gdr",     "beta_zebra"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw IoError("experiment config: unknown key '" + key + "'");
    }
  }
  ExperimentConfig cfg;
  json merged = j;
  for (const auto& key : known) {
    if (!merged.contains(key)) continue;
    apply_override(cfg, key + "=" + merged[key].dump());
  }
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw InvalidArgument("override must look like key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const auto as_json = [&]() -> json {
    try {
      return json::parse(value);
    } catch (const json::exception&) {
      return json(value);  // bare strings allowed for enum-ish keys
    }
  };
  const json v = as_json();
  try {
    if (key == "n_points") {
      cfg.scene.n_points = v.get<int>();
    } else if (key == "bbox_half_extents") {
      cfg.scene.bbox_half_extents = vec3_from(v, "bbox_half_extents");
    } else if (key == "intrinsics") {
      cfg.scene.intrinsics = intrinsics_from_json(v);
    } else if (key == "noise_px") {
      cfg.scene.noise_px = v.get<double>();
    } else if (key == "outlier_frac") {
      cfg.scene.outlier_frac = v.get<double>();
    } else if (key == "depth_min") {
      cfg.scene.depth_range.first = v.get<double>();
    } else if (key == "depth_max") {
      cfg.scene.depth_range.second = v.get<double>();
    } else if (key == "seed") {
      cfg.scene.seed = v.get<std::uint64_t>();
    } else if (key == "steps") {
      cfg.steps = v.get<int>();
    } else if (key == "lr") {
      cfg.lr = v.get<double>();
    } else if (key == "clip_factor") {
      cfg.clip.factor = v.get<double>();
    } else if (key == "clip_window") {
      cfg.clip.window = v.get<int>();
    } else if (key == "alpha_gdr") {
      cfg.alpha_gdr = v.get<double>();
    } else if (key == "alpha_zebra") {
      cfg.alpha_zebra = v.get<double>();
    } else if (key == "beta_gdr") {
      cfg.beta_gdr = v.get<double>();
    } else if (key == "beta_zebra") {
      cfg.beta_zebra = v.get<double>();
    } else if (key == "loss") {
      const std::string s = v.get<std::string>();
      if (s == "lc") {
        cfg.loss_kind = LossKind::LC;
      } else if (s == "bpnp") {
        cfg.loss_kind = LossKind::BPnPStyle;
      } else if (s == "surrogate") {
        cfg.loss_kind = LossKind::SurrogateOnly;
      } else {
        throw InvalidArgument("loss must be lc, bpnp or surrogate");
      }
    } else if (key == "distribution") {
      const std::string s = v.get<std::string>();
      if (s == "laplace") {
        cfg.distribution = Distribution::Laplace;
      } else if (s == "gaussian") {
        cfg.distribution = Distribution::Gaussian;
      } else {
        throw InvalidArgument("distribution must be laplace or gaussian");
      }
    } else {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument("bad value for '" + key + "': " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trace_to_csv(const TrainTrace& trace) {
  std::ostringstream os;
  os << "step,loss,correctness,rot_err_deg,trans_err,add\n";
  for (std::size_t s = 0; s < trace.records.size(); ++s) {
    const TrainStep& r = trace.records[s];
    os << s << ',' << format_double(r.loss) << ','
       << format_double(r.correctness) << ',' << format_double(r.rot_err_deg)
       << ',' << format_double(r.trans_err) << ',' << format_double(r.add)
       << '\n';
  }
  return os.str();
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("atomic rename failed for " + path);
  }
}

}  // namespace lcpnp
