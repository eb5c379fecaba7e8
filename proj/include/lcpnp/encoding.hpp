#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <span>
#include <vector>

namespace lcpnp {

/// Fixed-point binary codec for one coordinate component over
/// [c_min, c_max] with n_bits of resolution.
struct ComponentCodec {
  double c_min = 0.0;
  double c_max = 1.0;
  int n_bits = 7;
};

/// Per-axis bit budget: the largest component gets n_max bits, the others
/// round(n_max + log2(size_i / size_max)), floored at 1.
std::array<int, 3> allocate_bits(const std::array<double, 3>& sizes,
                                 int n_max);

/// Normalize c into [0, 2^n - 1] and emit the bits of the rounded integer,
/// most significant first. Throws OutOfRange outside [c_min, c_max].
std::vector<int> encode_component(double c, const ComponentCodec& codec);

/// Integer value of a bit vector (MSB first), as a double.
double decode_bits(std::span<const int> bits);

/// Normalized coordinate for c, i.e. the value encode_component rounds.
double normalize_component(double c, const ComponentCodec& codec);

/// Differentiable decoding of per-bit probabilities (MSB first).
///
/// With ground-truth bits: the most significant mispredicted bit keeps its
/// unrounded probability, every other bit is replaced by its ground-truth
/// value; when all bits round correctly only the least significant bit
/// stays unrounded. Without ground truth: all bits rounded except the
/// least significant. Probabilities at 0.5 round to 1.
double decode_soft(std::span<const double> bit_probs,
                   const std::optional<std::vector<int>>& gt_bits = {});

struct AlignedCloud {
  std::vector<Eigen::Vector3d> points;  // centered and rotated
  Eigen::Matrix3d rotation;             // applied after centering
  Eigen::Vector3d center;
};

/// Recenter a point cloud and rotate it into its covariance eigenbasis
/// (largest spread on x), shrinking the per-axis spans the codec has to
/// cover. The rotation is proper (det +1).
AlignedCloud align_principal_axes(std::span<const Eigen::Vector3d> points);

}  // namespace lcpnp
