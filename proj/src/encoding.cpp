#include "lcpnp/encoding.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "lcpnp/errors.hpp"

namespace lcpnp {

namespace {

int round_bit(double p) { return p >= 0.5 ? 1 : 0; }

void check_codec(const ComponentCodec& codec) {
  if (!(codec.c_max > codec.c_min) || codec.n_bits < 1 || codec.n_bits > 16) {
    throw InvalidArgument("codec: need c_max > c_min and 1 <= n_bits <= 16");
  }
}

}  // namespace

std::array<int, 3> allocate_bits(const std::array<double, 3>& sizes,
                                 int n_max) {
  if (n_max < 1) throw InvalidArgument("allocate_bits: n_max must be >= 1");
  const double s = std::max({sizes[0], sizes[1], sizes[2]});
  if (!(s > 0.0) || sizes[0] <= 0.0 || sizes[1] <= 0.0 || sizes[2] <= 0.0) {
    throw InvalidArgument("allocate_bits: sizes must be positive");
  }
  std::array<int, 3> bits{};
  for (int i = 0; i < 3; ++i) {
    const double n = n_max + std::log2(sizes[i] / s);
    bits[i] = std::max(1, static_cast<int>(std::lround(n)));
  }
  return bits;
}

double normalize_component(double c, const ComponentCodec& codec) {
  check_codec(codec);
  if (c < codec.c_min || c > codec.c_max) {
    throw OutOfRange("encode: value outside [c_min, c_max]");
  }
  const double levels = std::ldexp(1.0, codec.n_bits) - 1.0;  // 2^n - 1
  return (c - codec.c_min) / (codec.c_max - codec.c_min) * levels;
}

std::vector<int> encode_component(double c, const ComponentCodec& codec) {
  const long value = std::lround(normalize_component(c, codec));
  std::vector<int> bits(codec.n_bits);
  for (int j = 0; j < codec.n_bits; ++j) {
    bits[j] = static_cast<int>((value >> (codec.n_bits - 1 - j)) & 1);
  }
  return bits;
}

double decode_bits(std::span<const int> bits) {
  double v = 0.0;
  for (const int b : bits) v = 2.0 * v + b;
  return v;
}

double decode_soft(std::span<const double> bit_probs,
                   const std::optional<std::vector<int>>& gt_bits) {
  const int n = static_cast<int>(bit_probs.size());
  if (n < 1) throw InvalidArgument("decode_soft: empty probability vector");
  for (const double p : bit_probs) {
    if (p < 0.0 || p > 1.0) {
      throw InvalidArgument("decode_soft: probability outside [0, 1]");
    }
  }

  int soft_index = n - 1;  // bit kept unrounded
  std::vector<double> terms(n);
  if (gt_bits) {
    if (static_cast<int>(gt_bits->size()) != n) {
      throw InvalidArgument("decode_soft: ground-truth length mismatch");
    }
    for (int j = 0; j < n; ++j) {
      if (round_bit(bit_probs[j]) != (*gt_bits)[j]) {
        soft_index = j;  // most significant mispredicted bit
        break;
      }
    }
    for (int j = 0; j < n; ++j) {
      terms[j] = j == soft_index ? bit_probs[j]
                                 : static_cast<double>((*gt_bits)[j]);
    }
  } else {
    for (int j = 0; j < n; ++j) {
      terms[j] = j == soft_index ? bit_probs[j]
                                 : static_cast<double>(round_bit(bit_probs[j]));
    }
  }

  double out = 0.0;
  for (int j = 0; j < n; ++j) {
    out += std::ldexp(terms[j], n - 1 - j);  // significance 2^(n-1-j)
  }
  return out;
}

AlignedCloud align_principal_axes(std::span<const Eigen::Vector3d> points) {
  if (points.empty()) {
    throw InvalidArgument("align_principal_axes: empty point cloud");
  }
  AlignedCloud out;
  out.center = Eigen::Vector3d::Zero();
  for (const auto& p : points) out.center += p;
  out.center /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - out.center;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Matrix3d basis;  // eigenvectors by descending spread
  basis.col(0) = eig.eigenvectors().col(2);
  basis.col(1) = eig.eigenvectors().col(1);
  basis.col(2) = eig.eigenvectors().col(0);
  if (basis.determinant() < 0.0) basis.col(2) = -basis.col(2);

  out.rotation = basis.transpose();
  out.points.reserve(points.size());
  for (const auto& p : points) {
    out.points.push_back(out.rotation * (p - out.center));
  }
  return out;
}

}  // namespace lcpnp
