#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>

#include "lcpnp/covariance.hpp"
#include "lcpnp/geometry.hpp"
#include "lcpnp/linearize.hpp"
#include "lcpnp/pnp.hpp"
#include "lcpnp/robust.hpp"

namespace lcpnp {

enum class Distribution { Laplace, Gaussian };

struct LossConfig {
  PoseRepresentation representation;
  Distribution distribution = Distribution::Laplace;
  double sqrt_eps = 1e-12;  // stabilizer inside every group square root
  std::optional<HuberConfig> huber;
};

struct LossBreakdown {
  double e_cov = 0.0;
  double e_prior = 0.0;
  double e_linear = 0.0;
  double l_lc = 0.0;
  Eigen::VectorXd grad_w;  // 2N
  Eigen::VectorXd grad_x;  // 2N
};

/// Mean over contiguous groups of sqrt(group sum + sqrt_eps). group_size
/// must divide the vector length; a group_size equal to the length reduces
/// the whole vector at once.
double corner_norm_mean(std::span<const double> d, int group_size,
                        double sqrt_eps);

struct LossTerms {
  double e_cov = 0.0;
  double e_prior = 0.0;
  double e_linear = 0.0;
};

/// The three loss terms assembled from a linearization via the public
/// covariance kernels. Laplace uses the grouped root reduction, Gaussian
/// the plain grouped sums (trace-style covariance terms, squared errors).
LossTerms loss_terms(const LinearizationResult& lin, const LossConfig& cfg);

/// log(e_prior) + 0.5 (e_cov + e_linear) / e_prior. Throws NonPositivePrior
/// for e_prior <= 0.
double lc_combine(double e_cov, double e_prior, double e_linear,
                  Distribution distribution);

/// Full loss with gradients w.r.t. the weights and the 2D locations.
///
/// Gradient semantics: the 2D locations enter only through the residuals
/// inside e_cov; the residuals are detached from e_prior and e_linear. The
/// weights flow through the whole pipeline (H, A) in all three terms. The
/// 3D points never carry gradient. Gradients are exact forward-mode
/// derivatives of this frozen computation, one seeded pass per coordinate.
LossBreakdown lc_loss(const CorrespondenceSet& corrs, const RigidPose& y_gt,
                      const LossConfig& cfg);

}  // namespace lcpnp
