#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace lcpnp {

/// Huber capping of squared quantities. The threshold is either fixed or
/// adaptive: delta = max(min_delta, median_scale * median(|values|)).
struct HuberConfig {
  std::optional<double> fixed_delta;
  double median_scale = 2.0;
  double min_delta = 1.0;

  /// Threshold for the given magnitudes (absolute values are taken here).
  double delta_for(std::vector<double> magnitudes) const {
    if (fixed_delta) return *fixed_delta;
    if (magnitudes.empty()) return min_delta;
    for (double& m : magnitudes) m = std::abs(m);
    const std::size_t mid = magnitudes.size() / 2;
    std::nth_element(magnitudes.begin(), magnitudes.begin() + mid,
                     magnitudes.end());
    double med = magnitudes[mid];
    if (magnitudes.size() % 2 == 0) {
      const double lo =
          *std::max_element(magnitudes.begin(), magnitudes.begin() + mid);
      med = 0.5 * (lo + med);
    }
    return std::max(min_delta, median_scale * med);
  }
};

/// Huber function applied to a squared value s = e^2:
/// rho(s) = s for |e| <= delta, else 2*delta*|e| - delta^2.
/// Templated so the loss pipeline can run it on forward-mode scalars.
template <class T>
T huber_of_square(const T& s, double delta) {
  using std::sqrt;
  const double d2 = delta * delta;
  if (s <= d2) return s;
  return 2.0 * delta * sqrt(s) - d2;
}

}  // namespace lcpnp
