#pragma once

#include <stdexcept>
#include <string>

namespace lcpnp {

/// Base class for all recoverable errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LCPNP_DEFINE_ERROR(NAME)        \
  class NAME : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

LCPNP_DEFINE_ERROR(InvalidArgument);
LCPNP_DEFINE_ERROR(NonPositiveDepth);
LCPNP_DEFINE_ERROR(NearPiRotation);
LCPNP_DEFINE_ERROR(MissingBBox);
LCPNP_DEFINE_ERROR(SingularHessian);
LCPNP_DEFINE_ERROR(DegenerateHessian);
LCPNP_DEFINE_ERROR(NoConsensus);
LCPNP_DEFINE_ERROR(NonPositivePrior);
LCPNP_DEFINE_ERROR(NonFiniteGradient);
LCPNP_DEFINE_ERROR(OutOfRange);
LCPNP_DEFINE_ERROR(FrustumFailure);
LCPNP_DEFINE_ERROR(AllResidualsZero);
LCPNP_DEFINE_ERROR(SolverFailure);
LCPNP_DEFINE_ERROR(IoError);

#undef LCPNP_DEFINE_ERROR

}  // namespace lcpnp
