#include "lcpnp/loss.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "lcpnp/dual.hpp"
#include "lcpnp/errors.hpp"

namespace lcpnp {

namespace {

using std::log;
using std::sqrt;

template <class T>
using Vec6T = Eigen::Matrix<T, 6, 1>;
template <class T>
using Mat6T = Eigen::Matrix<T, 6, 6>;
template <class T>
using VecXT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
T clamp_nonneg(const T& x) {
  return value(x) < 0.0 ? T(0.0) : x;
}

// Lower-triangular Cholesky of a symmetric positive definite 6x6 matrix.
// Hand-rolled so it runs on forward-mode scalars.
template <class T>
Mat6T<T> cholesky6(const Mat6T<T>& A) {
  Mat6T<T> L = Mat6T<T>::Zero();
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j <= i; ++j) {
      T s = A(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (!(value(s) > 0.0)) {
          throw DegenerateHessian("loss: Hessian not positive definite");
        }
        L(i, i) = sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return L;
}

template <class T>
Vec6T<T> cholesky6_solve(const Mat6T<T>& L, Vec6T<T> b) {
  for (int i = 0; i < 6; ++i) {  // L y = b
    for (int k = 0; k < i; ++k) b[i] -= L(i, k) * b[k];
    b[i] /= L(i, i);
  }
  for (int i = 5; i >= 0; --i) {  // L^T x = y
    for (int k = i + 1; k < 6; ++k) b[i] -= L(k, i) * b[k];
    b[i] /= L(i, i);
  }
  return b;
}

template <class T>
Mat6T<T> cholesky6_inverse(const Mat6T<T>& L) {
  Mat6T<T> inv;
  for (int c = 0; c < 6; ++c) {
    Vec6T<T> e = Vec6T<T>::Zero();
    e[c] = T(1.0);
    inv.col(c) = cholesky6_solve(L, e);
  }
  return inv;
}

// Group reduction shared by all three terms. Laplace: mean of group-root
// sums; Gaussian: mean of plain group sums.
template <class T>
T group_reduce(const VecXT<T>& d, int group_size, double sqrt_eps,
               Distribution dist) {
  const int groups = static_cast<int>(d.size()) / group_size;
  T acc(0.0);
  for (int g = 0; g < groups; ++g) {
    T s(0.0);
    for (int j = 0; j < group_size; ++j) s += d[g * group_size + j];
    acc += dist == Distribution::Laplace ? sqrt(s + sqrt_eps) : s;
  }
  return acc / double(groups);
}

// Everything the frozen pipeline treats as constant.
struct FrozenContext {
  int n = 0;
  std::vector<Eigen::Matrix<double, 2, 6>> J_proj;  // at y_gt
  Eigen::MatrixXd J_rep;                            // K x 6 at y_gt
  Eigen::VectorXd x_p;
  int group_size = 3;
  double sqrt_eps = 1e-12;
  Distribution dist = Distribution::Laplace;
  std::optional<double> delta_r;  // fixed Huber threshold for residuals
  std::optional<double> delta_w;  // fixed Huber threshold for weights
};

FrozenContext freeze(const CorrespondenceSet& corrs, const RigidPose& y_gt,
                     const LossConfig& cfg) {
  FrozenContext C;
  C.n = corrs.size();
  C.x_p.resize(2 * C.n);
  C.J_proj.resize(C.n);
  for (int i = 0; i < C.n; ++i) {
    const Projection proj = project(corrs.z_i(i), y_gt, corrs.intrinsics);
    C.x_p.segment<2>(2 * i) = proj.uv;
    C.J_proj[i] = proj.J_pose;
  }
  const Represented rep =
      represent(LocalPose6::identity_at(y_gt), cfg.representation);
  C.J_rep = rep.J;
  C.group_size = cfg.representation.group_size();
  C.sqrt_eps = cfg.sqrt_eps;
  C.dist = cfg.distribution;
  if (cfg.huber) {
    const Eigen::VectorXd r = corrs.x - C.x_p;
    C.delta_r = cfg.huber->delta_for(
        std::vector<double>(r.data(), r.data() + r.size()));
    C.delta_w = cfg.huber->delta_for(
        std::vector<double>(corrs.w.data(), corrs.w.data() + corrs.w.size()));
  }

  // Same conditioning guard as the linearization module.
  Matrix6d H = Matrix6d::Zero();
  for (int i = 0; i < C.n; ++i) {
    Eigen::Vector2d w2;
    for (int a = 0; a < 2; ++a) {
      const double w = corrs.w[2 * i + a];
      w2[a] = C.delta_w ? huber_of_square(w * w, *C.delta_w) : w * w;
    }
    H.noalias() += C.J_proj[i].transpose() * w2.asDiagonal() * C.J_proj[i];
  }
  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(H);
  const double emin = eig.eigenvalues().minCoeff();
  if (!(emin > 0.0) || eig.eigenvalues().maxCoeff() >= 1e12 * emin) {
    throw DegenerateHessian("lc_loss: ill-conditioned Hessian");
  }
  return C;
}

template <class T>
struct FrozenEval {
  T e_cov, e_prior, e_linear, l_lc;
};

// The differentiable pipeline. Residuals carry gradient only inside e_cov;
// weights flow through H and A everywhere; the Huber thresholds and all
// Jacobians are constants.
template <class T>
FrozenEval<T> eval_frozen(const FrozenContext& C, const VecXT<T>& x,
                          const VecXT<T>& w) {
  const int m = 2 * C.n;
  VecXT<T> r(m), mdiag(m), w2(m);
  for (int j = 0; j < m; ++j) {
    r[j] = x[j] - C.x_p[j];
    mdiag[j] = C.delta_r ? huber_of_square(r[j] * r[j], *C.delta_r)
                         : r[j] * r[j];
    w2[j] = C.delta_w ? huber_of_square(w[j] * w[j], *C.delta_w) : w[j] * w[j];
  }

  Mat6T<T> H = Mat6T<T>::Zero();
  for (int i = 0; i < C.n; ++i) {
    const Eigen::Matrix<double, 6, 2> Jt = C.J_proj[i].transpose();
    for (int a = 0; a < 2; ++a) {
      const Eigen::Matrix<double, 6, 1> col = Jt.col(a);
      const T& s = w2[2 * i + a];
      for (int p = 0; p < 6; ++p) {
        for (int q = 0; q <= p; ++q) {
          H(p, q) += s * (col[p] * col[q]);
        }
      }
    }
  }
  for (int p = 0; p < 6; ++p) {
    for (int q = p + 1; q < 6; ++q) H(p, q) = H(q, p);
  }

  const Mat6T<T> L = cholesky6(H);
  const Mat6T<T> Hinv = cholesky6_inverse(L);

  // Solver-sensitivity columns a_j = w2_j * Hinv * Jrow_j^T.
  std::vector<Vec6T<T>> A(m);
  for (int i = 0; i < C.n; ++i) {
    for (int a = 0; a < 2; ++a) {
      const Vec6T<T> Jrow =
          C.J_proj[i].row(a).transpose().template cast<T>();
      A[2 * i + a] = w2[2 * i + a] * (Hinv * Jrow);
    }
  }

  // Linear pose error with detached residuals: u = A * value(r).
  Vec6T<T> u = Vec6T<T>::Zero();
  for (int j = 0; j < m; ++j) u += A[j] * value(r[j]);

  // C6 = A diag(mdiag) A^T, assembled column by column.
  Mat6T<T> C6 = Mat6T<T>::Zero();
  for (int j = 0; j < m; ++j) {
    for (int p = 0; p < 6; ++p) {
      for (int q = 0; q <= p; ++q) {
        C6(p, q) += mdiag[j] * (A[j][p] * A[j][q]);
      }
    }
  }
  for (int p = 0; p < 6; ++p) {
    for (int q = p + 1; q < 6; ++q) C6(p, q) = C6(q, p);
  }

  const int K = static_cast<int>(C.J_rep.rows());
  VecXT<T> dcov(K), dprior(K), elin_sq(K);
  for (int k = 0; k < K; ++k) {
    const Vec6T<T> row = C.J_rep.row(k).transpose().template cast<T>();
    dcov[k] = clamp_nonneg<T>(row.dot(C6 * row));
    dprior[k] = clamp_nonneg<T>(row.dot(Hinv * row));
    const T e = row.dot(u);
    elin_sq[k] = e * e;
  }

  FrozenEval<T> out;
  out.e_cov = group_reduce(dcov, C.group_size, C.sqrt_eps, C.dist);
  out.e_prior = group_reduce(dprior, C.group_size, C.sqrt_eps, C.dist);
  out.e_linear = group_reduce(elin_sq, C.group_size, C.sqrt_eps, C.dist);
  if (!(value(out.e_prior) > 0.0)) {
    throw NonPositivePrior("loss: prior term is not positive");
  }
  out.l_lc =
      log(out.e_prior) + 0.5 * (out.e_cov + out.e_linear) / out.e_prior;
  return out;
}

}  // namespace

double corner_norm_mean(std::span<const double> d, int group_size,
                        double sqrt_eps) {
  const int size = static_cast<int>(d.size());
  if (group_size < 1 || size % group_size != 0) {
    throw InvalidArgument("corner_norm_mean: group size must divide length");
  }
  const int groups = size / group_size;
  double acc = 0.0;
  for (int g = 0; g < groups; ++g) {
    double s = 0.0;
    for (int j = 0; j < group_size; ++j) s += d[g * group_size + j];
    acc += std::sqrt(s + sqrt_eps);
  }
  return acc / groups;
}

LossTerms loss_terms(const LinearizationResult& lin, const LossConfig& cfg) {
  const Represented rep =
      represent(LocalPose6::identity_at(lin.y_gt_ref), cfg.representation);
  const int gs = cfg.representation.group_size();
  const Eigen::VectorXd dcov = transform_cov_diag(
      pose_cov(lin.A, residual_cov(lin.r_gt, cfg.huber)), rep.J);
  const Eigen::VectorXd dprior = transform_cov_diag(prior_cov(lin.H), rep.J);
  const Eigen::VectorXd e_vec = rep.J * (lin.A * lin.r_gt);
  const Eigen::VectorXd e_sq = e_vec.array().square();

  LossTerms out;
  if (cfg.distribution == Distribution::Laplace) {
    out.e_cov = corner_norm_mean({dcov.data(), dcov.data() + dcov.size()}, gs,
                                 cfg.sqrt_eps);
    out.e_prior = corner_norm_mean(
        {dprior.data(), dprior.data() + dprior.size()}, gs, cfg.sqrt_eps);
    out.e_linear = corner_norm_mean({e_sq.data(), e_sq.data() + e_sq.size()},
                                    gs, cfg.sqrt_eps);
  } else {
    const int groups = static_cast<int>(dcov.size()) / gs;
    out.e_cov = dcov.sum() / groups;
    out.e_prior = dprior.sum() / groups;
    out.e_linear = e_sq.sum() / groups;
  }
  return out;
}

double lc_combine(double e_cov, double e_prior, double e_linear,
                  Distribution /*distribution*/) {
  if (!(e_prior > 0.0)) {
    throw NonPositivePrior("lc_combine: prior term must be positive");
  }
  return std::log(e_prior) + 0.5 * (e_cov + e_linear) / e_prior;
}

LossBreakdown lc_loss(const CorrespondenceSet& corrs, const RigidPose& y_gt,
                      const LossConfig& cfg) {
  corrs.validate();
  if (corrs.size() < 4) {
    throw InvalidArgument("lc_loss: needs at least 4 correspondences");
  }
  const FrozenContext C = freeze(corrs, y_gt, cfg);
  const int m = 2 * C.n;

  const FrozenEval<double> base =
      eval_frozen<double>(C, corrs.x, corrs.w);

  LossBreakdown out;
  out.e_cov = base.e_cov;
  out.e_prior = base.e_prior;
  out.e_linear = base.e_linear;
  out.l_lc = base.l_lc;
  out.grad_x.resize(m);
  out.grad_w.resize(m);

  VecXT<Dual> xd = corrs.x.cast<Dual>();
  VecXT<Dual> wd = corrs.w.cast<Dual>();
  for (int j = 0; j < m; ++j) {
    xd[j].d = 1.0;
    out.grad_x[j] = eval_frozen<Dual>(C, xd, wd).l_lc.d;
    xd[j].d = 0.0;
  }
  for (int j = 0; j < m; ++j) {
    wd[j].d = 1.0;
    out.grad_w[j] = eval_frozen<Dual>(C, xd, wd).l_lc.d;
    wd[j].d = 0.0;
  }
  if (!out.grad_x.allFinite() || !out.grad_w.allFinite()) {
    throw NonFiniteGradient("lc_loss: non-finite gradient");
  }
  return out;
}

}  // namespace lcpnp
