#pragma once

// Steady-state prediction for the marginally stable closed loop and the
// exogenous initial state that selects the formation scaling.

#include "exoform/riccati.hpp"

namespace exoform {

/// Spectral projector onto Ker(Acl) along Im(Acl): Pi = R (L^T R)^{-1} L^T
/// with R, L orthonormal bases of the right and left kernels. psi holds the
/// dual basis, psi^T phi = I.
struct SteadyProjector {
  Mat Pi;
  Mat phi;
  Mat psi;
  Index s() const { return phi.cols(); }
};

inline SteadyProjector steady_projector(const Mat& acl, const Tolerances& tol) {
  require_square(acl, "Acl");
  require_finite(acl, "Acl");
  const Index n = acl.rows();
  SteadyProjector sp;
  const Mat r = closed_loop_kernel(acl, tol);
  const Mat l = closed_loop_kernel(Mat(acl.transpose()), tol);
  if (r.cols() != l.cols()) {
    throw Error(ErrorCode::DefectiveZeroEigenvalue, "left and right kernels differ in dimension");
  }
  if (r.cols() == 0) {
    sp.Pi = Mat::Zero(n, n);
    sp.phi = r;
    sp.psi = l;
    return sp;
  }
  const Mat m = l.transpose() * r;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > std::sqrt(tol.residual_tol))) {
    throw Error(ErrorCode::DefectiveZeroEigenvalue, "zero eigenvalue of Acl has a Jordan chain");
  }
  const Mat m_inv = m.partialPivLu().inverse();
  sp.phi = r;
  sp.psi = l * m_inv.transpose();
  sp.Pi = r * m_inv * l.transpose();
  return sp;
}

struct SteadyPrediction {
  Vec projector;     // Pi xbar0
  Vec orthonormal;   // sum phi_i phi_i^T xbar0
  double discrepancy = 0.0;
};

inline SteadyPrediction predict_steady(const SteadyProjector& sp, const Vec& xbar0) {
  require_rows(xbar0, sp.Pi.rows(), "xbar0");
  SteadyPrediction p;
  p.projector = sp.Pi * xbar0;
  p.orthonormal = sp.phi * (sp.phi.transpose() * xbar0);
  p.discrepancy = (p.projector - p.orthonormal).norm();
  return p;
}

enum class W0Formula { Projector, Phi };

struct W0Design {
  Vec w0;
  Vec phi;        // kernel direction, oriented so phi_x^T x_df > 0
  Vec psi;        // matching dual vector
  double target_coefficient = 0.0;  // d |x_df| / |phi_x|
  double gate = 0.0;                 // |psi_w| (or |phi_w| for the phi formula)
  W0Formula formula = W0Formula::Projector;
};

/// Minimum-norm w0 that puts the steady state of x at d * x_df given x0.
/// Projector mode solves psi_w^T w0 = c - psi_x^T x0 so that Pi [x0; w0]
/// lands on the target exactly; phi mode uses phi in place of psi, which
/// matches the orthonormal-sum prediction. Both coincide when Pi is
/// orthogonal. Throws ScalingUnreachable when w0 cannot move the steady
/// state and x0 alone does not reach the target.
inline W0Design design_w0(const SteadyProjector& sp, const Vec& x0, const Vec& x_df, double d, Index n_plant,
                          const Tolerances& tol, W0Formula formula = W0Formula::Projector) {
  const Index big_n = sp.Pi.rows();
  const Index k = big_n - n_plant;
  require_rows(x0, n_plant, "x0");
  require_rows(x_df, n_plant, "x_df");
  if (!(x_df.norm() > 0.0)) throw Error(ErrorCode::ZeroVector, "x_df must be nonzero");
  if (!std::isfinite(d) || d == 0.0) throw Error(ErrorCode::ScalingUnreachable, "scaling d must be finite and nonzero");
  if (sp.s() == 0) {
    throw Error(ErrorCode::ScalingUnreachable, "closed loop is Hurwitz; every trajectory converges to the origin");
  }
  if (sp.s() > 1) {
    throw Error(ErrorCode::MultipleZeroModes, "closed loop has " + std::to_string(sp.s()) + " zero modes");
  }

  W0Design out;
  out.formula = formula;
  out.phi = sp.phi.col(0);
  out.psi = sp.psi.col(0);
  Vec phi_x = out.phi.head(n_plant);
  const double align = phi_x.dot(x_df) / (phi_x.norm() * x_df.norm());
  if (!(std::abs(1.0 - std::abs(align)) <= std::sqrt(tol.residual_tol))) {
    throw Error(ErrorCode::ScalingUnreachable, "steady direction is not parallel to x_df");
  }
  if (align < 0) {
    out.phi = -out.phi;
    out.psi = -out.psi;
    phi_x = -phi_x;
  }
  out.target_coefficient = d * x_df.norm() / phi_x.norm();

  const Vec& dual = formula == W0Formula::Projector ? out.psi : out.phi;
  const Vec dual_x = dual.head(n_plant);
  const Vec dual_w = dual.tail(k);
  const double rhs = out.target_coefficient - dual_x.dot(x0);
  out.gate = dual_w.norm();
  if (out.gate <= tol.residual_tol * dual.norm()) {
    if (std::abs(rhs) <= tol.residual_tol * (1.0 + std::abs(out.target_coefficient))) {
      out.w0 = Vec::Zero(k);
      return out;
    }
    throw Error(ErrorCode::ScalingUnreachable, "the exogenous state cannot move the steady state");
  }
  out.w0 = dual_w * (rhs / dual_w.squaredNorm());
  return out;
}

}  // namespace exoform
