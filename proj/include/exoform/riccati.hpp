#pragma once

// Smallest positive semidefinite solution of
//   Abar^T P + P Abar - P Bbar Bbar^T P + Qbar = 0
// as the limit of the Riccati differential equation started at P(0) = 0.
//
// P(T) is obtained exactly on a doubling grid T = tau 2^j: one matrix
// exponential of the Hamiltonian over tau, then structure-preserving doubling
// of the flow triple (A_T, G_T, Q_T) with Q_T = P(T). The flow maps compose as
//   A_2T = A W A,  G_2T = G + A W G A^T,  Q_2T = Q + A^T Q W A,  W = (I + G Q)^{-1}.

#include "exoform/exodesign.hpp"

#include <vector>

namespace exoform {

struct RiccatiOptions {
  double horizon_cap = 1e6;
  double divergence_bound = 1e12;
  bool keep_checkpoints = false;
};

struct RiccatiSolution {
  Mat P;
  Mat gain;  // Bbar^T P
  Mat Acl;   // Abar - Bbar Bbar^T P
  double residual = 0.0;  // Frobenius norm of the algebraic residual
  double horizon = 0.0;
  int doublings = 0;
  std::vector<double> checkpoint_times;
  std::vector<Mat> checkpoints;
};

inline Mat riccati_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& p) {
  return a.transpose() * p + p * a - p * b * b.transpose() * p + q;
}

inline RiccatiSolution solve_min_psd(const AugmentedSystem& sys, const Tolerances& tol,
                                     const RiccatiOptions& opts = {}) {
  tol.validate();
  const Mat& a = sys.Abar;
  const Mat& b = sys.Bbar;
  const Mat& q = sys.Qbar;
  require_square(a, "Abar");
  require_rows(b, a.rows(), "Bbar");
  require_rows(q, a.rows(), "Qbar");
  require_finite(a, "Abar");
  require_finite(b, "Bbar");
  require_finite(q, "Qbar");
  const Index n = a.rows();
  const Mat s = b * b.transpose();
  const Mat eye = Mat::Identity(n, n);

  Mat ham(2 * n, 2 * n);
  ham << -a, s, q, a.transpose();
  const double hnorm = ham.cwiseAbs().colwise().sum().maxCoeff();
  double tau = 1.0;
  while (hnorm * tau > 0.5) tau *= 0.5;

  const Mat e = expm_step(ham, tau);
  const Eigen::PartialPivLU<Mat> e11(e.topLeftCorner(n, n));
  Mat at = e11.inverse();
  Mat gt = symmetrize(at * e.topRightCorner(n, n));
  Mat qt = symmetrize(e.bottomLeftCorner(n, n) * at);

  RiccatiSolution out;
  double horizon = tau;
  int doublings = 0;
  // Once the tolerance is met, a few more doublings are taken while they keep
  // halving the residual; the best iterate is returned.
  int polish = -1;
  Mat best;
  double best_horizon = 0.0;
  int best_doublings = 0;
  for (;;) {
    require_finite(qt, "Riccati iterate");
    if (opts.keep_checkpoints) {
      out.checkpoint_times.push_back(horizon);
      out.checkpoints.push_back(qt);
    }
    const double pnorm = qt.norm();
    const double res = riccati_residual(a, b, q, qt).norm();
    if (polish >= 0) {
      const bool improved = res <= 0.5 * out.residual;
      if (improved) {
        best = qt;
        best_horizon = horizon;
        best_doublings = doublings;
        out.residual = res;
      }
      if (!improved || ++polish >= 3 || res == 0.0) break;
    } else if (res <= tol.residual_tol * (1.0 + pnorm)) {
      best = qt;
      best_horizon = horizon;
      best_doublings = doublings;
      out.residual = res;
      if (res == 0.0) break;
      polish = 0;
    }
    if (polish >= 0 && horizon >= opts.horizon_cap) break;
    if (pnorm > opts.divergence_bound) {
      throw Error(ErrorCode::RiccatiDiverged, "|P(T)| = " + std::to_string(pnorm) + " at T = " +
                                                  std::to_string(horizon));
    }
    if (horizon >= opts.horizon_cap) {
      throw Error(ErrorCode::NoConvergence, "residual " + std::to_string(res) + " at horizon cap T = " +
                                                std::to_string(horizon));
    }
    const Eigen::PartialPivLU<Mat> w(eye + gt * qt);
    const Mat wa = w.solve(at);
    const Mat wg = w.solve(gt);
    const Mat a_next = at * wa;
    gt = symmetrize(gt + at * wg * at.transpose());
    qt = symmetrize(qt + at.transpose() * qt * wa);
    at = a_next;
    horizon *= 2.0;
    ++doublings;
  }

  out.P = best;
  out.gain = b.transpose() * out.P;
  out.Acl = a - b * out.gain;
  out.horizon = best_horizon;
  out.doublings = best_doublings;
  return out;
}

/// Ker(Acl) with a rank threshold loosened to the Riccati residual level:
/// the kernel is exact in theory but P is only accurate to residual_tol.
inline Mat closed_loop_kernel(const Mat& acl, const Tolerances& tol) {
  Tolerances loose = tol;
  loose.rank_tol = std::max(tol.rank_tol, 100.0 * tol.residual_tol);
  return kernel_basis(acl, loose, 1.0);
}

struct SteadyConditionsReport {
  Index kernel_dim = 0;
  double max_P_phi = 0.0;
  double max_C_phi = 0.0;
  double max_A_phi = 0.0;
  bool conditions_hold = false;
  Index unobservable_dim = 0;
  double kernel_angle = 0.0;  // sin of the largest angle between Ker(Acl) and Ker([Abar; Cbar])
  bool kernels_equal = false;
};

/// Checks P phi = 0, Cbar phi = 0, Abar phi = 0 on a basis of Ker(Acl), and
/// compares Ker(Acl) with the unobservable subspace Ker([Abar; Cbar]).
inline SteadyConditionsReport steady_conditions(const RiccatiSolution& r, const AugmentedSystem& sys,
                                                const Tolerances& tol) {
  SteadyConditionsReport rep;
  const Mat phi = closed_loop_kernel(r.Acl, tol);
  rep.kernel_dim = phi.cols();
  if (phi.cols() > 0) {
    rep.max_P_phi = (r.P * phi).colwise().norm().maxCoeff();
    rep.max_C_phi = sys.Cbar.rows() > 0 ? (sys.Cbar * phi).colwise().norm().maxCoeff() : 0.0;
    rep.max_A_phi = (sys.Abar * phi).colwise().norm().maxCoeff();
  }
  const double pn = r.P.norm();
  const double an = norm2(sys.Abar);
  const double threshold = std::sqrt(tol.residual_tol);
  rep.conditions_hold = rep.max_P_phi <= threshold * (1.0 + pn) && rep.max_C_phi <= threshold &&
                        rep.max_A_phi <= threshold * (1.0 + an);
  const Mat unobs = kernel_basis(vstack(scaled(sys.Abar), sys.Cbar.rows() > 0 ? scaled(sys.Cbar) : sys.Cbar), tol, 1.0);
  rep.unobservable_dim = unobs.cols();
  if (unobs.cols() == phi.cols()) {
    rep.kernel_angle = largest_principal_angle_sin(unobs, phi);
    rep.kernels_equal = subspace_equal(unobs, phi, tol);
  }
  return rep;
}

struct MarginalCertificate {
  Index zero_multiplicity = 0;  // s = dim Ker(Acl)
  double max_real_part = 0.0;   // over nonzero eigenvalues
  std::vector<Complex> eigenvalues;
};

/// Re(lambda) <= eig_group_tol for all eigenvalues, and the zero cluster
/// semisimple (algebraic multiplicity equals dim Ker(Acl)).
inline MarginalCertificate marginal_certify(const Mat& acl, const Tolerances& tol) {
  require_square(acl, "Acl");
  MarginalCertificate c;
  if (acl.size() == 0) return c;
  Eigen::EigenSolver<Mat> es(acl, false);
  const CVec ev = es.eigenvalues();
  const double zero_radius = 10.0 * tol.eig_group_tol * std::max(1.0, norm2(acl));
  Index algebraic = 0;
  c.max_real_part = -INFINITY;
  std::string unstable;
  for (Index i = 0; i < ev.size(); ++i) {
    c.eigenvalues.push_back(ev(i));
    if (std::abs(ev(i)) <= zero_radius) {
      ++algebraic;
      continue;
    }
    c.max_real_part = std::max(c.max_real_part, ev(i).real());
    if (ev(i).real() > tol.eig_group_tol) {
      unstable += " " + std::to_string(ev(i).real()) + (ev(i).imag() >= 0 ? "+" : "") + std::to_string(ev(i).imag()) + "i";
    }
  }
  if (!unstable.empty()) throw Error(ErrorCode::NotMarginallyStable, "eigenvalues with Re > 0:" + unstable);
  c.zero_multiplicity = closed_loop_kernel(acl, tol).cols();
  if (c.zero_multiplicity != algebraic) {
    throw Error(ErrorCode::NotMarginallyStable, "zero eigenvalue not semisimple: algebraic " +
                                                    std::to_string(algebraic) + ", geometric " +
                                                    std::to_string(c.zero_multiplicity));
  }
  return c;
}

}  // namespace exoform
