#pragma once

// Maximal steady-state space, residual desired formations, and formation
// eligibility. Everything here works in Jordan coordinates.

#include "exoform/spectra.hpp"

#include <vector>

namespace exoform {

struct MaxSteadySpace {
  Mat Xtilde;    // raw assembly [X_L, U_A]
  Mat X_left;    // [A_r^{-1} B_r U_Blast; X_1; ...; X_alpha0]
  Mat U_A;
  Mat basis;     // orthonormal basis of Im(Xtilde)
  Index dim() const { return basis.cols(); }
};

/// Assembles Im(X~) = Im([A_r^{-1} B_r U_Blast ; X_1 ; ... ; X_alpha0 | U_A])
/// with X_i = [0; B0_i(1:r_i-1) U_Blast].
inline MaxSteadySpace max_steady_space(const SpectralStructure& s, const PartitionedInput& p,
                                       const Tolerances& tol) {
  require_rows(p.B, s.n(), "partitioned B");
  const Index k = p.U_Blast.cols();
  MaxSteadySpace out;
  out.X_left = Mat::Zero(s.n(), k);
  if (s.r0 > 0 && k > 0) {
    out.X_left.topRows(s.r0) = s.A_r().partialPivLu().solve(p.B_r * p.U_Blast);
  }
  for (Index j = 0; j < s.alpha0(); ++j) {
    const Index size = s.zero_block_sizes[j];
    const Index off = s.zero_block_offsets[j];
    if (size > 1 && k > 0) {
      out.X_left.middleRows(off + 1, size - 1) = p.B0[j].topRows(size - 1) * p.U_Blast;
    }
  }
  out.U_A = p.U_A;
  out.Xtilde = hstack(out.X_left, out.U_A);
  out.basis = image_basis(out.Xtilde, tol, 1.0);
  return out;
}

/// Desired formations as columns; frame says which coordinates they use.
struct FormationSpec {
  Mat Xdf;
  Frame frame = Frame::Original;
};

struct ResidualFormation {
  Mat Xrf;                  // n x z0, unit-norm independent columns orthogonal to Ker(A)
  Mat X_r;                  // r0 x z0
  std::vector<Mat> X_zero;  // r_j x z0 per zero block
  Index projected_dim = 0;            // z0
  Index strict_intersection_dim = 0;  // dim(Im(Xdf) cap Im(U_A)^perp)
  Index z0() const { return Xrf.cols(); }
};

inline Mat formations_in_jordan(const FormationSpec& f, const SpectralStructure& s) {
  require_rows(f.Xdf, s.n(), "formation matrix");
  return f.frame == Frame::Original ? s.to_jordan(f.Xdf) : f.Xdf;
}

/// Projects Im(Xdf) onto the orthogonal complement of Ker(A) and keeps the
/// independent projected columns, in input order, scaled to unit norm.
inline ResidualFormation residual_space(const FormationSpec& f, const SpectralStructure& s, const Tolerances& tol) {
  const Mat x = formations_in_jordan(f, s);
  require_finite(x, "formations");
  const Mat u_a = kernel_of_jordan(s);
  const Mat projected = x - u_a * (u_a.transpose() * x);
  const double scale = x.cols() > 0 ? norm2(x) : 0.0;

  ResidualFormation r;
  Mat kept(s.n(), 0);
  for (Index j = 0; j < projected.cols(); ++j) {
    const Mat trial = hstack(kept, projected.col(j));
    if (numerical_rank(trial, tol, scale) > kept.cols()) kept = trial;
  }
  for (Index j = 0; j < kept.cols(); ++j) kept.col(j).normalize();
  r.Xrf = kept;
  r.projected_dim = kept.cols();

  // Strict intersection Im(X) cap Ker(U_A^T) = X * Ker(U_A^T X).
  if (x.cols() > 0) {
    const Mat xb = image_basis(x, tol);
    const Mat coeff = kernel_basis(u_a.transpose() * xb, tol, 1.0);
    r.strict_intersection_dim = coeff.cols();
  }

  r.X_r = r.Xrf.topRows(s.r0);
  for (Index j = 0; j < s.alpha0(); ++j) {
    r.X_zero.push_back(r.Xrf.middleRows(s.zero_block_offsets[j], s.zero_block_sizes[j]));
  }
  return r;
}

inline double membership_residual(const Vec& x, const MaxSteadySpace& m) {
  return distance_to_span(m.basis, x);
}

inline bool membership(const Vec& x, const MaxSteadySpace& m, const Tolerances& tol) {
  const double nx = x.norm();
  if (!(nx > 0.0)) throw Error(ErrorCode::ZeroVector, "membership: x must be nonzero");
  require_rows(x, m.basis.rows(), "x");
  return membership_residual(x, m) <= tol.residual_tol * nx;
}

enum class Eligibility { Eligible, ExcludedPositiveEig, ExcludedZeroJordan };

constexpr std::string_view to_string(Eligibility e) {
  switch (e) {
    case Eligibility::Eligible: return "eligible";
    case Eligibility::ExcludedPositiveEig: return "excluded_positive_eig";
    case Eligibility::ExcludedZeroJordan: return "excluded_zero_jordan";
  }
  return "unknown";
}

/// Rules out eigenvectors of eigenvalues with positive real part and zero
/// eigenvectors that sit at the head of a Jordan chain (x in Ker(A) cap Im(A)).
/// A and x share coordinates.
inline Eligibility eligibility(const Vec& x, const Mat& a, const Tolerances& tol) {
  const double nx = x.norm();
  if (!(nx > 0.0)) throw Error(ErrorCode::ZeroVector, "eligibility: x must be nonzero");
  require_rows(x, a.rows(), "x");
  const Vec ax = a * x;
  const double na = norm2(a);
  if (ax.norm() <= tol.residual_tol * std::max(1.0, na) * nx) {
    const Mat im = image_basis(a, tol);
    return distance_to_span(im, x) <= tol.residual_tol * nx ? Eligibility::ExcludedZeroJordan
                                                            : Eligibility::Eligible;
  }
  const double lambda = x.dot(ax) / (nx * nx);
  const double sin_angle = (ax - lambda * x).norm() / ax.norm();
  if (sin_angle <= tol.residual_tol && lambda > tol.eig_group_tol) return Eligibility::ExcludedPositiveEig;
  return Eligibility::Eligible;
}

inline Eligibility eligibility(const Vec& x, const SpectralStructure& s, const Tolerances& tol) {
  return eligibility(x, s.J, tol);
}

}  // namespace exoform
