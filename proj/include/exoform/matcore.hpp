#pragma once

// Dense real-matrix utilities with explicit tolerance contracts.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace exoform {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Index = Eigen::Index;
using Complex = std::complex<double>;

enum class ErrorCode {
  NonFinite,
  DimensionMismatch,
  NotSquare,
  NotOrthonormal,
  ZeroVector,
  InvalidTolerance,
  JordanStructureRequired,
  DeclarationInconsistent,
  CompletionFailed,
  StabilizabilityFailed,
  RiccatiDiverged,
  NoConvergence,
  NotMarginallyStable,
  DefectiveZeroEigenvalue,
  ScalingUnreachable,
  MultipleZeroModes,
  Diverged,
  Schema,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::NotOrthonormal: return "NotOrthonormal";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InvalidTolerance: return "InvalidTolerance";
    case ErrorCode::JordanStructureRequired: return "JordanStructureRequired";
    case ErrorCode::DeclarationInconsistent: return "DeclarationInconsistent";
    case ErrorCode::CompletionFailed: return "CompletionFailed";
    case ErrorCode::StabilizabilityFailed: return "StabilizabilityFailed";
    case ErrorCode::RiccatiDiverged: return "RiccatiDiverged";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotMarginallyStable: return "NotMarginallyStable";
    case ErrorCode::DefectiveZeroEigenvalue: return "DefectiveZeroEigenvalue";
    case ErrorCode::ScalingUnreachable: return "ScalingUnreachable";
    case ErrorCode::MultipleZeroModes: return "MultipleZeroModes";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Numerical thresholds that realise exact-arithmetic conditions.
///
/// rank_tol is relative to the largest singular value; eig_group_tol is the
/// eigenvalue clustering radius (scaled by max(1, |A|)); residual_tol bounds
/// equation residuals; psd_tol is the admitted negative-eigenvalue magnitude.
struct Tolerances {
  double rank_tol = 1e-10;
  double eig_group_tol = 1e-6;
  double residual_tol = 1e-8;
  double psd_tol = 1e-9;

  void validate() const {
    if (!(rank_tol > 0) || !(eig_group_tol > 0) || !(residual_tol > 0) || !(psd_tol > 0)) {
      throw Error(ErrorCode::InvalidTolerance, "all tolerances must be strictly positive");
    }
  }
};

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view what) {
  if (!m.derived().allFinite()) {
    throw Error(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
  }
}

inline void require_square(const Mat& m, std::string_view what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::NotSquare, std::string(what) + " must be square, got " +
                                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline void require_rows(const Mat& m, Index rows, std::string_view what) {
  if (m.rows() != rows) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must have " + std::to_string(rows) +
                                                  " rows, got " + std::to_string(m.rows()));
  }
}

/// Spectral norm; zero for empty matrices.
template <typename Derived>
double norm2(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  using Plain = typename Derived::PlainObject;
  Eigen::JacobiSVD<Plain> svd(m.derived().eval());
  return svd.singularValues()(0);
}

/// Count of singular values above rank_tol * max(sigma_max, scale). A
/// positive scale supplies an absolute floor for matrices that should be
/// exactly zero but carry rounding noise. Works for real and complex input.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& m, const Tolerances& tol, double scale = 0.0) {
  if (m.size() == 0) return 0;
  using Plain = typename Derived::PlainObject;
  Eigen::JacobiSVD<Plain> svd(m.derived().eval());
  const auto& s = svd.singularValues();
  const double threshold = tol.rank_tol * std::max(s(0), scale);
  if (!(threshold > 0.0)) return 0;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > threshold) ++r;
  }
  return r;
}

/// Orthonormal basis of Ker(M); a cols(M) x 0 matrix when the kernel is trivial.
inline Mat kernel_basis(const Mat& m, const Tolerances& tol, double scale = 0.0) {
  require_finite(m, "kernel_basis input");
  const Index n = m.cols();
  if (m.rows() == 0) return Mat::Identity(n, n);
  if (n == 0) return Mat(0, 0);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double threshold = tol.rank_tol * std::max(s(0), scale);
  Index r = 0;
  if (threshold > 0.0) {
    for (Index i = 0; i < s.size(); ++i) {
      if (s(i) > threshold) ++r;
    }
  }
  return svd.matrixV().rightCols(n - r);
}

/// Orthonormal basis of Im(M); a rows(M) x 0 matrix for the zero map.
inline Mat image_basis(const Mat& m, const Tolerances& tol, double scale = 0.0) {
  require_finite(m, "image_basis input");
  if (m.cols() == 0 || m.rows() == 0) return Mat(m.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double threshold = tol.rank_tol * std::max(s(0), scale);
  Index r = 0;
  if (threshold > 0.0) {
    for (Index i = 0; i < s.size(); ++i) {
      if (s(i) > threshold) ++r;
    }
  }
  return svd.matrixU().leftCols(r);
}

/// Largest deviation of U^T U from the identity.
inline double orthonormality_defect(const Mat& u) {
  if (u.cols() == 0) return 0.0;
  return (u.transpose() * u - Mat::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

/// Distance from x to Im(U) for orthonormal U.
inline double distance_to_span(const Mat& u, const Vec& x) {
  if (u.cols() == 0) return x.norm();
  return (x - u * (u.transpose() * x)).norm();
}

/// Sine of the largest principal angle between Im(U1) and Im(U2), both
/// orthonormal with equal column counts.
inline double largest_principal_angle_sin(const Mat& u1, const Mat& u2) {
  if (u1.cols() == 0) return 0.0;
  const Mat residual = u2 - u1 * (u1.transpose() * u2);
  return norm2(residual);
}

inline bool subspace_equal(const Mat& u1, const Mat& u2, const Tolerances& tol) {
  if (u1.rows() != u2.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "subspace_equal: row counts differ");
  }
  const double orth_tol = std::sqrt(tol.residual_tol);
  if (orthonormality_defect(u1) > orth_tol || orthonormality_defect(u2) > orth_tol) {
    throw Error(ErrorCode::NotOrthonormal, "subspace_equal: inputs must have orthonormal columns");
  }
  if (u1.cols() != u2.cols()) return false;
  return largest_principal_angle_sin(u1, u2) <= tol.residual_tol;
}

template <typename DA, typename DB>
Mat kron(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  require_finite(a, "kron left factor");
  require_finite(b, "kron right factor");
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// e^{M h} by Pade scaling-and-squaring.
inline Mat expm_step(const Mat& m, double h) {
  require_square(m, "expm_step matrix");
  require_finite(m, "expm_step matrix");
  if (!(h >= 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::DimensionMismatch, "expm_step requires a finite h >= 0");
  }
  if (m.size() == 0) return m;
  const Mat scaled = m * h;
  return scaled.exp();
}

inline Mat vstack(const Mat& top, const Mat& bottom) {
  if (top.cols() != bottom.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "vstack: column counts differ");
  }
  Mat out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

inline Mat hstack(const Mat& left, const Mat& right) {
  if (left.rows() != right.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "hstack: row counts differ");
  }
  Mat out(left.rows(), left.cols() + right.cols());
  out.leftCols(left.cols()) = left;
  out.rightCols(right.cols()) = right;
  return out;
}

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline double min_symmetric_eigenvalue(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace exoform
