#pragma once

// Exogenous system, performance index and augmented closed-loop data.

#include "exoform/inputdesign.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace exoform {

struct ExogenousSystem {
  Mat H;   // m x k
  Mat F1;  // k x n
  Mat F2;  // k x k
  Mat G;   // k x p
  Mat K;   // m x p
  Index k() const { return H.cols(); }
  Index p() const { return K.cols(); }
};

struct PerformanceIndex {
  Mat C;  // (n-1) x n
  Mat Q;  // C^T C
};

struct AugmentedSystem {
  Mat Abar, Bbar, Cbar, Qbar;
  Index n = 0;  // plant states
  Index k = 0;  // exogenous states
  Index N() const { return n + k; }
};

inline AugmentedSystem assemble_augmented(const Mat& a, const Mat& b, const ExogenousSystem& e,
                                          const PerformanceIndex& pi) {
  require_square(a, "A");
  const Index n = a.rows();
  const Index m = b.cols();
  const Index k = e.k();
  require_rows(b, n, "B");
  require_rows(e.H, m, "H");
  require_rows(e.K, m, "K");
  require_rows(e.F1, k, "F1");
  require_rows(e.F2, k, "F2");
  require_rows(e.G, k, "G");
  if (e.F1.cols() != n || e.F2.cols() != k || e.G.cols() != e.p()) {
    throw Error(ErrorCode::DimensionMismatch, "exogenous system blocks have inconsistent widths");
  }
  if (pi.C.cols() != n) throw Error(ErrorCode::DimensionMismatch, "C must have n columns");

  AugmentedSystem s;
  s.n = n;
  s.k = k;
  s.Abar = Mat::Zero(n + k, n + k);
  s.Abar.topLeftCorner(n, n) = a;
  s.Abar.topRightCorner(n, k) = b * e.H;
  s.Abar.bottomLeftCorner(k, n) = e.F1;
  s.Abar.bottomRightCorner(k, k) = e.F2;
  s.Bbar = vstack(b * e.K, e.G);
  s.Cbar = Mat::Zero(pi.C.rows(), n + k);
  s.Cbar.leftCols(n) = pi.C;
  s.Qbar = s.Cbar.transpose() * s.Cbar;
  return s;
}

/// One representative per eigenvalue cluster of M. When M is singular, zero
/// is reported exactly and computed eigenvalues within sqrt(eig_group_tol)
/// of it are absorbed: defective zero blocks split by roughly eps^(1/size).
inline std::vector<Complex> eigenvalue_clusters(const Mat& m, const Tolerances& tol) {
  std::vector<Complex> reps;
  if (m.size() == 0) return reps;
  const double scale = std::max(1.0, norm2(m));
  const double radius = tol.eig_group_tol * scale;
  Eigen::EigenSolver<Mat> es(m, false);
  const CVec ev = es.eigenvalues();
  std::vector<bool> used(static_cast<std::size_t>(ev.size()), false);
  if (numerical_rank(m, tol, scale) < m.rows()) {
    reps.push_back(0.0);
    const double zero_radius = std::sqrt(tol.eig_group_tol) * scale;
    for (Index i = 0; i < ev.size(); ++i) {
      if (std::abs(ev(i)) <= zero_radius) used[static_cast<std::size_t>(i)] = true;
    }
  }
  for (Index i = 0; i < ev.size(); ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    Complex sum = 0.0;
    int count = 0;
    for (Index j = i; j < ev.size(); ++j) {
      if (!used[static_cast<std::size_t>(j)] && std::abs(ev(j) - ev(i)) <= radius) {
        used[static_cast<std::size_t>(j)] = true;
        sum += ev(j);
        ++count;
      }
    }
    Complex mean = sum / static_cast<double>(count);
    if (std::abs(mean.imag()) <= radius) mean = mean.real();
    reps.push_back(mean);
  }
  return reps;
}

/// Eigenvalues with Re >= -radius at which rank [A - lambda I, B] < N.
inline std::vector<Complex> unstabilizable_modes(const Mat& a, const Mat& b, const Tolerances& tol) {
  const Index n = a.rows();
  const double radius = tol.eig_group_tol * std::max(1.0, norm2(a));
  std::vector<Complex> out;
  for (const Complex& lambda : eigenvalue_clusters(a, tol)) {
    if (lambda.real() < -radius) continue;
    CMat m(n, n + b.cols());
    m.leftCols(n) = a.cast<Complex>() - lambda * CMat::Identity(n, n);
    m.rightCols(b.cols()) = b.cast<Complex>();
    if (numerical_rank(m, tol, std::max(1.0, norm2(a))) < n) out.push_back(lambda);
  }
  return out;
}

/// Eigenvalues with Re >= -radius at which rank [A - lambda I ; C] < N.
inline std::vector<Complex> undetectable_modes(const Mat& a, const Mat& c, const Tolerances& tol) {
  const Index n = a.rows();
  const double radius = tol.eig_group_tol * std::max(1.0, norm2(a));
  std::vector<Complex> out;
  for (const Complex& lambda : eigenvalue_clusters(a, tol)) {
    if (lambda.real() < -radius) continue;
    CMat m(n + c.rows(), n);
    m.topRows(n) = a.cast<Complex>() - lambda * CMat::Identity(n, n);
    m.bottomRows(c.rows()) = c.cast<Complex>();
    if (numerical_rank(m, tol, std::max(1.0, norm2(a))) < n) out.push_back(lambda);
  }
  return out;
}

struct AssumptionReport {
  bool stabilizable = false;              // (Abar, Bbar)
  std::vector<Complex> unstabilizable;
  std::vector<Complex> undetectable;      // of (Cbar, Abar)
  bool only_zero_undetectable = false;
  bool zero_semisimple = true;            // restricted to the unobservable subspace
  Index unobservable_zero_dim = 0;        // dim Ker([Abar; Cbar])
  bool stabilizable_ok() const { return stabilizable; }
  bool detectability_ok() const { return only_zero_undetectable && zero_semisimple; }
  bool pass() const { return stabilizable_ok() && detectability_ok(); }
};

inline Mat scaled(const Mat& m) {
  const double s = norm2(m);
  return s > 0 ? Mat(m / s) : m;
}

/// Stabilizability; zero as the only undetectable eigenvalue, and semisimple on
/// the unobservable subspace: dim Ker([A^2; C; CA]) equals dim Ker([A; C]).
inline AssumptionReport verify_assumptions(const AugmentedSystem& s, const Tolerances& tol) {
  AssumptionReport r;
  r.unstabilizable = unstabilizable_modes(s.Abar, s.Bbar, tol);
  r.stabilizable = r.unstabilizable.empty();
  r.undetectable = undetectable_modes(s.Abar, s.Cbar, tol);
  r.only_zero_undetectable =
      std::all_of(r.undetectable.begin(), r.undetectable.end(), [](const Complex& z) { return z == 0.0; });
  const Mat a = scaled(s.Abar);
  const Mat c = s.Cbar.rows() > 0 ? scaled(s.Cbar) : s.Cbar;
  const Mat k1 = kernel_basis(vstack(a, c), tol, 1.0);
  r.unobservable_zero_dim = k1.cols();
  if (!r.undetectable.empty()) {
    const Mat k2 = kernel_basis(vstack(vstack(scaled(Mat(a * a)), c), c.rows() > 0 ? Mat(c * a) : c), tol, 1.0);
    r.zero_semisimple = k2.cols() == k1.cols();
  }
  return r;
}

/// C^T spans the orthogonal complement of x_df, so Ker(C) = span(x_df).
inline PerformanceIndex design_C(const Vec& x_df, const Tolerances& tol) {
  if (!(x_df.norm() > 0.0)) throw Error(ErrorCode::ZeroVector, "design_C: x_df must be nonzero");
  require_finite(x_df, "x_df");
  PerformanceIndex pi;
  pi.C = kernel_basis(Mat(x_df.transpose()), tol).transpose();
  pi.Q = pi.C.transpose() * pi.C;
  return pi;
}

struct ExoOptions {
  double k_perturbation = 0.25;
  int reseeds = 16;
};

/// Explicit exogenous matrices; any that are absent are synthesized.
struct ExoOverrides {
  std::optional<Mat> H, K, G;
};

/// H spans Ker(B_last); F1 = 0, F2 = 0, p = m, K = I + seeded perturbation,
/// G seeded uniform in [-1, 1]. Re-draws until (Abar, Bbar) is stabilizable.
inline ExogenousSystem design_exo(const SpectralStructure& s, const PartitionedInput& p, const PerformanceIndex& pi,
                                  std::uint64_t seed, const Tolerances& tol, const ExoOverrides& ov = {},
                                  const ExoOptions& opts = {}) {
  const Index m = p.B.cols();
  if (numerical_rank(p.B, tol) != m) {
    throw Error(ErrorCode::DimensionMismatch, "B must have full column rank");
  }
  ExogenousSystem e;
  e.H = ov.H ? *ov.H : p.U_Blast;
  require_rows(e.H, m, "H");
  const Index k = e.H.cols();
  e.F1 = Mat::Zero(k, s.n());
  e.F2 = Mat::Zero(k, k);
  const int attempts = ov.K && ov.G ? 1 : opts.reseeds;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt) * 0xD1B54A32D192ED03ULL);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    e.K = Mat::Identity(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) e.K(i, j) += opts.k_perturbation * unif(rng);
    e.G.resize(k, m);
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < m; ++j) e.G(i, j) = unif(rng);
    if (ov.K) e.K = *ov.K;
    if (ov.G) e.G = *ov.G;
    require_rows(e.K, m, "K");
    require_rows(e.G, k, "G");
    if (e.K.cols() != m || e.G.cols() != m) {
      throw Error(ErrorCode::DimensionMismatch, "K must be m x m and G k x m");
    }
    const AugmentedSystem aug = assemble_augmented(s.J, p.B, e, pi);
    if (unstabilizable_modes(aug.Abar, aug.Bbar, tol).empty()) return e;
  }
  throw Error(ErrorCode::StabilizabilityFailed,
              "(Abar, Bbar) not stabilizable after " + std::to_string(attempts) + " draw(s)");
}

}  // namespace exoform
