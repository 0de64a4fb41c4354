#pragma once

// Input-matrix construction B = [B^df B^c] that places residual formations
// in the maximal steady-state space and completes controllability.

#include "exoform/steadyspace.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace exoform {

/// B^df = [A_r X_r ; X_1(2:r_1) ; 0 ; ... ; X_alpha0(2:r_alpha0) ; 0] in Jordan
/// coordinates: each zero block receives its formation rows shifted up by one.
inline Mat design_Bdf(const ResidualFormation& r, const SpectralStructure& s) {
  require_rows(r.Xrf, s.n(), "residual formations");
  const Index z0 = r.z0();
  Mat b = Mat::Zero(s.n(), z0);
  if (z0 == 0) return b;
  b.topRows(s.r0) = s.A_r() * r.X_r;
  for (Index j = 0; j < s.alpha0(); ++j) {
    const Index size = s.zero_block_sizes[j];
    const Index off = s.zero_block_offsets[j];
    if (size > 1) b.middleRows(off, size - 1) = r.X_zero[j].bottomRows(size - 1);
  }
  return b;
}

/// PBH rank deficit of B at each eigenvalue cluster.
inline std::vector<Index> controllability_deficits(const SpectralStructure& s, const Mat& b_jordan,
                                                   const Tolerances& tol) {
  std::vector<Index> out;
  for (const auto& c : s.clusters) out.push_back(c.geometric - effective_rank(c, b_jordan, tol));
  return out;
}

/// Number of completion columns: the largest per-cluster deficit.
inline Index completion_columns(const SpectralStructure& s, const Mat& bdf, const Tolerances& tol) {
  Index c = 0;
  for (Index d : controllability_deficits(s, bdf, tol)) c = std::max(c, d);
  return c;
}

struct CompletionOptions {
  int redraws_per_column = 64;
};

/// Greedy completion: each accepted random unit column raises the effective
/// rank of every unsaturated cluster and the column rank of [B^df B^c].
inline Mat design_Bc(const SpectralStructure& s, const Mat& bdf, std::uint64_t seed, const Tolerances& tol,
                     const CompletionOptions& opts = {}) {
  require_rows(bdf, s.n(), "B^df");
  const Index count = completion_columns(s, bdf, tol);
  Mat bc(s.n(), 0);
  if (count == 0) return bc;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat current = bdf;
  for (Index col = 0; col < count; ++col) {
    const auto before = controllability_deficits(s, current, tol);
    const Index col_rank = numerical_rank(current, tol);
    bool accepted = false;
    for (int attempt = 0; attempt < opts.redraws_per_column && !accepted; ++attempt) {
      Vec v(s.n());
      for (Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
      v.normalize();
      const Mat trial = hstack(current, v);
      if (numerical_rank(trial, tol) != col_rank + 1) continue;
      const auto after = controllability_deficits(s, trial, tol);
      bool raises = true;
      for (std::size_t k = 0; k < before.size(); ++k) {
        if (before[k] > 0 && after[k] != before[k] - 1) raises = false;
      }
      if (!raises) continue;
      current = trial;
      bc = hstack(bc, v);
      accepted = true;
    }
    if (!accepted) {
      throw Error(ErrorCode::CompletionFailed, "no admissible completion column after " +
                                                   std::to_string(opts.redraws_per_column) + " draws");
    }
  }
  return bc;
}

/// PBH rank of [A - lambda I, B] at one cluster (Jordan coordinates).
inline Index pbh_rank(const SpectralStructure& s, const EigenCluster& c, const Mat& b_jordan, const Tolerances& tol) {
  const Index n = s.n();
  CMat m(n, n + b_jordan.cols());
  m.leftCols(n) = s.J.cast<Complex>() - c.value * CMat::Identity(n, n);
  m.rightCols(b_jordan.cols()) = b_jordan.cast<Complex>();
  return numerical_rank(m, tol, std::max(1.0, norm2(s.J)));
}

struct ClusterDiagnostic {
  Complex value;
  Index geometric = 0;
  Index pbh_rank = 0;
  Index effective_rank = 0;
  Index full_row_rank = 0;  // rank of the cluster's whole row block
};

inline std::vector<ClusterDiagnostic> controllability_report(const SpectralStructure& s, const Mat& b_jordan,
                                                             const Tolerances& tol) {
  std::vector<ClusterDiagnostic> out;
  for (const auto& c : s.clusters) {
    ClusterDiagnostic d;
    d.value = c.value;
    d.geometric = c.geometric;
    d.pbh_rank = pbh_rank(s, c, b_jordan, tol);
    d.effective_rank = effective_rank(c, b_jordan, tol);
    const Mat rows = cluster_rows(c, b_jordan);
    d.full_row_rank = rows.size() == 0 ? 0 : numerical_rank(rows, tol, norm2(b_jordan));
    out.push_back(d);
  }
  return out;
}

inline bool check_controllability(const SpectralStructure& s, const Mat& b_jordan, const Tolerances& tol) {
  require_rows(b_jordan, s.n(), "B");
  for (const auto& c : s.clusters) {
    if (pbh_rank(s, c, b_jordan, tol) < s.n()) return false;
  }
  return true;
}

struct InputDesign {
  Mat Bdf;  // Jordan coordinates, unit columns
  Mat Bc;
  Mat B;    // [Bdf Bc]
  Index predicted_columns = 0;  // z0 + max deficit
  std::vector<Index> deficits;  // of B^df
  std::uint64_t seed_used = 0;
  int reseeds = 0;
};

/// Full input design; re-seeds the completion when a draw run fails.
inline InputDesign design_input(const ResidualFormation& r, const SpectralStructure& s, std::uint64_t seed,
                                const Tolerances& tol, int max_reseeds = 8) {
  InputDesign d;
  d.Bdf = design_Bdf(r, s);
  for (Index j = 0; j < d.Bdf.cols(); ++j) {
    const double nrm = d.Bdf.col(j).norm();
    if (nrm > 0) d.Bdf.col(j) /= nrm;
  }
  d.deficits = controllability_deficits(s, d.Bdf, tol);
  d.predicted_columns = d.Bdf.cols() + completion_columns(s, d.Bdf, tol);
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t sd = seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL;
    try {
      d.Bc = design_Bc(s, d.Bdf, sd, tol);
      d.seed_used = sd;
      d.reseeds = attempt;
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CompletionFailed || attempt + 1 >= max_reseeds) throw;
    }
  }
  d.B = hstack(d.Bdf, d.Bc);
  return d;
}

}  // namespace exoform
