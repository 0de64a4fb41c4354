#pragma once

// Spectral / Jordan structure of the plant matrix and the matching row
// partition of the input matrix.
//
// Conventions for the block form J = V^{-1} A V:
//   * clusters of nonzero eigenvalues come first (together they form A_r),
//     ordered by decreasing real part, then decreasing imaginary part;
//   * the zero-eigenvalue Jordan blocks J_1(0) .. J_{alpha0}(0) come last;
//   * real eigenvalues use upper Jordan blocks (ones on the superdiagonal);
//   * a complex pair a +- ib (b > 0) uses the real block [[a, b], [-b, a]].

#include "exoform/matcore.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

namespace exoform {

enum class Frame { Original, Jordan };

struct EigenCluster {
  Complex value;  // representative; Im > 0 for complex pairs
  bool complex_pair = false;
  bool is_zero = false;
  Index algebraic = 0;  // sigma_i
  Index geometric = 0;  // alpha_i
  std::vector<Index> block_sizes;
  Index row_offset = 0;
  Index rows = 0;  // sigma_i, or 2 sigma_i for a complex pair
};

struct JordanBlockGroup {
  double eigenvalue = 0.0;
  double imag = 0.0;
  std::vector<Index> block_sizes;
};

/// User-supplied Jordan structure: J is assembled from the groups in the
/// order given and A must equal T J T^{-1} (T = identity when absent).
struct JordanDeclaration {
  std::vector<JordanBlockGroup> groups;
  std::optional<Mat> transform;
};

struct SpectralStructure {
  Mat J;
  Mat V;
  Mat V_inv;
  std::vector<EigenCluster> clusters;
  Index r0 = 0;
  std::vector<Index> zero_block_sizes;
  std::vector<Index> zero_block_offsets;
  bool diagonalizable = true;
  bool orthogonal_transform = false;
  double reconstruction_residual = 0.0;

  Index n() const { return J.rows(); }
  Index alpha0() const { return static_cast<Index>(zero_block_sizes.size()); }
  Index zero_multiplicity() const { return n() - r0; }

  Mat A_r() const { return J.topLeftCorner(r0, r0); }

  const EigenCluster* zero_cluster() const {
    for (const auto& c : clusters) {
      if (c.is_zero) return &c;
    }
    return nullptr;
  }

  Mat to_jordan(const Mat& original) const { return V_inv * original; }
  Mat to_original(const Mat& jordan) const { return V * jordan; }
};

namespace detail {

inline Mat real_jordan_block(double lambda, Index size) {
  Mat b = Mat::Zero(size, size);
  for (Index i = 0; i < size; ++i) {
    b(i, i) = lambda;
    if (i + 1 < size) b(i, i + 1) = 1.0;
  }
  return b;
}

inline Mat rotation_block(double a, double b) {
  Mat m(2, 2);
  m << a, b, -b, a;
  return m;
}

inline double cluster_radius(const Mat& a, const Tolerances& tol) {
  return tol.eig_group_tol * std::max(1.0, norm2(a));
}

inline bool cluster_before(const EigenCluster& lhs, const EigenCluster& rhs) {
  if (lhs.is_zero != rhs.is_zero) return !lhs.is_zero;
  if (lhs.value.real() != rhs.value.real()) return lhs.value.real() > rhs.value.real();
  return lhs.value.imag() > rhs.value.imag();
}

// Fills J, offsets, r0 and the zero-block bookkeeping from ordered clusters.
inline void lay_out(SpectralStructure& s, Index n) {
  s.J = Mat::Zero(n, n);
  s.zero_block_sizes.clear();
  s.zero_block_offsets.clear();
  s.r0 = 0;
  Index offset = 0;
  for (auto& c : s.clusters) {
    c.row_offset = offset;
    for (Index size : c.block_sizes) {
      if (c.complex_pair) {
        s.J.block(offset, offset, 2, 2) = rotation_block(c.value.real(), c.value.imag());
        offset += 2;
      } else {
        s.J.block(offset, offset, size, size) = real_jordan_block(c.value.real(), size);
        if (c.is_zero) {
          s.zero_block_sizes.push_back(size);
          s.zero_block_offsets.push_back(offset);
        }
        offset += size;
      }
    }
    c.rows = offset - c.row_offset;
    if (!c.is_zero) s.r0 = offset;
  }
}

inline void normalize_sign(Eigen::Ref<Vec> v) {
  Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0) v = -v;
}

}  // namespace detail

inline void check_reconstruction(SpectralStructure& s, const Mat& a, const Tolerances& tol, ErrorCode on_fail,
                                 std::string_view context) {
  s.reconstruction_residual = norm2(Mat(a - s.V * s.J * s.V_inv));
  if (!(s.reconstruction_residual <= tol.residual_tol * (1.0 + norm2(a)))) {
    throw Error(on_fail, std::string(context) + ": |A - V J V^-1| = " + std::to_string(s.reconstruction_residual));
  }
}

namespace detail {

inline SpectralStructure from_declaration(const Mat& a, const JordanDeclaration& decl, const Tolerances& tol) {
  const Index n = a.rows();
  const double radius = cluster_radius(a, tol);

  // Merge declared groups that share an eigenvalue.
  std::vector<EigenCluster> clusters;
  std::vector<std::vector<std::pair<Index, Index>>> spans;  // declared (offset, cols) per cluster
  Index declared_offset = 0;
  for (const auto& g : decl.groups) {
    if (g.block_sizes.empty()) {
      throw Error(ErrorCode::DeclarationInconsistent, "declared eigenvalue without Jordan blocks");
    }
    if (g.imag < 0.0) {
      throw Error(ErrorCode::DeclarationInconsistent, "declare complex pairs with imag > 0");
    }
    const bool pair = g.imag > radius;
    Index group_cols = 0;
    for (Index size : g.block_sizes) {
      if (size < 1) throw Error(ErrorCode::DeclarationInconsistent, "block sizes must be positive");
      if (pair && size != 1) {
        throw Error(ErrorCode::DeclarationInconsistent, "defective complex pairs are not supported");
      }
      group_cols += pair ? 2 : size;
    }
    const Complex value(g.eigenvalue, pair ? g.imag : 0.0);
    auto it = std::find_if(clusters.begin(), clusters.end(), [&](const EigenCluster& c) {
      return c.complex_pair == pair && std::abs(c.value - value) <= radius;
    });
    if (it == clusters.end()) {
      EigenCluster c;
      c.value = value;
      c.complex_pair = pair;
      c.is_zero = !pair && std::abs(g.eigenvalue) <= radius;
      if (c.is_zero) c.value = 0.0;
      clusters.push_back(c);
      spans.emplace_back();
      it = std::prev(clusters.end());
    }
    const auto k = static_cast<std::size_t>(it - clusters.begin());
    for (Index size : g.block_sizes) {
      it->block_sizes.push_back(size);
      it->algebraic += size;
      it->geometric += 1;
    }
    spans[k].emplace_back(declared_offset, group_cols);
    declared_offset += group_cols;
  }

  if (declared_offset != n) {
    throw Error(ErrorCode::DeclarationInconsistent, "declared block sizes sum to " +
                                                        std::to_string(declared_offset) + ", expected " +
                                                        std::to_string(n));
  }

  Mat t = Mat::Identity(n, n);
  if (decl.transform) {
    if (decl.transform->rows() != n || decl.transform->cols() != n) {
      throw Error(ErrorCode::DeclarationInconsistent, "transform must be n x n");
    }
    require_finite(*decl.transform, "declared transform");
    t = *decl.transform;
  }

  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return cluster_before(clusters[l], clusters[r]); });

  SpectralStructure s;
  for (std::size_t k : order) s.clusters.push_back(clusters[k]);
  lay_out(s, n);

  // Transform columns follow the canonical block order.
  Mat v(n, n);
  Index dst = 0;
  for (std::size_t k : order) {
    for (const auto& [src, cols] : spans[k]) {
      v.middleCols(dst, cols) = t.middleCols(src, cols);
      dst += cols;
    }
  }
  Eigen::FullPivLU<Mat> lu(v);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::DeclarationInconsistent, "declared transform is singular");
  }
  s.V = v;
  s.V_inv = lu.inverse();
  s.diagonalizable = std::all_of(s.clusters.begin(), s.clusters.end(),
                                 [](const EigenCluster& c) { return c.algebraic == c.geometric; });
  s.orthogonal_transform = orthonormality_defect(s.V) <= tol.residual_tol;
  check_reconstruction(s, a, tol, ErrorCode::DeclarationInconsistent, "declared Jordan structure");
  return s;
}

inline SpectralStructure from_symmetric(const Mat& a, const Tolerances& tol) {
  const Index n = a.rows();
  const double radius = cluster_radius(a, tol);
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a));
  const Vec& ev = es.eigenvalues();
  Mat vecs = es.eigenvectors();
  for (Index j = 0; j < n; ++j) normalize_sign(vecs.col(j));

  // Single-linkage clustering of the sorted spectrum.
  std::vector<std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) {
    if (groups.empty() || ev(i) - ev(groups.back().back()) > radius) groups.emplace_back();
    groups.back().push_back(i);
  }

  std::vector<EigenCluster> clusters;
  std::vector<std::vector<Index>> members;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (Index i : g) mean += ev(i);
    mean /= static_cast<double>(g.size());
    EigenCluster c;
    c.is_zero = std::abs(mean) <= radius;
    c.value = c.is_zero ? 0.0 : mean;
    c.algebraic = c.geometric = static_cast<Index>(g.size());
    c.block_sizes.assign(g.size(), 1);
    clusters.push_back(c);
    members.push_back(g);
  }
  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return cluster_before(clusters[l], clusters[r]); });

  SpectralStructure s;
  s.V.resize(n, n);
  Index col = 0;
  for (std::size_t k : order) {
    s.clusters.push_back(clusters[k]);
    for (Index i : members[k]) s.V.col(col++) = vecs.col(i);
  }
  lay_out(s, n);
  s.V_inv = s.V.transpose();
  s.diagonalizable = true;
  s.orthogonal_transform = true;
  check_reconstruction(s, a, tol, ErrorCode::JordanStructureRequired,
                       "eigenvalue clusters too wide for residual_tol; declare the structure");
  return s;
}

inline SpectralStructure from_diagonalizable(const Mat& a, const Tolerances& tol, double max_condition) {
  const Index n = a.rows();
  const double radius = cluster_radius(a, tol);
  Eigen::EigenSolver<Mat> es(a);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::JordanStructureRequired, "eigen decomposition failed");
  }
  const CVec ev = es.eigenvalues();
  const CMat vecs = es.eigenvectors();

  // Keep real eigenvalues and the upper member of each conjugate pair.
  std::vector<Index> reps;
  for (Index i = 0; i < n; ++i) {
    if (ev(i).imag() >= -radius) reps.push_back(i);
  }
  std::vector<bool> used(reps.size(), false);
  std::vector<EigenCluster> clusters;
  std::vector<std::vector<Index>> members;
  for (std::size_t a_i = 0; a_i < reps.size(); ++a_i) {
    if (used[a_i]) continue;
    std::vector<Index> g;
    for (std::size_t b_i = a_i; b_i < reps.size(); ++b_i) {
      if (!used[b_i] && std::abs(ev(reps[b_i]) - ev(reps[a_i])) <= radius) {
        used[b_i] = true;
        g.push_back(reps[b_i]);
      }
    }
    Complex mean = 0.0;
    for (Index i : g) mean += ev(i);
    mean /= static_cast<double>(g.size());
    EigenCluster c;
    c.complex_pair = std::abs(mean.imag()) > radius;
    c.is_zero = !c.complex_pair && std::abs(mean) <= radius;
    c.value = c.is_zero ? Complex(0.0) : (c.complex_pair ? mean : Complex(mean.real()));
    c.algebraic = c.geometric = static_cast<Index>(g.size());
    c.block_sizes.assign(g.size(), 1);
    clusters.push_back(c);
    members.push_back(g);
  }

  Index total = 0;
  for (const auto& c : clusters) total += c.complex_pair ? 2 * c.algebraic : c.algebraic;
  if (total != n) {
    throw Error(ErrorCode::JordanStructureRequired, "unpaired complex eigenvalues; declare the structure");
  }

  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return cluster_before(clusters[l], clusters[r]); });

  SpectralStructure s;
  s.V.resize(n, n);
  Index col = 0;
  for (std::size_t k : order) {
    s.clusters.push_back(clusters[k]);
    for (Index i : members[k]) {
      const CVec v = vecs.col(i);
      if (clusters[k].complex_pair) {
        s.V.col(col++) = v.real();
        s.V.col(col++) = v.imag();
      } else {
        Vec re = v.real();
        if (re.norm() > 0) re.normalize();
        detail::normalize_sign(re);
        s.V.col(col++) = re;
      }
    }
  }
  lay_out(s, n);

  Eigen::JacobiSVD<Mat> svd(s.V);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(cond <= max_condition)) {
    throw Error(ErrorCode::JordanStructureRequired,
                "eigenvector matrix condition number " + std::to_string(cond) + " exceeds bound");
  }
  s.V_inv = s.V.partialPivLu().inverse();
  s.diagonalizable = true;
  s.orthogonal_transform = orthonormality_defect(s.V) <= tol.residual_tol;
  check_reconstruction(s, a, tol, ErrorCode::JordanStructureRequired,
                       "eigenvalue clusters too wide for residual_tol; declare the structure");
  return s;
}

}  // namespace detail

/// Spectral structure of A. Without a declaration A must be symmetric or
/// diagonalizable with an eigenvector matrix of condition number at most
/// max_condition.
inline SpectralStructure analyze_spectrum(const Mat& a, const std::optional<JordanDeclaration>& declared,
                                          const Tolerances& tol, double max_condition = 1e8) {
  tol.validate();
  require_square(a, "A");
  require_finite(a, "A");
  if (declared) return detail::from_declaration(a, *declared, tol);
  const double asym = norm2(Mat(a - a.transpose()));
  if (asym <= tol.residual_tol * (1.0 + norm2(a))) return detail::from_symmetric(a, tol);
  return detail::from_diagonalizable(a, tol, max_condition);
}

struct PartitionedInput {
  Mat B;       // Jordan coordinates, n x m
  Mat B_r;     // r0 x m
  std::vector<Mat> B0;  // r_j x m per zero block
  Mat B_last;  // alpha0 x m; row j is the last row of B0[j]
  Mat U_A;     // n x alpha0
  Mat U_Blast; // m x dim Ker(B_last)
};

/// Unit vectors at the first row of each zero block span Ker(J).
inline Mat kernel_of_jordan(const SpectralStructure& s) {
  Mat u = Mat::Zero(s.n(), s.alpha0());
  for (Index j = 0; j < s.alpha0(); ++j) u(s.zero_block_offsets[j], j) = 1.0;
  return u;
}

inline PartitionedInput partition_input(const SpectralStructure& s, const Mat& b, const Tolerances& tol,
                                        Frame frame = Frame::Original) {
  require_rows(b, s.n(), "B");
  require_finite(b, "B");
  PartitionedInput p;
  p.B = frame == Frame::Original ? s.to_jordan(b) : b;
  const Index m = p.B.cols();
  p.B_r = p.B.topRows(s.r0);
  p.B_last.resize(s.alpha0(), m);
  for (Index j = 0; j < s.alpha0(); ++j) {
    const Index off = s.zero_block_offsets[j];
    const Index size = s.zero_block_sizes[j];
    p.B0.push_back(p.B.middleRows(off, size));
    p.B_last.row(j) = p.B.row(off + size - 1);
  }
  p.U_A = kernel_of_jordan(s);
  p.U_Blast = kernel_basis(p.B_last, tol, norm2(p.B));
  return p;
}

/// Rows of B (Jordan coordinates) belonging to one eigenvalue cluster.
inline Mat cluster_rows(const EigenCluster& c, const Mat& b_jordan) {
  return b_jordan.middleRows(c.row_offset, c.rows);
}

/// Projection of B onto the left eigenvectors of one cluster: the last row of
/// each Jordan block for real eigenvalues, row_p - i row_q for each real
/// rotation block of a complex pair. Its rank is the contribution of B to the
/// PBH rank at that eigenvalue.
inline CMat left_eigen_rows(const EigenCluster& c, const Mat& b_jordan) {
  CMat out(c.geometric, b_jordan.cols());
  Index row = c.row_offset;
  for (Index k = 0; k < c.geometric; ++k) {
    if (c.complex_pair) {
      out.row(k) = b_jordan.row(row).cast<Complex>() - Complex(0.0, 1.0) * b_jordan.row(row + 1).cast<Complex>();
      row += 2;
    } else {
      row += c.block_sizes[static_cast<std::size_t>(k)];
      out.row(k) = b_jordan.row(row - 1).cast<Complex>();
    }
  }
  return out;
}

inline Index effective_rank(const EigenCluster& c, const Mat& b_jordan, const Tolerances& tol) {
  if (b_jordan.cols() == 0) return 0;
  return numerical_rank(left_eigen_rows(c, b_jordan), tol, norm2(b_jordan));
}

}  // namespace exoform
