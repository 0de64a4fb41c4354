#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exoform;
using Catch::Approx;

namespace {

const Tolerances kTol;

JordanDeclaration nilpotent2() {
  JordanDeclaration d;
  d.groups.push_back({0.0, 0.0, {2}});
  return d;
}

}  // namespace

TEST_CASE("symmetric Laplacian dynamics: clusters and orthogonal transform", "[spectra]") {
  const SpectralStructure s = analyze_spectrum(fixtures::four_agent_A(), std::nullopt, kTol);
  REQUIRE(s.clusters.size() == 4);
  CHECK(s.r0 == 9);
  CHECK(s.alpha0() == 3);
  CHECK(s.zero_block_sizes == std::vector<Index>{1, 1, 1});
  CHECK(s.orthogonal_transform);
  CHECK(s.diagonalizable);
  // nonzero clusters first, decreasing real part
  CHECK(s.clusters[0].value.real() == Approx(-2.4746).margin(5e-5));
  CHECK(s.clusters[1].value.real() == Approx(-3.3691).margin(5e-5));
  CHECK(s.clusters[2].value.real() == Approx(-8.1563).margin(5e-5));
  CHECK(s.clusters[3].is_zero);
  for (const auto& c : s.clusters) CHECK(c.algebraic == 3);
  CHECK(s.reconstruction_residual <= kTol.residual_tol);
  CHECK((s.V * s.V_inv - Mat::Identity(12, 12)).norm() <= 1e-12);
}

TEST_CASE("declared Jordan structure and its consistency check", "[spectra]") {
  Mat a(2, 2);
  a << 0, 1, 0, 0;
  const SpectralStructure s = analyze_spectrum(a, nilpotent2(), kTol);
  CHECK(s.alpha0() == 1);
  CHECK(s.zero_block_sizes[0] == 2);
  CHECK_FALSE(s.diagonalizable);
  CHECK(s.r0 == 0);

  // Wrong block sizes for the same matrix.
  JordanDeclaration wrong;
  wrong.groups.push_back({0.0, 0.0, {1, 1}});
  CHECK_THROWS_AS(analyze_spectrum(a, wrong, kTol), Error);
  JordanDeclaration short_decl;
  short_decl.groups.push_back({0.0, 0.0, {1}});
  CHECK_THROWS_AS(analyze_spectrum(a, short_decl, kTol), Error);
}

TEST_CASE("defective matrices without a declaration are refused", "[spectra]") {
  Mat a(2, 2);
  a << -1, 1, 0, -1;
  try {
    analyze_spectrum(a, std::nullopt, kTol);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::JordanStructureRequired);
  }
}

TEST_CASE("non-symmetric diagonalizable and complex spectra", "[spectra]") {
  Mat a(3, 3);
  a << -1, 2, 0, -2, -1, 0, 0, 0, 0;
  const SpectralStructure s = analyze_spectrum(a, std::nullopt, kTol);
  REQUIRE(s.clusters.size() == 2);
  CHECK(s.clusters[0].complex_pair);
  CHECK(s.clusters[0].rows == 2);
  CHECK(std::abs(s.clusters[0].value - Complex(-1, 2)) < 1e-12);
  CHECK(s.alpha0() == 1);
  CHECK((s.V * s.J * s.V_inv - a).norm() <= 1e-12);
}

TEST_CASE("random declared systems round-trip through the transform", "[spectra][property]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto r = fixtures::random_jordan(rng, 8, 0.3);
    const SpectralStructure s = analyze_spectrum(r.A, r.decl, kTol);
    CHECK((s.V * s.J * s.V_inv - r.A).norm() <= kTol.residual_tol * (1 + norm2(r.A)));
    Index zeros = 0;
    for (const auto& g : r.decl.groups) {
      if (g.eigenvalue == 0.0 && g.imag == 0.0) zeros += static_cast<Index>(g.block_sizes.size());
    }
    CHECK(s.alpha0() == zeros);
    // Ker(J) is spanned by the first row of each zero block
    CHECK(subspace_equal(kernel_of_jordan(s), kernel_basis(s.J, kTol), kTol));
  }
}

TEST_CASE("partition of B and Ker(B_last)", "[spectra]") {
  const SpectralStructure s = analyze_spectrum(fixtures::four_agent_A(), std::nullopt, kTol);
  Mat b = Mat::Zero(12, 9);
  b.topRows(9) = Mat::Identity(9, 9);
  const PartitionedInput p = partition_input(s, b, kTol);
  CHECK(p.B_r.rows() == 9);
  CHECK(p.B_last.rows() == 3);
  CHECK(p.B0.size() == 3);
  // consensus rows of B: each zero-block row is (1/2) * sum of the agent blocks 1..3
  CHECK(numerical_rank(p.B_last, kTol) == 3);
  CHECK(p.U_Blast.cols() == 6);
  CHECK((p.B_last * p.U_Blast).norm() <= 1e-12);
  CHECK(orthonormality_defect(p.U_Blast) <= kTol.residual_tol);
  CHECK(p.U_A.cols() == 3);
}

TEST_CASE("effective rank uses the last row of each Jordan block", "[spectra]") {
  Mat a(2, 2);
  a << 0, 1, 0, 0;
  const SpectralStructure s = analyze_spectrum(a, nilpotent2(), kTol);
  Mat top(2, 1), bottom(2, 1);
  top << 1, 0;
  bottom << 0, 1;
  const EigenCluster& z = *s.zero_cluster();
  CHECK(effective_rank(z, top, kTol) == 0);
  CHECK(effective_rank(z, bottom, kTol) == 1);
  // PBH oracle: only the bottom input controls the chain
  CHECK(oracle::kalman_rank(a, top) == 1);
  CHECK(oracle::kalman_rank(a, bottom) == 2);
}
