#pragma once

// Shared data: the four-agent network of the numerical examples and random
// systems in block form.

#include "exoform/exoform.hpp"

#include <random>

namespace fixtures {

using exoform::Index;
using exoform::Mat;
using exoform::Vec;

inline Mat four_agent_laplacian() {
  Mat l(4, 4);
  l << 2, -1, 0, -1, -1, 3, -2, 0, 0, -2, 5, -3, -1, 0, -3, 4;
  return l;
}

inline Mat four_agent_A() { return -exoform::kron(four_agent_laplacian(), Mat::Identity(3, 3)); }

inline Vec line_formation() {
  Vec v(12);
  v << 1, 1, 0, 10.0 / 3, 10.0 / 3, 0, 7.0 / 3, 7.0 / 3, 0, 2, 2, 0;
  return v;
}

inline Vec square_formation() {
  Vec v(12);
  v << -1, 1, 0, 1, 1, 0, -1, -1, 0, 1, -1, 0;
  return v;
}

inline Vec tetrahedron_formation() {
  Vec v(12);
  v << 1, 0, 0, 0, 1.5, 0, -1, 0, 0, 0, 0, 2;
  return v;
}

inline std::string scenario_path(const std::string& name) {
  return std::string(EXOFORM_SCENARIO_DIR) + "/" + name + ".json";
}

struct RandomJordan {
  exoform::JordanDeclaration decl;
  Mat J;  // block form in declaration order
  Mat A;  // T J T^{-1}
};

/// Random block-form system with n <= max_n: zero blocks of size 1-3, real
/// eigenvalues in [-3, -0.5] or [0.5, 2] with blocks of size 1-2, and at most
/// one complex pair. transform_scale 0 keeps A = J.
inline RandomJordan random_jordan(std::mt19937_64& rng, Index max_n, double transform_scale = 0.0,
                                  bool allow_positive = true) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> zero_blocks(0, 3);
  std::uniform_int_distribution<int> size3(1, 3);
  std::uniform_int_distribution<int> size2(1, 2);
  std::uniform_real_distribution<double> neg(-3.0, -0.5);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  for (;;) {
    RandomJordan r;
    Index n = 0;
    exoform::JordanBlockGroup zero;
    for (int i = zero_blocks(rng); i > 0; --i) {
      const Index s = size3(rng);
      zero.block_sizes.push_back(s);
      n += s;
    }
    if (!zero.block_sizes.empty()) r.decl.groups.push_back(zero);
    const int real_groups = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int g = 0; g < real_groups; ++g) {
      exoform::JordanBlockGroup grp;
      grp.eigenvalue = (allow_positive && coin(rng) && coin(rng)) ? pos(rng) : neg(rng);
      const Index s = size2(rng);
      grp.block_sizes.push_back(s);
      n += s;
      r.decl.groups.push_back(grp);
    }
    if (coin(rng)) {
      exoform::JordanBlockGroup pair;
      pair.eigenvalue = neg(rng);
      pair.imag = pos(rng);
      pair.block_sizes.push_back(1);
      n += 2;
      r.decl.groups.push_back(pair);
    }
    if (n == 0 || n > max_n) continue;
    r.J = Mat::Zero(n, n);
    Index off = 0;
    for (const auto& g : r.decl.groups) {
      for (Index s : g.block_sizes) {
        if (g.imag > 0) {
          r.J.block(off, off, 2, 2) << g.eigenvalue, g.imag, -g.imag, g.eigenvalue;
          off += 2;
        } else {
          for (Index i = 0; i < s; ++i) {
            r.J(off + i, off + i) = g.eigenvalue;
            if (i + 1 < s) r.J(off + i, off + i + 1) = 1.0;
          }
          off += s;
        }
      }
    }
    Mat t = Mat::Identity(n, n);
    if (transform_scale > 0) {
      std::normal_distribution<double> nd(0.0, transform_scale);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) t(i, j) += nd(rng);
      r.decl.transform = t;
    }
    r.A = t * r.J * t.inverse();
    return r;
  }
}

}  // namespace fixtures
