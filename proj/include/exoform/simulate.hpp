#pragma once

// Closed-loop simulation on a uniform grid with exact stepping
// xbar(t + h) = e^{Acl h} xbar(t), v = -Bbar^T P xbar.

#include "exoform/steadystate.hpp"

#include <optional>
#include <vector>

namespace exoform {

struct SimConfig {
  double t_final = 40.0;
  double step = 0.01;
  double conv_tol = 1e-6;
  double window_fraction = 0.1;
  double divergence_bound = 1e12;
};

struct SimulationTrace {
  std::vector<double> times;
  std::vector<Vec> xbar;   // internal (Jordan) coordinates
  std::vector<Vec> plant;  // plant states mapped back to original coordinates
  std::vector<double> vnorm;
  std::vector<double> cost;  // 0.5 * int (xbar^T Qbar xbar + |v|^2)
  std::optional<double> converged_at;
  Index n = 0;
  Index k = 0;

  bool empty() const { return times.empty(); }
  Vec final_state() const { return xbar.empty() ? Vec() : xbar.back(); }
  Vec final_plant() const { return plant.empty() ? Vec() : plant.back(); }
};

/// plant_map (n x n) maps Jordan plant coordinates to the frame written to
/// the trace; identity when empty.
inline SimulationTrace simulate(const RiccatiSolution& r, const AugmentedSystem& sys, const Vec& xbar0,
                                const SimConfig& cfg, const Mat& plant_map = Mat()) {
  require_rows(xbar0, sys.N(), "xbar0");
  require_finite(xbar0, "xbar0");
  if (!(cfg.t_final >= 0.0) || !(cfg.step > 0.0) || !std::isfinite(cfg.t_final)) {
    throw Error(ErrorCode::DimensionMismatch, "simulation requires t_final >= 0 and step > 0");
  }
  const Index n = sys.n;
  const Mat map = plant_map.size() == 0 ? Mat(Mat::Identity(n, n)) : plant_map;
  require_rows(map, n, "plant map");

  const auto steps = static_cast<long>(std::llround(cfg.t_final / cfg.step));
  const double h = steps > 0 ? cfg.t_final / static_cast<double>(steps) : 0.0;
  const Mat phi = expm_step(r.Acl, h);
  // Exact running cost per step (Van Loan): with M = Qbar + gain^T gain,
  // int_0^h e^{Acl^T s} M e^{Acl s} ds = E22^T E12 of exp([-Acl^T, M; 0, Acl] h).
  const Index big_n = sys.N();
  Mat vl = Mat::Zero(2 * big_n, 2 * big_n);
  vl.topLeftCorner(big_n, big_n) = -r.Acl.transpose();
  vl.topRightCorner(big_n, big_n) = sys.Qbar + r.gain.transpose() * r.gain;
  vl.bottomRightCorner(big_n, big_n) = r.Acl;
  const Mat ev = expm_step(vl, h);
  const Mat step_cost = symmetrize(ev.bottomRightCorner(big_n, big_n).transpose() * ev.topRightCorner(big_n, big_n));

  SimulationTrace tr;
  tr.n = n;
  tr.k = sys.k;
  const auto record = [&](double t, const Vec& x, double cost) {
    tr.times.push_back(t);
    tr.xbar.push_back(x);
    tr.plant.push_back(map * x.head(n));
    tr.vnorm.push_back((r.gain * x).norm());
    tr.cost.push_back(cost);
  };
  Vec x = xbar0;
  double cost = 0.0;
  record(0.0, x, cost);
  for (long i = 1; i <= steps; ++i) {
    cost += 0.5 * std::max(0.0, x.dot(step_cost * x));
    x = phi * x;
    if (!x.allFinite() || x.norm() > cfg.divergence_bound) {
      throw Error(ErrorCode::Diverged, "state norm exceeded bound at t = " + std::to_string(i * h));
    }
    record(static_cast<double>(i) * h, x, cost);
  }

  // Convergence: every sample in the trailing window within conv_tol of the
  // final state (relative to 1 + |final|).
  if (tr.times.size() >= 2) {
    const Vec last = tr.xbar.back();
    const double bound = cfg.conv_tol * (1.0 + last.norm());
    const auto count = tr.times.size();
    const auto window = std::max<std::size_t>(2, static_cast<std::size_t>(cfg.window_fraction * count));
    const std::size_t start = count > window ? count - window : 0;
    bool ok = true;
    for (std::size_t i = start; i < count && ok; ++i) ok = (tr.xbar[i] - last).norm() <= bound;
    if (ok) {
      std::size_t first = start;
      while (first > 0 && (tr.xbar[first - 1] - last).norm() <= bound) --first;
      tr.converged_at = tr.times[first];
    }
  }
  return tr;
}

struct ConvergenceVerdict {
  double error = 0.0;  // |x(T) - target| / |target|, or absolute when target = 0
  bool pass = false;
};

inline ConvergenceVerdict check_convergence(const SimulationTrace& tr, const Vec& target, double tol) {
  ConvergenceVerdict v;
  if (tr.empty()) return v;
  const Vec last = tr.final_plant();
  require_rows(target, last.size(), "target");
  const double scale = target.norm();
  v.error = (last - target).norm() / (scale > 0 ? scale : 1.0);
  v.pass = v.error <= tol;
  return v;
}

}  // namespace exoform
