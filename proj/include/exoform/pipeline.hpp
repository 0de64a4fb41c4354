#pragma once

// Three-step design procedure (input matrix -> exogenous system and
// performance index -> exogenous initial state), followed by simulation and
// verification. Inputs are in original coordinates; design happens in Jordan
// coordinates and plant-side results are mapped back.

#include "exoform/scenario.hpp"

#include <optional>
#include <string>
#include <vector>

namespace exoform {

inline constexpr std::string_view kUnachievable = "The formation d·x_df cannot be achieved.";

/// Raised when the procedure stops at one of its two termination branches.
class AlgorithmTerminated : public std::runtime_error {
 public:
  AlgorithmTerminated(int step, std::string reason)
      : std::runtime_error(std::string(kUnachievable)), step_(step), reason_(std::move(reason)) {}
  int step() const noexcept { return step_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  int step_;
  std::string reason_;
};

struct PipelineOptions {
  bool phi_w0_formula = false;
  std::optional<std::uint64_t> seed;
};

struct DesignBundle {
  // provenance
  std::string scenario;
  std::uint64_t seed = 0;
  Tolerances tol;
  SimConfig sim;
  VerifyThresholds thresholds;
  W0Formula w0_formula = W0Formula::Projector;
  bool input_constructed = false;
  std::vector<std::string> overrides_used;
  std::vector<std::string> log;

  // steps 1-2
  SpectralStructure spectrum;
  std::optional<ResidualFormation> residual;
  std::optional<InputDesign> input;
  Mat B;  // original coordinates
  PartitionedInput partition;
  MaxSteadySpace steady_space;
  Vec x_df;         // original coordinates
  Vec x_df_jordan;
  double scaling = 1.0;
  double membership_residual = 0.0;
  Eligibility eligibility = Eligibility::Eligible;
  ExogenousSystem exo;
  PerformanceIndex index;  // Jordan coordinates
  Mat C_original;
  AugmentedSystem augmented;
  AssumptionReport assumptions;
  bool controllable = false;
  std::vector<ClusterDiagnostic> pbh;

  // step 3
  bool has_initial_state = false;
  RiccatiSolution riccati;
  MarginalCertificate marginal;
  SteadyConditionsReport conditions;
  SteadyProjector projector;
  std::optional<W0Design> w0_design;
  Vec x0;  // original coordinates
  Vec w0;
  Vec xbar0;  // [V^-1 x0; w0]
  SteadyPrediction prediction;

  Index n() const { return spectrum.n(); }
  Index k() const { return exo.k(); }
  Vec target() const { return scaling * x_df; }
};

namespace detail {

template <typename F>
auto in_step(const char* step, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const AlgorithmTerminated&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), std::string(step) + ": " + e.detail());
  }
}

}  // namespace detail

/// Steps 1 and 2.
inline DesignBundle design_system(const Scenario& scn, const PipelineOptions& opts = {}) {
  validate(scn);
  DesignBundle b;
  b.scenario = scn.name;
  b.seed = opts.seed.value_or(scn.seed);
  b.tol = scn.tol;
  b.sim = scn.sim;
  b.thresholds = scn.verify;
  b.w0_formula = opts.phi_w0_formula ? W0Formula::Phi : W0Formula::Projector;
  b.x_df = scn.target_formation();
  b.scaling = scn.scaling;
  b.x0 = scn.x0;
  const Tolerances& tol = b.tol;

  b.spectrum = detail::in_step("spectral analysis", [&] { return analyze_spectrum(scn.A, scn.jordan, tol); });
  const SpectralStructure& s = b.spectrum;
  const FormationSpec formations{scn.formations, scn.formation_frame};
  if (scn.formation_frame == Frame::Jordan) b.x_df = s.to_original(Mat(b.x_df));

  // Step 1.
  detail::in_step("step 1 (input matrix)", [&] {
    if (scn.input_matrix) {
      b.log.emplace_back("step 1: B provided; skip constructing B");
      b.B = *scn.input_matrix;
    } else {
      b.input_constructed = true;
      b.residual = residual_space(formations, s, tol);
      b.input = design_input(*b.residual, s, b.seed, tol);
      b.B = s.to_original(b.input->B);
      b.log.emplace_back("step 1: constructed B = [B^df B^c] with " + std::to_string(b.input->Bdf.cols()) + " + " +
                         std::to_string(b.input->Bc.cols()) + " columns");
    }
    b.partition = partition_input(s, b.B, tol);
    b.pbh = controllability_report(s, b.partition.B, tol);
    b.controllable = check_controllability(s, b.partition.B, tol);
    return 0;
  });

  // Step 2.
  detail::in_step("step 2 (exogenous system)", [&] {
    b.steady_space = max_steady_space(s, b.partition, tol);
    b.x_df_jordan = s.to_jordan(Mat(b.x_df));
    b.membership_residual = membership_residual(b.x_df_jordan, b.steady_space);
    b.eligibility = eligibility(b.x_df_jordan, s, tol);
    if (!membership(b.x_df_jordan, b.steady_space, tol)) {
      b.log.emplace_back("step 2: x_df is outside the maximal steady-state space");
      throw AlgorithmTerminated(2, "x_df is outside the maximal steady-state space (residual " +
                                       std::to_string(b.membership_residual) + ")");
    }
    if (b.eligibility != Eligibility::Eligible) {
      b.log.emplace_back("step 2: x_df is " + std::string(to_string(b.eligibility)));
      throw AlgorithmTerminated(2, "x_df is " + std::string(to_string(b.eligibility)));
    }
    b.index = design_C(b.x_df_jordan, tol);
    b.C_original = b.index.C * s.V_inv;
    b.exo = design_exo(s, b.partition, b.index, b.seed ^ 0x5EEDULL, tol, scn.overrides);
    if (scn.overrides.H) b.overrides_used.emplace_back("H");
    if (scn.overrides.K) b.overrides_used.emplace_back("K");
    if (scn.overrides.G) b.overrides_used.emplace_back("G");
    b.augmented = assemble_augmented(s.J, b.partition.B, b.exo, b.index);
    b.assumptions = verify_assumptions(b.augmented, tol);
    b.log.emplace_back("step 2: exogenous system of dimension k = " + std::to_string(b.k()));
    return 0;
  });
  return b;
}

/// Step 3: Riccati solution, certification and w(0).
inline void design_initial_state(DesignBundle& b, const Scenario& scn) {
  const Tolerances& tol = b.tol;
  detail::in_step("step 3 (initial state)", [&] {
    b.riccati = solve_min_psd(b.augmented, tol, scn.riccati);
    b.marginal = marginal_certify(b.riccati.Acl, tol);
    b.conditions = steady_conditions(b.riccati, b.augmented, tol);
    b.projector = steady_projector(b.riccati.Acl, tol);
    const Vec x0j = b.spectrum.to_jordan(Mat(b.x0));
    if (scn.w0_override) {
      require_rows(*scn.w0_override, b.k(), "overrides.w0");
      b.w0 = *scn.w0_override;
      b.overrides_used.emplace_back("w0");
      b.log.emplace_back("step 3: w(0) supplied by override");
    } else {
      try {
        b.w0_design = design_w0(b.projector, x0j, b.x_df_jordan, b.scaling, b.n(), tol, b.w0_formula);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ScalingUnreachable) {
          b.log.emplace_back("step 3: " + e.detail());
          throw AlgorithmTerminated(3, e.detail());
        }
        throw;
      }
      b.w0 = b.w0_design->w0;
      b.log.emplace_back(std::string("step 3: w(0) from the ") +
                         (b.w0_formula == W0Formula::Phi ? "phi formula" : "projector equation"));
    }
    b.xbar0.resize(b.n() + b.k());
    b.xbar0 << x0j, b.w0;
    b.prediction = predict_steady(b.projector, b.xbar0);
    b.has_initial_state = true;
    return 0;
  });
}

inline SimulationTrace simulate_bundle(const DesignBundle& b) {
  if (!b.has_initial_state) throw Error(ErrorCode::DimensionMismatch, "simulation requires step 3");
  return detail::in_step("simulation", [&] { return simulate(b.riccati, b.augmented, b.xbar0, b.sim, b.spectrum.V); });
}

struct Check {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<Check> checks;
  Index steady_space_dim = 0;
  bool converged_to_origin = false;
  double formation_error = 0.0;
  double projector_discrepancy = 0.0;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  const Check* find(std::string_view name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

/// Recomputes every certificate from the bundle's matrices, so a corrupted
/// bundle fails the corresponding check.
inline VerifyReport verify_report(const DesignBundle& b, const SimulationTrace& tr) {
  VerifyReport rep;
  const Tolerances& tol = b.tol;
  const auto add = [&](std::string name, double measured, double bound, std::string detail = {}) {
    rep.checks.push_back({std::move(name), measured <= bound, measured, bound, std::move(detail)});
  };
  const AugmentedSystem& sys = b.augmented;

  add("controllability", b.controllable ? 0.0 : 1.0, 0.0, "PBH rank of (A, B) at every eigenvalue");
  add("formation_in_steady_space", b.membership_residual, tol.residual_tol * b.x_df_jordan.norm());
  add("stabilizable", static_cast<double>(b.assumptions.unstabilizable.size()), 0.0);
  add("zero_only_undetectable",
      static_cast<double>(!b.assumptions.only_zero_undetectable) + static_cast<double>(!b.assumptions.zero_semisimple),
      0.0);
  if (!b.has_initial_state) return rep;

  const Mat& p = b.riccati.P;
  const double pn = p.norm();
  add("are_residual", riccati_residual(sys.Abar, sys.Bbar, sys.Qbar, p).norm(),
      tol.residual_tol * (1.0 + sys.Qbar.norm() + pn * pn * sys.Bbar.squaredNorm()));
  add("p_symmetric", (p - p.transpose()).norm(), tol.residual_tol);
  add("p_psd", std::max(0.0, -min_symmetric_eigenvalue(p)), tol.psd_tol);
  const Mat acl = sys.Abar - sys.Bbar * (sys.Bbar.transpose() * p);
  add("gain_consistency", (b.riccati.Acl - acl).norm(), tol.residual_tol * (1.0 + acl.norm()));

  try {
    const MarginalCertificate mc = marginal_certify(acl, tol);
    add("marginal_stability", std::max(0.0, mc.max_real_part), tol.eig_group_tol,
        "s = " + std::to_string(mc.zero_multiplicity));
    rep.steady_space_dim = mc.zero_multiplicity;
  } catch (const Error& e) {
    add("marginal_stability", 1.0, 0.0, e.detail());
  }

  RiccatiSolution recomputed = b.riccati;
  recomputed.Acl = acl;
  const SteadyConditionsReport sc = steady_conditions(recomputed, sys, tol);
  add("kernel_equals_unobservable", sc.kernels_equal ? sc.kernel_angle : 1.0, tol.residual_tol,
      "dim Ker(Acl) = " + std::to_string(sc.kernel_dim) + ", dim Ker([Abar; Cbar]) = " +
          std::to_string(sc.unobservable_dim));
  add("steady_conditions_kernel", sc.conditions_hold ? 0.0 : 1.0, 0.0);

  const Mat& pi = b.projector.Pi;
  const double pscale = tol.residual_tol * (1.0 + norm2(acl));
  add("projector_idempotent", (pi * pi - pi).norm(), pscale);
  add("projector_annihilates", std::max((acl * pi).norm(), (pi * acl).norm()), pscale);
  rep.projector_discrepancy = b.prediction.discrepancy;

  if (tr.empty()) return rep;
  const double scale = 1.0 + b.xbar0.norm();
  const double state_bound = b.thresholds.state_tol * scale;
  const Vec xt = tr.final_state();
  add("condition_I_final", (p * xt).norm(), state_bound, "|P xbar(T)|");
  add("condition_II_final", (sys.Cbar * xt).norm(), state_bound, "|Cbar xbar(T)|");
  add("condition_III_final", (sys.Abar * xt).norm(), state_bound, "|Abar xbar(T)|");
  add("projector_agreement", (pi * b.xbar0 - xt).norm(), state_bound, "|Pi xbar(0) - xbar(T)|");

  const Vec target = rep.steady_space_dim == 0 ? Vec(Vec::Zero(b.n())) : b.target();
  const ConvergenceVerdict v = check_convergence(tr, target, b.thresholds.formation_tol);
  rep.formation_error = v.error;
  rep.converged_to_origin = rep.steady_space_dim == 0;
  add("formation_convergence", v.error, b.thresholds.formation_tol,
      rep.converged_to_origin ? "trivial steady space: distance to the origin" : "relative L2 to d*x_df");
  add("trace_converged", tr.converged_at ? 0.0 : 1.0, 0.0, "trailing-window settling");

  double worst_drop = 0.0;
  for (std::size_t i = 1; i < tr.cost.size(); ++i) worst_drop = std::max(worst_drop, tr.cost[i - 1] - tr.cost[i]);
  add("cost_monotone", worst_drop, 0.0);
  const double value = 0.5 * (b.xbar0.dot(p * b.xbar0) - xt.dot(p * xt));
  add("cost_identity", std::abs(tr.cost.back() - value), b.sim.conv_tol * (1.0 + b.xbar0.squaredNorm()),
      "|J(T) - (xbar0^T P xbar0 - xbar(T)^T P xbar(T)) / 2|");
  const Vec vt = b.riccati.gain * xt;
  add("tail_decay", xt.dot(sys.Qbar * xt) + vt.squaredNorm(), state_bound * state_bound);
  return rep;
}

struct PipelineResult {
  DesignBundle bundle;
  SimulationTrace trace;
  VerifyReport report;
};

enum class Stage { Design, InitialState, Simulate, Verify };

inline PipelineResult run_pipeline(const Scenario& scn, const PipelineOptions& opts = {},
                                   Stage stop = Stage::Verify) {
  PipelineResult r;
  r.bundle = design_system(scn, opts);
  if (stop != Stage::Design) design_initial_state(r.bundle, scn);
  if (stop == Stage::Simulate || stop == Stage::Verify) r.trace = simulate_bundle(r.bundle);
  if (stop == Stage::Verify) r.report = verify_report(r.bundle, r.trace);
  return r;
}

}  // namespace exoform
