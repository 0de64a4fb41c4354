#pragma once

// Bundle / report JSON documents and the trace CSV.

#include "exoform/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace exoform {

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vec& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline json to_json(const Complex& z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline json to_json(const std::vector<Complex>& zs) {
  json out = json::array();
  for (const auto& z : zs) out.push_back(to_json(z));
  return out;
}

inline json to_json(const Tolerances& t) {
  return {{"rank_tol", t.rank_tol}, {"eig_group_tol", t.eig_group_tol}, {"residual_tol", t.residual_tol},
          {"psd_tol", t.psd_tol}};
}

inline json bundle_to_json(const DesignBundle& b) {
  json j;
  j["scenario"] = b.scenario;
  j["provenance"] = {{"seed", b.seed},
                     {"tolerances", to_json(b.tol)},
                     {"w0_formula", b.w0_formula == W0Formula::Phi ? "phi" : "projector"},
                     {"input_constructed", b.input_constructed},
                     {"overrides", b.overrides_used}};
  j["log"] = b.log;

  const SpectralStructure& s = b.spectrum;
  json clusters = json::array();
  for (const auto& c : s.clusters) {
    clusters.push_back({{"value", to_json(c.value)},
                        {"complex_pair", c.complex_pair},
                        {"algebraic", c.algebraic},
                        {"geometric", c.geometric},
                        {"block_sizes", c.block_sizes}});
  }
  j["spectrum"] = {{"clusters", clusters},
                   {"r0", s.r0},
                   {"zero_block_sizes", s.zero_block_sizes},
                   {"diagonalizable", s.diagonalizable},
                   {"V", to_json(s.V)},
                   {"reconstruction_residual", s.reconstruction_residual}};

  json input = {{"B", to_json(b.B)}, {"B_jordan", to_json(b.partition.B)}, {"B_last", to_json(b.partition.B_last)},
                {"controllable", b.controllable}};
  json pbh = json::array();
  for (const auto& d : b.pbh) {
    pbh.push_back({{"value", to_json(d.value)}, {"geometric", d.geometric}, {"pbh_rank", d.pbh_rank},
                   {"effective_rank", d.effective_rank}, {"row_block_rank", d.full_row_rank}});
  }
  input["pbh"] = pbh;
  if (b.input) {
    input["Bdf_jordan"] = to_json(b.input->Bdf);
    input["Bc_jordan"] = to_json(b.input->Bc);
    input["deficits"] = b.input->deficits;
    input["predicted_columns"] = b.input->predicted_columns;
    input["completion_seed"] = b.input->seed_used;
  }
  if (b.residual) {
    input["Xrf_jordan"] = to_json(b.residual->Xrf);
    input["strict_intersection_dim"] = b.residual->strict_intersection_dim;
  }
  j["input"] = input;

  j["steady_space"] = {{"dim", b.steady_space.dim()},
                       {"basis_jordan", to_json(b.steady_space.basis)},
                       {"x_df", to_json(b.x_df)},
                       {"x_df_jordan", to_json(b.x_df_jordan)},
                       {"membership_residual", b.membership_residual},
                       {"eligibility", to_string(b.eligibility)}};
  j["exogenous"] = {{"k", b.k()}, {"H", to_json(b.exo.H)}, {"F1", to_json(b.exo.F1)}, {"F2", to_json(b.exo.F2)},
                    {"K", to_json(b.exo.K)}, {"G", to_json(b.exo.G)}};
  j["performance_index"] = {{"C", to_json(b.C_original)},
                            {"Q", to_json(Mat(b.C_original.transpose() * b.C_original))},
                            {"C_jordan", to_json(b.index.C)}};
  j["augmented_jordan"] = {{"Abar", to_json(b.augmented.Abar)}, {"Bbar", to_json(b.augmented.Bbar)},
                           {"Cbar", to_json(b.augmented.Cbar)}};
  j["assumptions"] = {{"stabilizable", b.assumptions.stabilizable},
                      {"unstabilizable", to_json(b.assumptions.unstabilizable)},
                      {"undetectable", to_json(b.assumptions.undetectable)},
                      {"zero_semisimple", b.assumptions.zero_semisimple},
                      {"unobservable_dim", b.assumptions.unobservable_zero_dim}};
  if (!b.has_initial_state) return j;

  j["riccati"] = {{"P", to_json(b.riccati.P)},         {"gain", to_json(b.riccati.gain)},
                  {"Acl", to_json(b.riccati.Acl)},     {"residual", b.riccati.residual},
                  {"horizon", b.riccati.horizon},      {"doublings", b.riccati.doublings}};
  j["marginal"] = {{"s", b.marginal.zero_multiplicity}, {"max_real_part", b.marginal.max_real_part}};
  j["steady_conditions"] = {{"kernel_dim", b.conditions.kernel_dim},     {"max_P_phi", b.conditions.max_P_phi},
                            {"max_C_phi", b.conditions.max_C_phi},       {"max_A_phi", b.conditions.max_A_phi},
                            {"conditions_hold", b.conditions.conditions_hold},
                            {"kernel_angle", b.conditions.kernel_angle}, {"kernels_equal", b.conditions.kernels_equal}};
  j["projector"] = {{"Pi", to_json(b.projector.Pi)}, {"phi", to_json(b.projector.phi)},
                    {"psi", to_json(b.projector.psi)}};
  json init = {{"x0", to_json(b.x0)},
               {"w0", to_json(b.w0)},
               {"xbar0_jordan", to_json(b.xbar0)},
               {"scaling", b.scaling},
               {"target", to_json(b.target())},
               {"predicted_steady_jordan", to_json(b.prediction.projector)},
               {"orthonormal_sum_steady_jordan", to_json(b.prediction.orthonormal)},
               {"prediction_discrepancy", b.prediction.discrepancy}};
  if (b.w0_design) {
    init["target_coefficient"] = b.w0_design->target_coefficient;
    init["gate"] = b.w0_design->gate;
  }
  j["initial_state"] = init;
  return j;
}

inline json report_to_json(const VerifyReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back(
        {{"name", c.name}, {"passed", c.passed}, {"measured", c.measured}, {"bound", c.bound}, {"detail", c.detail}});
  }
  return {{"all_passed", r.all_passed()},
          {"steady_space_dim", r.steady_space_dim},
          {"converged_to_origin", r.converged_to_origin},
          {"formation_error", r.formation_error},
          {"projector_discrepancy", r.projector_discrepancy},
          {"checks", checks}};
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// CSV with columns t, x_1..x_n (original coordinates), w_1..w_k, vnorm, cost.
inline void write_trace(const SimulationTrace& tr, std::ostream& out) {
  out << "t";
  for (Index i = 1; i <= tr.n; ++i) out << ",x_" << i;
  for (Index i = 1; i <= tr.k; ++i) out << ",w_" << i;
  out << ",vnorm,cost\n";
  for (std::size_t s = 0; s < tr.times.size(); ++s) {
    out << format_number(tr.times[s]);
    for (Index i = 0; i < tr.n; ++i) out << ',' << format_number(tr.plant[s](i));
    for (Index i = 0; i < tr.k; ++i) out << ',' << format_number(tr.xbar[s](tr.n + i));
    out << ',' << format_number(tr.vnorm[s]) << ',' << format_number(tr.cost[s]) << '\n';
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

inline void export_trace(const SimulationTrace& tr, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_trace(tr, ss);
  write_file(path, ss.str());
}

inline void export_json(const json& j, const std::filesystem::path& path) { write_file(path, j.dump(2) + "\n"); }

/// bundle.json always; trace.csv and report.json when present.
inline void write_outputs(const PipelineResult& r, Stage stage, const std::filesystem::path& dir) {
  export_json(bundle_to_json(r.bundle), dir / "bundle.json");
  if (stage == Stage::Simulate || stage == Stage::Verify) export_trace(r.trace, dir / "trace.csv");
  if (stage == Stage::Verify) export_json(report_to_json(r.report), dir / "report.json");
}

}  // namespace exoform
