#pragma once

// Scenario documents (JSON). Matrices are nested arrays, row-major; unknown
// fields are rejected at every level.

#include "exoform/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>

namespace exoform {

using json = nlohmann::json;

struct VerifyThresholds {
  double formation_tol = 1e-3;  // relative L2 of the final plant state
  double state_tol = 1e-5;      // conditions (I)-(III) and projector agreement, times 1 + |xbar0|
};

struct Scenario {
  std::string name = "scenario";
  Mat A;
  std::optional<Mat> laplacian;
  Index space_dim = 1;
  std::optional<JordanDeclaration> jordan;
  std::optional<Mat> input_matrix;
  Mat formations;  // n x z
  Frame formation_frame = Frame::Original;
  Index target_index = 0;
  double scaling = 1.0;
  Vec x0;
  ExoOverrides overrides;
  std::optional<Vec> w0_override;
  std::uint64_t seed = 1;
  Tolerances tol;
  SimConfig sim;
  RiccatiOptions riccati;
  VerifyThresholds verify;
  std::string output_dir;

  Index n() const { return A.rows(); }
  Vec target_formation() const { return formations.col(target_index); }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::Schema, where + ": unknown field '" + key + "'");
    }
  }
}

inline double to_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw Error(ErrorCode::Schema, where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::Schema, where + ": must be finite");
  return v;
}

inline Vec to_vec(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorCode::Schema, where + ": expected an array of numbers");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = to_number(j[i], where);
  return v;
}

inline Mat to_mat(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::Schema, where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(ErrorCode::Schema, where + ": ragged or non-array row");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = to_number(j[r][c], where);
    }
  }
  return m;
}

template <typename T>
void read_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  out = static_cast<T>(to_number(j.at(key), where + "." + key));
}

inline JordanDeclaration to_jordan(const json& j, const std::string& where) {
  check_keys(j, {"groups", "transform"}, where);
  JordanDeclaration d;
  if (!j.contains("groups") || !j["groups"].is_array()) throw Error(ErrorCode::Schema, where + ".groups required");
  for (const auto& g : j["groups"]) {
    check_keys(g, {"eigenvalue", "imag", "block_sizes"}, where + ".groups[]");
    JordanBlockGroup group;
    group.eigenvalue = to_number(g.at("eigenvalue"), where + ".eigenvalue");
    if (g.contains("imag")) group.imag = to_number(g["imag"], where + ".imag");
    if (!g.contains("block_sizes") || !g["block_sizes"].is_array()) {
      throw Error(ErrorCode::Schema, where + ".block_sizes required");
    }
    for (const auto& b : g["block_sizes"]) {
      if (!b.is_number_integer()) throw Error(ErrorCode::Schema, where + ".block_sizes: integers expected");
      group.block_sizes.push_back(b.get<Index>());
    }
    d.groups.push_back(group);
  }
  if (j.contains("transform")) d.transform = to_mat(j["transform"], where + ".transform");
  return d;
}

}  // namespace detail

inline void validate(const Scenario& s) {
  const Index n = s.n();
  if (n == 0) throw Error(ErrorCode::Schema, "system has no states");
  if (s.laplacian) {
    const Mat& l = *s.laplacian;
    if (l.rows() != l.cols()) throw Error(ErrorCode::Schema, "laplacian must be square");
    const double scale = s.tol.residual_tol * (1.0 + norm2(l));
    if (norm2(Mat(l - l.transpose())) > scale) throw Error(ErrorCode::Schema, "laplacian must be symmetric");
    if (l.rowwise().sum().cwiseAbs().maxCoeff() > scale) {
      throw Error(ErrorCode::Schema, "laplacian rows must sum to zero");
    }
  }
  if (s.formations.rows() != n || s.formations.cols() == 0) {
    throw Error(ErrorCode::Schema, "formations must be a non-empty list of length-" + std::to_string(n) + " vectors");
  }
  if (s.target_index < 0 || s.target_index >= s.formations.cols()) {
    throw Error(ErrorCode::Schema, "target.index out of range");
  }
  if (!(s.target_formation().norm() > 0)) throw Error(ErrorCode::Schema, "target formation must be nonzero");
  if (s.x0.size() != n) throw Error(ErrorCode::Schema, "initial_state must have length " + std::to_string(n));
  if (s.input_matrix && s.input_matrix->rows() != n) {
    throw Error(ErrorCode::Schema, "input_matrix must have " + std::to_string(n) + " rows");
  }
  if (!(s.sim.t_final > 0) || !(s.sim.step > 0) || !(s.sim.conv_tol > 0)) {
    throw Error(ErrorCode::Schema, "simulation t_final, step and conv_tol must be positive");
  }
  try {
    s.tol.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Schema, e.what());
  }
}

inline Scenario parse_scenario(const json& j) {
  using detail::check_keys;
  check_keys(j, {"name", "system", "input_matrix", "formations", "formation_frame", "target", "initial_state",
                 "overrides", "seed", "tolerances", "simulation", "riccati", "verification", "output_dir"},
             "scenario");
  Scenario s;
  if (j.contains("name")) s.name = j["name"].get<std::string>();

  if (!j.contains("system")) throw Error(ErrorCode::Schema, "scenario.system required");
  const json& sys = j["system"];
  check_keys(sys, {"laplacian", "space_dim", "A", "jordan"}, "system");
  if (sys.contains("laplacian") == sys.contains("A")) {
    throw Error(ErrorCode::Schema, "system needs exactly one of 'laplacian' or 'A'");
  }
  if (sys.contains("laplacian")) {
    if (sys.contains("jordan")) throw Error(ErrorCode::Schema, "system.jordan applies only to 'A'");
    s.laplacian = detail::to_mat(sys["laplacian"], "system.laplacian");
    if (sys.contains("space_dim")) {
      if (!sys["space_dim"].is_number_integer() || sys["space_dim"].get<Index>() < 1) {
        throw Error(ErrorCode::Schema, "system.space_dim must be a positive integer");
      }
      s.space_dim = sys["space_dim"].get<Index>();
    }
    s.A = -kron(*s.laplacian, Mat::Identity(s.space_dim, s.space_dim));
  } else {
    if (sys.contains("space_dim")) throw Error(ErrorCode::Schema, "system.space_dim applies only to 'laplacian'");
    s.A = detail::to_mat(sys["A"], "system.A");
    if (s.A.rows() != s.A.cols()) throw Error(ErrorCode::Schema, "system.A must be square");
    if (sys.contains("jordan")) s.jordan = detail::to_jordan(sys["jordan"], "system.jordan");
  }

  if (j.contains("input_matrix")) s.input_matrix = detail::to_mat(j["input_matrix"], "input_matrix");

  if (!j.contains("formations") || !j["formations"].is_array() || j["formations"].empty()) {
    throw Error(ErrorCode::Schema, "formations: non-empty list of vectors required");
  }
  const json& f = j["formations"];
  s.formations.resize(static_cast<Index>(f[0].size()), static_cast<Index>(f.size()));
  for (std::size_t c = 0; c < f.size(); ++c) {
    const Vec v = detail::to_vec(f[c], "formations[" + std::to_string(c) + "]");
    if (v.size() != s.formations.rows()) throw Error(ErrorCode::Schema, "formations must share one length");
    s.formations.col(static_cast<Index>(c)) = v;
  }
  if (j.contains("formation_frame")) {
    const std::string frame = j["formation_frame"].get<std::string>();
    if (frame == "original") s.formation_frame = Frame::Original;
    else if (frame == "jordan") s.formation_frame = Frame::Jordan;
    else throw Error(ErrorCode::Schema, "formation_frame must be 'original' or 'jordan'");
  }

  if (j.contains("target")) {
    check_keys(j["target"], {"index", "scaling"}, "target");
    if (j["target"].contains("index")) {
      if (!j["target"]["index"].is_number_integer()) throw Error(ErrorCode::Schema, "target.index must be an integer");
      s.target_index = j["target"]["index"].get<Index>();
    }
    detail::read_if(j["target"], "scaling", s.scaling, "target");
  }

  if (!j.contains("initial_state")) throw Error(ErrorCode::Schema, "initial_state required");
  s.x0 = detail::to_vec(j["initial_state"], "initial_state");

  if (j.contains("overrides")) {
    const json& o = j["overrides"];
    check_keys(o, {"H", "K", "G", "w0"}, "overrides");
    if (o.contains("H")) s.overrides.H = detail::to_mat(o["H"], "overrides.H");
    if (o.contains("K")) s.overrides.K = detail::to_mat(o["K"], "overrides.K");
    if (o.contains("G")) s.overrides.G = detail::to_mat(o["G"], "overrides.G");
    if (o.contains("w0")) s.w0_override = detail::to_vec(o["w0"], "overrides.w0");
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw Error(ErrorCode::Schema, "seed must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    check_keys(t, {"rank_tol", "eig_group_tol", "residual_tol", "psd_tol"}, "tolerances");
    detail::read_if(t, "rank_tol", s.tol.rank_tol, "tolerances");
    detail::read_if(t, "eig_group_tol", s.tol.eig_group_tol, "tolerances");
    detail::read_if(t, "residual_tol", s.tol.residual_tol, "tolerances");
    detail::read_if(t, "psd_tol", s.tol.psd_tol, "tolerances");
  }
  if (j.contains("simulation")) {
    const json& t = j["simulation"];
    check_keys(t, {"t_final", "step", "conv_tol", "window_fraction", "divergence_bound"}, "simulation");
    detail::read_if(t, "t_final", s.sim.t_final, "simulation");
    detail::read_if(t, "step", s.sim.step, "simulation");
    detail::read_if(t, "conv_tol", s.sim.conv_tol, "simulation");
    detail::read_if(t, "window_fraction", s.sim.window_fraction, "simulation");
    detail::read_if(t, "divergence_bound", s.sim.divergence_bound, "simulation");
  }
  if (j.contains("riccati")) {
    const json& t = j["riccati"];
    check_keys(t, {"horizon_cap", "divergence_bound"}, "riccati");
    detail::read_if(t, "horizon_cap", s.riccati.horizon_cap, "riccati");
    detail::read_if(t, "divergence_bound", s.riccati.divergence_bound, "riccati");
  }
  if (j.contains("verification")) {
    const json& t = j["verification"];
    check_keys(t, {"formation_tol", "state_tol"}, "verification");
    detail::read_if(t, "formation_tol", s.verify.formation_tol, "verification");
    detail::read_if(t, "state_tol", s.verify.state_tol, "verification");
  }
  if (j.contains("output_dir")) s.output_dir = j["output_dir"].get<std::string>();

  validate(s);
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scenario " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
  try {
    return parse_scenario(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
}

}  // namespace exoform
