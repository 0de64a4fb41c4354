// exoform: scenario-driven design, simulation and verification.
//
//   exoform design    --scenario S [--out DIR] [--seed N]
//   exoform initstate --scenario S ...
//   exoform simulate  --scenario S ...
//   exoform verify    --scenario S ...
//   exoform pipeline  --scenario S ...
//   exoform sweep     --scenario S --scaling d1,d2,...
//
// Exit codes: 0 ok, 2 formation cannot be achieved, 3 certification failure,
// 4 I/O or schema error.

#include "exoform/exoform.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace exoform;

constexpr int kOk = 0;
constexpr int kTerminated = 2;
constexpr int kCertification = 3;
constexpr int kIo = 4;

struct Common {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool phi_w0 = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scenario", c.scenario, "scenario JSON file")->required();
  cmd->add_option("--out", c.out, "output directory (default: scenario output_dir or out/<name>)");
  cmd->add_option("--seed", c.seed, "override the scenario seed");
  cmd->add_flag("--phi-w0-formula", c.phi_w0, "solve for w(0) with phi instead of the projector dual");
}

std::filesystem::path out_dir(const Common& c, const Scenario& s) {
  if (!c.out.empty()) return c.out;
  if (!s.output_dir.empty()) return s.output_dir;
  return std::filesystem::path("out") / s.name;
}

void print_summary(const PipelineResult& r, Stage stage, std::ostream& os) {
  const DesignBundle& b = r.bundle;
  os << "scenario " << b.scenario << ": n = " << b.n() << ", m = " << b.B.cols() << ", k = " << b.k()
     << (b.input_constructed ? " (B constructed)" : " (B provided)") << '\n';
  for (const auto& line : b.log) os << "  " << line << '\n';
  if (stage == Stage::Design) return;
  os << "  riccati residual " << format_number(b.riccati.residual) << ", horizon " << format_number(b.riccati.horizon)
     << ", s = " << b.marginal.zero_multiplicity << '\n';
  os << "  w0 =";
  for (Index i = 0; i < b.w0.size(); ++i) os << ' ' << format_number(b.w0(i));
  os << '\n';
  if (stage == Stage::InitialState) return;
  os << "  final plant state:";
  const Vec xf = r.trace.final_plant();
  for (Index i = 0; i < xf.size(); ++i) os << ' ' << format_number(xf(i));
  os << '\n';
  if (stage != Stage::Verify) return;
  for (const auto& c : r.report.checks) {
    os << "  [" << (c.passed ? "ok" : "FAIL") << "] " << c.name << "  " << format_number(c.measured)
       << " <= " << format_number(c.bound) << '\n';
  }
  os << "verification " << (r.report.all_passed() ? "passed" : "FAILED") << '\n';
}

int run_stage(const Common& c, Stage stage) {
  const Scenario scn = load_scenario(c.scenario);
  PipelineOptions opts;
  opts.phi_w0_formula = c.phi_w0;
  opts.seed = c.seed;
  const PipelineResult r = run_pipeline(scn, opts, stage);
  write_outputs(r, stage, out_dir(c, scn));
  print_summary(r, stage, std::cout);
  if (stage == Stage::Verify && !r.report.all_passed()) return kCertification;
  return kOk;
}

std::vector<double> parse_scalings(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double d = 0;
    try {
      d = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw Error(ErrorCode::Schema, "bad scaling value '" + item + "'");
    out.push_back(d);
  }
  if (out.empty()) throw Error(ErrorCode::Schema, "--scaling needs at least one value");
  return out;
}

int run_sweep(const Common& c, const std::string& scalings) {
  Scenario scn = load_scenario(c.scenario);
  PipelineOptions opts;
  opts.phi_w0_formula = c.phi_w0;
  opts.seed = c.seed;
  const auto root = out_dir(c, scn);
  json summary = json::array();
  bool ok = true;
  for (double d : parse_scalings(scalings)) {
    scn.scaling = d;
    const PipelineResult r = run_pipeline(scn, opts);
    write_outputs(r, Stage::Verify, root / ("d_" + format_number(d)));
    ok = ok && r.report.all_passed();
    summary.push_back({{"scaling", d},
                       {"formation_error", r.report.formation_error},
                       {"all_passed", r.report.all_passed()},
                       {"final_plant", to_json(r.trace.final_plant())}});
    std::cout << "d = " << format_number(d) << ": relative error " << format_number(r.report.formation_error)
              << (r.report.all_passed() ? "  ok" : "  FAIL") << '\n';
  }
  export_json(summary, root / "sweep.json");
  return ok ? kOk : kCertification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsic formation design and verification"};
  app.require_subcommand(1);
  Common common;
  std::string scalings;
  struct Sub {
    const char* name;
    const char* help;
    Stage stage;
  };
  const Sub subs[] = {
      {"design", "steps 1-2: input matrix, exogenous system, performance index", Stage::Design},
      {"initstate", "steps 1-3: adds the Riccati solution and w(0)", Stage::InitialState},
      {"simulate", "design and simulate; writes trace.csv", Stage::Simulate},
      {"verify", "design, simulate and verify; writes report.json", Stage::Verify},
      {"pipeline", "all steps (same outputs as verify)", Stage::Verify},
  };
  std::vector<std::pair<CLI::App*, Stage>> commands;
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, common);
    commands.emplace_back(cmd, s.stage);
  }
  CLI::App* sweep = app.add_subcommand("sweep", "run the full pipeline for several scalings d");
  add_common(sweep, common);
  sweep->add_option("--scaling", scalings, "comma-separated scalings, e.g. -1,0.5,1,2")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kIo;
  }

  try {
    if (sweep->parsed()) return run_sweep(common, scalings);
    for (const auto& [cmd, stage] : commands) {
      if (cmd->parsed()) return run_stage(common, stage);
    }
  } catch (const AlgorithmTerminated& t) {
    std::cout << t.what() << '\n';
    std::cerr << "step " << t.step() << ": " << t.reason() << '\n';
    return kTerminated;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == ErrorCode::Schema || e.code() == ErrorCode::Io ? kIo : kCertification;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCertification;
  }
  return kOk;
}
