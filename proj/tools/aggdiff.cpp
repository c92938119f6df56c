// Command-line front end: run builtin or JSON scenarios, list builtins, and
// build multi-bump steady states from a bump layout.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "aggdiff/error.hpp"
#include "aggdiff/scenario.hpp"
#include "aggdiff/simd.hpp"
#include "aggdiff/steady.hpp"

namespace fs = std::filesystem;
using namespace aggdiff;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kBoundary = 4 };

Scenario resolve(const std::string& what) {
  if (auto s = find_builtin(what)) return *s;
  if (fs::exists(what)) return load_scenario(what);
  throw ConfigError("'" + what + "' is neither a builtin scenario nor a readable file (see `aggdiff list`)");
}

void print_summary(const RunReport& rep) {
  auto line = [](const char* label, const MethodResult& r) {
    std::printf("%-10s %-18s steady=%-10s wave=%s cm_alpha_drift=%.3g mass_drift=(%.2g, %.2g)\n", label,
                r.classification.to_string().c_str(),
                r.steady_time ? std::to_string(*r.steady_time).c_str() : "none", r.wave.detected ? "yes" : "no",
                r.cm_alpha_drift, r.mass_drift_rho, r.mass_drift_eta);
  };
  if (rep.fv) line("fv", *rep.fv);
  if (rep.particles) line("particles", *rep.particles);
  if (rep.w1_rho) std::printf("W1(fv, particles): rho %.4g, eta %.4g (dx %.4g)\n", *rep.w1_rho, *rep.w1_eta,
                              rep.scenario.grid().dx);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-species aggregation-diffusion simulator (finite volumes and particles)"};
  app.require_subcommand(1);

  std::string isa = "auto";
  app.add_option("--isa", isa, "Inner-loop instruction set: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  auto* list = app.add_subcommand("list", "List builtin scenarios");

  auto* run_cmd = app.add_subcommand("run", "Run a builtin scenario or a JSON scenario file");
  std::string target, method, out_dir = "out";
  double t_final = 0.0, report_dt = 0.0, snapshot_dt = -1.0;
  bool with_layout = false, reflect = false;
  std::vector<double> run_domain;
  int run_cells = 0;
  run_cmd->add_option("scenario", target, "Builtin name or path to a scenario JSON")->required();
  run_cmd->add_option("--method", method, "fv, particles or both (default: from the scenario)")
      ->check(CLI::IsMember({"fv", "particles", "both"}));
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--t-final", t_final, "Override the final time");
  run_cmd->add_option("--report-dt", report_dt, "Override the diagnostics interval");
  run_cmd->add_option("--snapshot-dt", snapshot_dt, "Interval between density snapshots");
  run_cmd->add_option("--domain", run_domain, "Override the domain: x_min x_max")->expected(2);
  run_cmd->add_option("--cells", run_cells, "Override cells and particles per species");
  run_cmd->add_flag("--layout", with_layout, "Also write layout.json from the final state");
  run_cmd->add_flag("--reflect", reflect, "Mirror the initial data about the domain midpoint");

  auto* steady_cmd = app.add_subcommand("steady", "Analyse a bump layout and assemble its steady profile");
  std::string layout_path, steady_out = "steady_out";
  std::vector<double> domain;
  int cells = 801;
  double d = 1e-3;
  std::optional<double> cm_target;
  steady_cmd->add_option("layout", layout_path, "Layout JSON {rho:{masses,centers}, eta:{...}, alpha}")->required();
  steady_cmd->add_option("--solve", cm_target, "Newton-solve the centres for this joint centre of mass");
  steady_cmd->add_option("--d", d, "Diffusion coefficient of the assembled profile");
  steady_cmd->add_option("--domain", domain, "Grid extent x_min x_max")->expected(2);
  steady_cmd->add_option("--cells", cells, "Number of grid cells");
  steady_cmd->add_option("--out", steady_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (isa == "scalar") simd::set_active_isa(simd::Isa::Scalar);
  if (isa == "avx2") simd::set_active_isa(simd::Isa::Avx2);

  try {
    if (*list) {
      for (const auto& s : builtin_scenarios()) {
        std::printf("%-16s alpha=%-5g d=%-4g N=%-4d domain=[%g, %g] t_final=%g  %s\n", s.name.c_str(), s.alpha, s.d,
                    s.n_cells, s.x_min, s.x_max, s.t_final, s.description.c_str());
      }
      return kOk;
    }

    if (*run_cmd) {
      Scenario s = resolve(target);
      if (!method.empty()) s.method = parse_method(method);
      if (t_final > 0.0) s.t_final = t_final;
      if (report_dt > 0.0) s.report_dt = report_dt;
      if (snapshot_dt >= 0.0) s.snapshot_dt = snapshot_dt;
      if (run_domain.size() == 2) {
        s.x_min = run_domain[0];
        s.x_max = run_domain[1];
      }
      if (run_cells > 0) s.n_cells = s.n_particles = run_cells;
      if (reflect) s = s.reflected();
      const RunReport rep = run(s);
      export_report(rep, out_dir, with_layout);
      print_summary(rep);
      return kOk;
    }

    if (*steady_cmd) {
      BumpLayout layout = layout_from_json(read_file(layout_path));
      const KernelTriple kernels = KernelTriple::gaussian();
      if (cm_target) {
        NewtonReport nr;
        layout = solve_centers(layout, kernels, *cm_target, {}, &nr);
        std::printf("Newton: %d iterations, max |B| = %.3g\n", nr.iterations, nr.max_B);
      }
      const BumpAnalysis a = analyze(layout, kernels);
      double lo = 0.0, hi = 0.0;
      if (domain.size() == 2) {
        lo = domain[0];
        hi = domain[1];
      } else {
        lo = std::min(layout.rho.centers.front(), layout.eta.centers.front()) - 3.0;
        hi = std::max(layout.rho.centers.back(), layout.eta.centers.back()) + 3.0;
      }
      const MultiBumpState st = build_state(layout, a, Grid1D::covering(lo, hi, cells), d);
      for (const auto& w : st.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      fs::create_directories(steady_out);
      {
        std::ofstream os(fs::path(steady_out) / "layout.json");
        os << layout_json(layout, &a) << "\n";
      }
      write_snapshot_csv((fs::path(steady_out) / "steady.csv").string(), st.densities);
      const double res = max_residual(stationarity_residual(st.densities, kernels));
      std::printf("classification %s, stationarity residual %.4g\n",
                  classify(st.densities).to_string().c_str(), res);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const BoundaryContact& e) {
    std::fprintf(stderr, "boundary contact: %s\n", e.what());
    return kBoundary;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const DisjointnessViolated& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
