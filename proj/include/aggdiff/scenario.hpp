#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aggdiff/density.hpp"
#include "aggdiff/fv.hpp"
#include "aggdiff/kernel.hpp"
#include "aggdiff/particles.hpp"
#include "aggdiff/steady.hpp"

namespace aggdiff {

enum class Method { Fv, Particles, Both };

std::string method_name(Method m);
Method parse_method(const std::string& s);

/// A complete experiment: model parameters, discretisation and initial data.
struct Scenario {
  std::string name;
  std::string description;
  KernelTriple kernels;
  double alpha = 0.0;
  double d = 0.0;
  double x_min = -1.0;
  double x_max = 1.0;
  int n_cells = 2;
  int n_particles = 2;
  double t_final = 1.0;
  double report_dt = 0.5;
  double snapshot_dt = 0.0;  // 0: ten snapshots over the run
  std::vector<Segment> rho0;
  std::vector<Segment> eta0;
  Method method = Method::Both;
  double cfl = 0.45;
  ParticleScheme particle_scheme = ParticleScheme::Rosenbrock;
  double rtol = 1e-6;
  double atol = 1e-9;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  Grid1D grid() const;
  DensityPair initial_density() const;
  ParticleState initial_particles() const;

  /// Same scenario with initial data mirrored about the domain midpoint.
  Scenario reflected() const;
};

/// The six experiments: initial1, initial1_alpha6, initial2, initial3,
/// initial4, initial5.
std::vector<Scenario> builtin_scenarios();
std::optional<Scenario> find_builtin(const std::string& name);

struct CommonDiffusion {
  double d;
  KernelTriple kernels;
  double alpha;
};

/// Maps diffusion coefficients d1 (predators) and d2 (prey) to a single d = d2
/// by scaling S_rho and K by d2/d1 and alpha by d1/d2. Stationary states are
/// unchanged; the predator equation runs on a rescaled clock.
CommonDiffusion rescale_to_common_diffusion(double d1, double d2, const KernelTriple& kernels, double alpha);

/// Scenario from JSON text (see README for the schema). Throws ConfigError.
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

Kernel kernel_from_json(const std::string& text);
std::string kernel_to_json(const Kernel& k);

struct WaveFit {
  bool detected = false;
  double speed_rho = 0.0;
  double speed_eta = 0.0;
  double r2_rho = 0.0;
  double r2_eta = 0.0;
};

/// Least-squares lines through cm_rho(t), cm_eta(t) for t >= t_from.
WaveFit fit_wave(const std::vector<double>& t, const std::vector<double>& cm_rho, const std::vector<double>& cm_eta,
                 double t_from);

struct MethodResult {
  Method method = Method::Fv;
  std::vector<double> times;
  std::vector<Diagnostics> diagnostics;
  std::vector<Frame> frames;  // positions (particles) or quantiles (fv)
  std::vector<std::pair<double, DensityPair>> snapshots;
  std::vector<std::pair<double, ParticleState>> particle_reports;
  DensityPair final_state;  // particles: reconstructed on the scenario grid
  std::optional<ParticleState> final_particles;
  Classification classification;
  std::optional<double> steady_time;
  WaveFit wave;
  double mass_drift_rho = 0.0;  // max relative deviation over the run
  double mass_drift_eta = 0.0;
  double cm_alpha_drift = 0.0;  // |CM(T) - CM(0)| / T
  ParticleStats particle_stats;
};

struct RunReport {
  Scenario scenario;
  std::optional<MethodResult> fv;
  std::optional<MethodResult> particles;
  std::optional<double> w1_rho;  // cross-method, when both ran
  std::optional<double> w1_eta;

  const MethodResult& primary() const;
};

struct RunOptions {
  double steady_window = 5.0;
  double steady_tol = 1e-4;
  double support_tol = 1e-6;
};

RunReport run(const Scenario& s, const RunOptions& options = {});

/// Writes diagnostics.csv, snap_<t>.csv, trajectory.csv (particles) and
/// report.json; with both methods the per-method files go to fv/ and
/// particles/. When `with_layout` is set, layout.json holds the bump layout
/// and analysis extracted from the final state.
void export_report(const RunReport& report, const std::filesystem::path& out_dir, bool with_layout = false);

std::string report_json(const RunReport& report);
std::string layout_json(const BumpLayout& layout, const BumpAnalysis* analysis);
BumpLayout layout_from_json(const std::string& text);

}  // namespace aggdiff
