#pragma once

#include <functional>
#include <span>
#include <vector>

#include "aggdiff/density.hpp"
#include "aggdiff/kernel.hpp"

namespace aggdiff {

/// Buffers and precomputed kernel tables for one finite-volume simulation.
/// Velocities live on the n+1 interfaces, slopes on the n cells.
class FvWorkspace {
 public:
  FvWorkspace(Grid1D grid, KernelTriple kernels, double alpha, double d, double cfl = 0.45);

  Grid1D grid;
  KernelTriple kernels;
  double alpha;
  double d;
  double cfl;

  std::vector<double> theta_rho, theta_eta;
  std::vector<double> slope_rho, slope_eta;

  /// Cell potentials sum_j G((i-j) dx) f_j (no dx factor) for the three kernels.
  void potential(Species self, const Density1D& own, const Density1D& other, std::span<double> out);

 private:
  void toeplitz(const std::vector<double>& table, const std::vector<double>& f, std::span<double> out);

  std::vector<double> table_s_rho_, table_s_eta_, table_k_;
  std::vector<double> padded_, scratch_a_, scratch_b_;
};

/// Smallest-magnitude argument when all three share a strict sign, else 0.
double minmod(double a1, double a2, double a3);

/// Interface velocities for one species; theta.size() == n_cells + 1, with
/// zero at both outer interfaces.
void interface_velocity(FvWorkspace& w, const Density1D& rho, const Density1D& eta, Species species,
                        std::span<double> theta);
std::vector<double> interface_velocity(FvWorkspace& w, const Density1D& rho, const Density1D& eta,
                                       Species species);

/// Limited slopes (zero in the two boundary cells).
void limited_slopes(const Density1D& p, std::span<double> slopes);

/// Upwind fluxes at the n+1 interfaces from minmod-limited reconstructions,
/// clipped at zero. The outer fluxes are zero.
void numerical_flux(const Density1D& p, std::span<const double> theta, std::span<double> slopes,
                    std::span<double> flux);
std::vector<double> numerical_flux(const Density1D& p, std::span<const double> theta);

struct FvRates {
  std::vector<double> rho;
  std::vector<double> eta;
};

/// Semi-discrete right-hand side -(F_{i+1/2} - F_{i-1/2}) / dx for both species.
FvRates rhs(FvWorkspace& w, const DensityPair& pair);

/// Time step from the CFL rule; uses the velocities of the last rhs call on `pair`.
double stable_dt(FvWorkspace& w, const DensityPair& pair);

struct StepOutcome {
  DensityPair state;
  double clipped_mass = 0.0;  // mass removed by clipping negative round-off
};

/// One SSP-RK3 step of size dt. Negative values are clipped to zero.
StepOutcome step_ssprk3(FvWorkspace& w, const DensityPair& pair, double dt);

struct Diagnostics {
  double mass_rho = 0.0;
  double mass_eta = 0.0;
  double cm_rho = 0.0;
  double cm_eta = 0.0;
  double cm_alpha = 0.0;
  double energy = 0.0;
  double clipped_mass = 0.0;  // cumulative
};

Diagnostics diagnose(const DensityPair& pair, const KernelTriple& kernels, double clipped_mass = 0.0);

using FvObserver = std::function<void(double t, const DensityPair& pair, const Diagnostics& diag)>;

struct FvRunOptions {
  double report_dt = 1.0;
  double clip_tolerance = 1e-10;   // relative clipped mass that forces a retry
  int max_halvings = 20;
  double boundary_tolerance = 1e-12;
};

/// Integrates to t_final, calling `observer` at t = 0, every report_dt and at
/// t_final. Throws BoundaryContact if mass reaches an outer cell.
DensityPair simulate(FvWorkspace& w, DensityPair pair, double t_final, const FvRunOptions& options,
                     const FvObserver& observer);

}  // namespace aggdiff
