#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "aggdiff/density.hpp"
#include "aggdiff/kernel.hpp"

namespace aggdiff {

/// Two particle ensembles discretising the pseudo-inverses of rho and eta.
using ParticleState = SpeciesPair<PseudoInverse>;

struct ParticleVelocities {
  std::vector<double> rho;
  std::vector<double> eta;
};

/// dX/dt for every particle: nonlinear diffusion from the reconstructed
/// densities w/(X^{i+1}-X^i) (zero beyond the end particles) plus the self and
/// cross interaction forces weighted by mass/(N-1). Throws DomainError on
/// coincident or unsorted positions.
ParticleVelocities particle_rhs(const ParticleState& s, const KernelTriple& kernels);

enum class ParticleScheme {
  /// Explicit Bogacki-Shampine 3(2) pair with FSAL.
  BogackiShampine,
  /// Linearly implicit Rosenbrock 2(3) pair; the tridiagonal diffusion
  /// Jacobian is treated implicitly, the interactions explicitly.
  Rosenbrock,
};

struct ParticleRunOptions {
  double rtol = 1e-6;
  double atol = 1e-9;
  double report_dt = 1.0;
  ParticleScheme scheme = ParticleScheme::Rosenbrock;
  int max_halvings = 30;     // consecutive rejections caused by particle crossings
  long max_steps = 50'000'000;
  double initial_step = 0.0;  // 0 picks one from the initial velocities
};

struct ParticleStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

using ParticleObserver = std::function<void(double t, const ParticleState& state)>;

/// Adaptive integration to t_final with PI step-size control. `observer` sees
/// t = 0, every report_dt and t_final exactly. Throws NumericalError when
/// ordering cannot be kept after max_halvings halvings.
ParticleState integrate_rk23(ParticleState s, const KernelTriple& kernels, double t_final,
                             const ParticleRunOptions& options, const ParticleObserver& observer,
                             ParticleStats* stats = nullptr);

/// Particle ensemble of one species from a step function.
PseudoInverse particles_from(const StepFunction& f, int n_particles);

/// Flags interior intervals [X^i, X^{i+1}] lying in a run of at most three
/// intervals that are all wider than `factor` times both intervals flanking
/// the run. The reconstruction spreads the mass
/// mass/(N-1) of such an interval thinly across what is really a vacuum gap
/// between two support components.
std::vector<bool> vacuum_intervals(const PseudoInverse& u, double factor = 3.0);

/// Reconstruction as in density_from_particles but with vacuum intervals left
/// empty; used to read off support components. Does not conserve mass.
Density1D support_density(const PseudoInverse& u, const Grid1D& grid, double factor = 3.0);

/// One sampled frame of a trajectory (positions or quantiles, concatenated
/// across species).
struct Frame {
  double t;
  std::vector<double> values;
};

/// Earliest frame time t such that every later frame up to the first one at
/// or after t + window differs from the frame at t by at most tol * scale in
/// the max norm. The window must fit inside the trajectory.
std::optional<double> steady_detect(const std::vector<Frame>& trajectory, double window, double tol,
                                    double scale);

/// Particle trajectory CSV with header `t,species,index,position`.
void write_trajectory_header(std::ostream& os);
void write_trajectory_rows(std::ostream& os, double t, const ParticleState& s);

}  // namespace aggdiff
