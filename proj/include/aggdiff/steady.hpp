#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aggdiff/density.hpp"
#include "aggdiff/kernel.hpp"

namespace aggdiff {

/// Bumps of one species: masses z^i > 0 and centres cm^i (sorted).
struct SpeciesBumps {
  std::vector<double> masses;
  std::vector<double> centers;

  std::size_t size() const { return masses.size(); }
  double total_mass() const;
};

struct BumpLayout {
  SpeciesBumps rho;
  SpeciesBumps eta;
  double alpha = 0.0;

  /// Throws ConfigError unless both species have >= 1 bump, positive masses
  /// and sorted finite centres.
  void validate() const;
};

/// One value per bump, split by species.
struct BumpValues {
  std::vector<double> rho;
  std::vector<double> eta;
};

struct BumpAnalysis {
  BumpValues B;
  BumpValues D;
  BumpValues lambda;  // radii of the unit-diffusion profiles
  std::vector<std::pair<double, double>> intervals_rho;
  std::vector<std::pair<double, double>> intervals_eta;
  double alpha_threshold = 0.0;
};

/// Net force at each bump centre from all bumps (masses as weights); zero at
/// an equilibrium of the purely nonlocal particle system.
BumpValues compute_B(const BumpLayout& layout, const KernelTriple& kernels);

/// Minus the force gradient at each bump centre; must be positive.
BumpValues compute_D(const BumpLayout& layout, const KernelTriple& kernels);

/// lambda = (3 (z/2) / D)^{1/3}; throws DomainError when D <= 0.
double bump_lambda(double mass, double D);

/// Largest alpha for which every prey bump keeps D > 0 by the sufficient
/// condition on prey curvature vs. cross curvature. Prey bumps whose cross
/// curvature sum is >= 0 impose no bound (+inf).
double alpha_threshold(const BumpLayout& layout, const KernelTriple& kernels);

/// B, D, lambda, the unit-diffusion intervals [cm - lambda, cm + lambda] and
/// the alpha threshold. lambda and intervals are NaN where D <= 0.
BumpAnalysis analyze(const BumpLayout& layout, const KernelTriple& kernels);

struct NewtonOptions {
  double tolerance = 1e-12;
  int max_iterations = 100;
  double collision_distance = 1e-9;
};

struct NewtonReport {
  int iterations = 0;
  double max_B = 0.0;
  double constraint_residual = 0.0;
  std::size_t replaced_row = 0;  // index into [rho..., eta...]
};

/// Equilibrium centres with the joint-centre constraint
///   alpha * sum z_rho cm_rho / z_rho - sum z_eta cm_eta / z_eta = cm_alpha_target
/// replacing the redundant force balance. Masses and alpha come from `guess`.
BumpLayout solve_centers(const BumpLayout& guess, const KernelTriple& kernels, double cm_alpha_target,
                         const NewtonOptions& options = {}, NewtonReport* report = nullptr);

/// Jacobian of the stacked B vector with respect to the stacked centres
/// [cm_rho..., cm_eta...]; row-major, size n x n.
std::vector<double> B_jacobian(const BumpLayout& layout, const KernelTriple& kernels);

struct MultiBumpState {
  BumpLayout layout;
  BumpAnalysis analysis;
  DensityPair densities;
  /// Bump radii at the requested diffusion, d^{1/3} lambda.
  BumpValues radius;
  std::vector<std::string> warnings;
};

/// Assembles the parabolic profiles (D / 2d)(R^2 - (x - cm)^2) with
/// R = d^{1/3} lambda on `grid` by exact cell integration. Each bump carries
/// mass z. At d = 1 the profile is (D/2)(lambda^2 - (x - cm)^2).
/// Throws DomainError for D <= 0 or bumps leaving the grid and
/// DisjointnessViolated for overlapping bumps within a species.
MultiBumpState build_state(const BumpLayout& layout, const BumpAnalysis& analysis, const Grid1D& grid,
                           double d = 1.0);

struct ComponentResidual {
  Species species;
  int first_cell;
  int last_cell;
  double residual;  // std / |mean| of the Euler-Lagrange expression
};

/// For each connected support component, the normalised spread of
///   d rho - S_rho * rho - K * eta   (predators)
///   d eta - S_eta * eta + alpha K * rho   (prey).
/// alpha and d are taken from the pair. Throws DomainError on empty support.
std::vector<ComponentResidual> stationarity_residual(const DensityPair& pair, const KernelTriple& kernels);

/// Largest per-component residual.
double max_residual(const std::vector<ComponentResidual>& r);

struct Classification {
  enum class Kind { Mixed, Separated, MultiBump, Indeterminate };
  Kind kind = Kind::Indeterminate;
  int n_rho = 0;
  int n_eta = 0;

  std::string to_string() const;
  int total_bumps() const { return n_rho + n_eta; }
};

/// Connected runs of cells with value > support_tol * max(values), as
/// inclusive cell index ranges.
std::vector<std::pair<int, int>> support_components(const Density1D& p, double support_tol);

Classification classify(const DensityPair& pair, double support_tol = 1e-6);

/// Mass and centre of every support component.
BumpLayout layout_from_state(const DensityPair& pair, double support_tol = 1e-6);

}  // namespace aggdiff
