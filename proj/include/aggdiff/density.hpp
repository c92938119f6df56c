#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aggdiff/kernel.hpp"

namespace aggdiff {

/// Uniform 1D grid of `n_cells` finite-volume cells starting at `x_min`.
///
/// Edges and centres are computed relative to the grid midpoint, so a grid
/// that is symmetric about 0 has exactly mirrored coordinates.
struct Grid1D {
  double x_min = 0.0;
  double dx = 1.0;
  int n_cells = 2;

  Grid1D() = default;
  Grid1D(double x_min, double dx, int n_cells);

  /// Grid of n cells covering [a, b].
  static Grid1D covering(double a, double b, int n_cells);

  std::size_t size() const { return static_cast<std::size_t>(n_cells); }
  double midpoint() const { return x_min + 0.5 * n_cells * dx; }
  double x_max() const { return x_min + n_cells * dx; }
  double length() const { return n_cells * dx; }
  double edge(int j) const { return midpoint() + (j - 0.5 * n_cells) * dx; }
  double center(int i) const { return midpoint() + (i + 0.5 - 0.5 * n_cells) * dx; }

  friend bool operator==(const Grid1D&, const Grid1D&) = default;
};

/// Non-negative cell averages on a grid.
struct Density1D {
  Grid1D grid;
  std::vector<double> values;

  Density1D() = default;
  Density1D(Grid1D grid, std::vector<double> values);
  static Density1D zeros(Grid1D grid) { return Density1D(grid, std::vector<double>(grid.size(), 0.0)); }

  std::size_t size() const { return values.size(); }
};

/// Piecewise-constant function on arbitrary sorted breakpoints.
struct StepFunction {
  std::vector<double> breaks;   // size k+1, strictly increasing
  std::vector<double> heights;  // size k, >= 0

  static StepFunction from_density(const Density1D& p);

  double mass() const;
};

/// A constant density `height` on [a, b].
struct Segment {
  double a;
  double b;
  double height;
};

StepFunction step_function_from_segments(std::span<const Segment> segments);

/// Cell averages of a sum of segments (exact overlap integration).
Density1D density_from_segments(const Grid1D& grid, std::span<const Segment> segments);

/// Sorted particle positions X^1..X^N representing a quantile function; each of
/// the N-1 gaps carries mass/(N-1).
struct PseudoInverse {
  std::vector<double> positions;
  double mass = 1.0;

  PseudoInverse() = default;
  PseudoInverse(std::vector<double> positions, double mass);

  std::size_t size() const { return positions.size(); }
  double interval_mass() const { return mass / static_cast<double>(positions.size() - 1); }
};

/// Predator (rho) / prey (eta) pair. The interaction signs (+1 for rho, -alpha
/// for eta) are applied by the solvers and never stored.
template <class T>
struct SpeciesPair {
  T rho;
  T eta;
  double alpha = 0.0;
  double d = 0.0;
};

using DensityPair = SpeciesPair<Density1D>;

enum class Species { Rho, Eta };

/// Piecewise-linear cumulative distribution on the cell edges.
struct CdfTable {
  std::vector<double> x;
  std::vector<double> F;

  double operator()(double at) const;
};

CdfTable cdf(const Density1D& p);

/// Equal-mass quantiles: F(X^i) = i * mass / (N-1), i = 0..N-1. Ties on a flat
/// stretch of the CDF resolve to the midpoint of the level set, and the
/// construction is exactly reflection-equivariant.
PseudoInverse pseudo_inverse(const StepFunction& f, int n_particles);
PseudoInverse pseudo_inverse(const Density1D& p, int n_particles);

/// Deposits the reconstructed density mass/((N-1)(X^{i+1}-X^i)) on [X^i, X^{i+1})
/// onto the grid by exact overlap.
Density1D density_from_particles(const PseudoInverse& u, const Grid1D& grid);

double mass(const Density1D& p);
double center_of_mass(const Density1D& p);
double mass(const PseudoInverse& u);
double center_of_mass(const PseudoInverse& u);

/// alpha * cm(rho) - cm(eta) using mass-weighted means.
double joint_center(const DensityPair& pair);
double joint_center(const Density1D& rho, const Density1D& eta, double alpha);

/// Number of quantile nodes used by `wasserstein`.
inline constexpr int kWassersteinNodes = 4096;

/// W_p between equal-mass densities via their pseudo-inverses (midpoint rule in
/// quantile space, masses normalised to 1).
double wasserstein(const Density1D& p, const Density1D& q, double order);
double wasserstein(const StepFunction& p, const StepFunction& q, double order);

/// sqrt(W_2(rho_a, rho_b)^2 + W_2(eta_a, eta_b)^2)
double product_w2(const DensityPair& a, const DensityPair& b);

/// Relative energy with reference pair `reference` (cross terms frozen at
/// reference.eta for rho and reference.rho for eta).
double energy(const DensityPair& pair, const DensityPair& reference, const KernelTriple& kernels);

/// Discrete convolution (G * f)(x_i) = sum_j G(x_i - x_j) f_j dx, evaluated with
/// the offset-ordered Toeplitz kernel.
std::vector<double> convolve(const Kernel& kernel, const Density1D& f);

/// Kernel samples G(k dx), k = 0..n-1.
std::vector<double> kernel_table(const Kernel& kernel, const Grid1D& grid);

/// Mirror image x -> 2 * grid.midpoint() - x (cell order reversed).
Density1D reflect(const Density1D& p);

double l1_distance(const Density1D& p, const Density1D& q);

/// CSV with header `x,rho,eta`, one row per cell centre, 17 significant digits.
void write_snapshot_csv(std::ostream& os, const DensityPair& pair);
void write_snapshot_csv(const std::string& path, const DensityPair& pair);

}  // namespace aggdiff
