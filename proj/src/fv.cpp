#include "aggdiff/fv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aggdiff/error.hpp"
#include "aggdiff/simd.hpp"

namespace aggdiff {

namespace {

constexpr double kDiffusionGuard = 1e-14;

void require_grid(const FvWorkspace& w, const Density1D& p, const char* what) {
  if (!(p.grid == w.grid)) throw DomainError(std::string(what) + ": density grid differs from workspace grid");
}

double clip_negative(std::vector<double>& v, double dx) {
  double removed = 0.0;
  for (double& x : v) {
    if (x < 0.0) {
      removed -= x;
      x = 0.0;
    }
  }
  return removed * dx;
}

}  // namespace

// ---------------------------------------------------------------------------
// Workspace

FvWorkspace::FvWorkspace(Grid1D grid_, KernelTriple kernels_, double alpha_, double d_, double cfl_)
    : grid(grid_), kernels(std::move(kernels_)), alpha(alpha_), d(d_), cfl(cfl_) {
  if (!std::isfinite(alpha) || !std::isfinite(d) || d < 0.0) {
    throw DomainError("FvWorkspace: alpha must be finite and d >= 0");
  }
  if (!(cfl > 0.0 && cfl <= 1.0)) throw DomainError("FvWorkspace: cfl must lie in (0, 1]");
  const std::size_t n = grid.size();
  theta_rho.assign(n + 1, 0.0);
  theta_eta.assign(n + 1, 0.0);
  slope_rho.assign(n, 0.0);
  slope_eta.assign(n, 0.0);
  table_s_rho_ = kernel_table(kernels.s_rho, grid);
  table_s_eta_ = kernel_table(kernels.s_eta, grid);
  table_k_ = kernel_table(kernels.k, grid);
  padded_.assign(3 * n, 0.0);
  scratch_a_.assign(n, 0.0);
  scratch_b_.assign(n, 0.0);
}

void FvWorkspace::toeplitz(const std::vector<double>& table, const std::vector<double>& f, std::span<double> out) {
  const std::size_t n = grid.size();
  std::copy(f.begin(), f.end(), padded_.begin() + static_cast<std::ptrdiff_t>(n));
  simd::toeplitz_apply(table, padded_, out);
}

void FvWorkspace::potential(Species self, const Density1D& own, const Density1D& other, std::span<double> out) {
  const auto& table_self = (self == Species::Rho) ? table_s_rho_ : table_s_eta_;
  const double cross = (self == Species::Rho) ? 1.0 : -alpha;
  toeplitz(table_self, own.values, scratch_a_);
  toeplitz(table_k_, other.values, scratch_b_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scratch_a_[i] + cross * scratch_b_[i];
}

// ---------------------------------------------------------------------------
// Spatial discretisation

double minmod(double a1, double a2, double a3) {
  if (a1 > 0.0 && a2 > 0.0 && a3 > 0.0) return std::min({a1, a2, a3});
  if (a1 < 0.0 && a2 < 0.0 && a3 < 0.0) return std::max({a1, a2, a3});
  return 0.0;
}

void interface_velocity(FvWorkspace& w, const Density1D& rho, const Density1D& eta, Species species,
                        std::span<double> theta) {
  require_grid(w, rho, "interface_velocity");
  require_grid(w, eta, "interface_velocity");
  const std::size_t n = w.grid.size();
  if (theta.size() != n + 1) throw DomainError("interface_velocity: theta must have n_cells + 1 entries");
  const Density1D& own = (species == Species::Rho) ? rho : eta;
  const Density1D& other = (species == Species::Rho) ? eta : rho;
  std::vector<double> phi(n);
  w.potential(species, own, other, phi);
  const double diff = w.d / w.grid.dx;
  theta[0] = 0.0;
  theta[n] = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    theta[i + 1] = -diff * (own.values[i + 1] - own.values[i]) + (phi[i + 1] - phi[i]);
  }
}

std::vector<double> interface_velocity(FvWorkspace& w, const Density1D& rho, const Density1D& eta,
                                       Species species) {
  std::vector<double> theta(w.grid.size() + 1);
  interface_velocity(w, rho, eta, species, theta);
  return theta;
}

void limited_slopes(const Density1D& p, std::span<double> slopes) {
  const std::size_t n = p.size();
  const double dx = p.grid.dx;
  const auto& v = p.values;
  slopes[0] = 0.0;
  slopes[n - 1] = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    slopes[i] = minmod(2.0 * (v[i + 1] - v[i]) / dx, (v[i + 1] - v[i - 1]) / (2.0 * dx), 2.0 * (v[i] - v[i - 1]) / dx);
  }
}

void numerical_flux(const Density1D& p, std::span<const double> theta, std::span<double> slopes,
                    std::span<double> flux) {
  const std::size_t n = p.size();
  if (theta.size() != n + 1 || flux.size() != n + 1 || slopes.size() != n) {
    throw DomainError("numerical_flux: buffer sizes do not match the grid");
  }
  limited_slopes(p, slopes);
  const double half = 0.5 * p.grid.dx;
  flux[0] = 0.0;
  flux[n] = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double t = theta[i + 1];
    const double right_of_i = std::max(p.values[i] + half * slopes[i], 0.0);
    const double left_of_next = std::max(p.values[i + 1] - half * slopes[i + 1], 0.0);
    flux[i + 1] = std::max(t, 0.0) * right_of_i + std::min(t, 0.0) * left_of_next;
  }
}

std::vector<double> numerical_flux(const Density1D& p, std::span<const double> theta) {
  std::vector<double> slopes(p.size()), flux(p.size() + 1);
  numerical_flux(p, theta, slopes, flux);
  return flux;
}

FvRates rhs(FvWorkspace& w, const DensityPair& pair) {
  const std::size_t n = w.grid.size();
  interface_velocity(w, pair.rho, pair.eta, Species::Rho, w.theta_rho);
  interface_velocity(w, pair.rho, pair.eta, Species::Eta, w.theta_eta);
  std::vector<double> flux(n + 1);
  FvRates out{std::vector<double>(n), std::vector<double>(n)};
  const double inv_dx = 1.0 / w.grid.dx;

  numerical_flux(pair.rho, w.theta_rho, w.slope_rho, flux);
  for (std::size_t i = 0; i < n; ++i) out.rho[i] = -(flux[i + 1] - flux[i]) * inv_dx;
  numerical_flux(pair.eta, w.theta_eta, w.slope_eta, flux);
  for (std::size_t i = 0; i < n; ++i) out.eta[i] = -(flux[i + 1] - flux[i]) * inv_dx;
  return out;
}

double stable_dt(FvWorkspace& w, const DensityPair& pair) {
  double vmax = 0.0;
  for (double t : w.theta_rho) vmax = std::max(vmax, std::abs(t));
  for (double t : w.theta_eta) vmax = std::max(vmax, std::abs(t));
  double pmax = 0.0;
  for (double v : pair.rho.values) pmax = std::max(pmax, v);
  for (double v : pair.eta.values) pmax = std::max(pmax, v);
  const double dx = w.grid.dx;
  double dt = dx * dx / (2.0 * w.d * pmax + kDiffusionGuard);
  if (vmax > 0.0) dt = std::min(dt, dx / vmax);
  return w.cfl * dt;
}

// ---------------------------------------------------------------------------
// Time stepping

namespace {

StepOutcome ssprk3_from(FvWorkspace& w, const DensityPair& u, const FvRates& l0, double dt) {
  const std::size_t n = w.grid.size();
  const double dx = w.grid.dx;
  double clipped = 0.0;

  auto make = [&](std::vector<double> r, std::vector<double> e) {
    clipped += clip_negative(r, dx);
    clipped += clip_negative(e, dx);
    return DensityPair{Density1D(w.grid, std::move(r)), Density1D(w.grid, std::move(e)), u.alpha, u.d};
  };

  std::vector<double> r(n), e(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = u.rho.values[i] + dt * l0.rho[i];
    e[i] = u.eta.values[i] + dt * l0.eta[i];
  }
  const DensityPair u1 = make(r, e);

  const FvRates l1 = rhs(w, u1);
  for (std::size_t i = 0; i < n; ++i) {
    const double ur = u.rho.values[i], ue = u.eta.values[i];
    r[i] = ur + 0.25 * ((u1.rho.values[i] - ur) + dt * l1.rho[i]);
    e[i] = ue + 0.25 * ((u1.eta.values[i] - ue) + dt * l1.eta[i]);
  }
  const DensityPair u2 = make(r, e);

  const FvRates l2 = rhs(w, u2);
  for (std::size_t i = 0; i < n; ++i) {
    const double ur = u.rho.values[i], ue = u.eta.values[i];
    r[i] = ur + (2.0 / 3.0) * ((u2.rho.values[i] - ur) + dt * l2.rho[i]);
    e[i] = ue + (2.0 / 3.0) * ((u2.eta.values[i] - ue) + dt * l2.eta[i]);
  }
  StepOutcome out{make(r, e), 0.0};
  out.clipped_mass = clipped;
  return out;
}

void check_boundary(const DensityPair& p, double tol, double t) {
  const std::size_t n = p.rho.size();
  for (const auto* s : {&p.rho, &p.eta}) {
    const double worst = std::max(s->values[0], s->values[n - 1]);
    if (worst > tol) {
      throw BoundaryContact("mass reached the domain boundary at t = " + std::to_string(t) + " (" +
                            (s == &p.rho ? "rho" : "eta") + " boundary cell value " + std::to_string(worst) +
                            "); enlarge the domain");
    }
  }
}

}  // namespace

StepOutcome step_ssprk3(FvWorkspace& w, const DensityPair& pair, double dt) {
  require_grid(w, pair.rho, "step_ssprk3");
  require_grid(w, pair.eta, "step_ssprk3");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("step_ssprk3: dt must be positive");
  const FvRates l0 = rhs(w, pair);
  return ssprk3_from(w, pair, l0, dt);
}

Diagnostics diagnose(const DensityPair& pair, const KernelTriple& kernels, double clipped_mass) {
  Diagnostics d;
  d.mass_rho = mass(pair.rho);
  d.mass_eta = mass(pair.eta);
  d.cm_rho = center_of_mass(pair.rho);
  d.cm_eta = center_of_mass(pair.eta);
  d.cm_alpha = pair.alpha * d.cm_rho - d.cm_eta;
  d.energy = energy(pair, pair, kernels);
  d.clipped_mass = clipped_mass;
  return d;
}

DensityPair simulate(FvWorkspace& w, DensityPair pair, double t_final, const FvRunOptions& options,
                     const FvObserver& observer) {
  require_grid(w, pair.rho, "simulate");
  require_grid(w, pair.eta, "simulate");
  if (!(t_final >= 0.0) || !(options.report_dt > 0.0)) {
    throw DomainError("simulate: need t_final >= 0 and report_dt > 0");
  }
  check_boundary(pair, options.boundary_tolerance, 0.0);

  double t = 0.0;
  double clipped_total = 0.0;
  if (observer) observer(t, pair, diagnose(pair, w.kernels, clipped_total));

  const double total_mass = mass(pair.rho) + mass(pair.eta);
  long report_index = 1;
  while (t < t_final) {
    const double next_report = std::min(static_cast<double>(report_index) * options.report_dt, t_final);
    while (t < next_report) {
      const FvRates l0 = rhs(w, pair);
      double dt = stable_dt(w, pair);
      bool lands = false;
      if (t + dt >= next_report) {
        dt = next_report - t;
        lands = true;
      }
      StepOutcome step;
      for (int halving = 0;; ++halving) {
        step = ssprk3_from(w, pair, l0, dt);
        if (step.clipped_mass <= options.clip_tolerance * total_mass) break;
        if (halving == options.max_halvings) {
          throw NumericalError("fv: positivity clip of " + std::to_string(step.clipped_mass) +
                               " persists after " + std::to_string(halving) + " step halvings at t = " +
                               std::to_string(t));
        }
        dt *= 0.5;
        lands = false;
      }
      pair = std::move(step.state);
      clipped_total += step.clipped_mass;
      t = lands ? next_report : t + dt;
      check_boundary(pair, options.boundary_tolerance, t);
    }
    if (observer) observer(t, pair, diagnose(pair, w.kernels, clipped_total));
    ++report_index;
  }
  return pair;
}

}  // namespace aggdiff
