#include "aggdiff/particles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>

#include "aggdiff/error.hpp"
#include "aggdiff/simd.hpp"

namespace aggdiff {

namespace {

// out[i] = sum_j g'(targets[i] - sources[j]), mirror-pair order over j.
void pair_force(const Kernel& g, std::span<const double> targets, std::span<const double> sources,
                std::span<double> out) {
  if (const auto* gauss = g.as_gaussian()) {
    if (gauss->amplitude == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    simd::gaussian_pair_force(gauss->amplitude, gauss->width, targets, sources, out);
    return;
  }
  const std::size_t m = sources.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double t = targets[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < m / 2; ++j) {
      acc = acc + (g.eval_d1(t - sources[j]) + g.eval_d1(t - sources[m - 1 - j]));
    }
    if (m % 2 == 1) acc = acc + g.eval_d1(t - sources[m / 2]);
    out[i] = acc;
  }
}

bool strictly_increasing(std::span<const double> x, std::size_t* where = nullptr) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      if (where) *where = i;
      return false;
    }
    if (i > 0 && !(x[i] > x[i - 1])) {
      if (where) *where = i;
      return false;
    }
  }
  return true;
}

// Right-hand side on the flattened state y = [X_rho, X_eta].
class ParticleSystem {
 public:
  ParticleSystem(const ParticleState& s, const KernelTriple& kernels)
      : kernels_(kernels),
        n_rho_(s.rho.size()),
        n_eta_(s.eta.size()),
        w_rho_(s.rho.interval_mass()),
        w_eta_(s.eta.interval_mass()),
        alpha_(s.alpha),
        d_(s.d),
        self_(std::max(n_rho_, n_eta_)),
        cross_(std::max(n_rho_, n_eta_)) {}

  std::size_t size() const { return n_rho_ + n_eta_; }
  std::span<const double> rho(std::span<const double> y) const { return y.first(n_rho_); }
  std::span<const double> eta(std::span<const double> y) const { return y.subspan(n_rho_); }

  bool ordered(std::span<const double> y) const {
    return strictly_increasing(rho(y)) && strictly_increasing(eta(y));
  }

  void operator()(std::span<const double> y, std::span<double> out) {
    ++evaluations;
    species(rho(y), eta(y), w_rho_, w_eta_, 1.0, kernels_.s_rho, out.first(n_rho_));
    species(eta(y), rho(y), w_eta_, w_rho_, -alpha_, kernels_.s_eta, out.subspan(n_rho_));
  }

  /// Tridiagonal Jacobian of the diffusion part for one species: off[i] couples
  /// i and i+1, diag[i] = -(off[i-1] + off[i]).
  void diffusion_jacobian(std::span<const double> x, double w, std::span<double> diag, std::span<double> off) const {
    const std::size_t n = x.size();
    const double c = d_ / (2.0 * w);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double r = w / (x[i + 1] - x[i]);
      off[i] = c * (2.0 * r * r * r / w);
    }
    diag[0] = -off[0];
    diag[n - 1] = -off[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) diag[i] = -(off[i - 1] + off[i]);
  }

  double w_rho() const { return w_rho_; }
  double w_eta() const { return w_eta_; }
  std::size_t n_rho() const { return n_rho_; }

  long evaluations = 0;

 private:
  void species(std::span<const double> x, std::span<const double> other, double w_own, double w_other,
               double cross_sign, const Kernel& self_kernel, std::span<double> v) {
    const std::size_t n = x.size();
    const double c = d_ / (2.0 * w_own);
    auto self = std::span<double>(self_).first(n);
    auto cross = std::span<double>(cross_).first(n);
    pair_force(self_kernel, x, x, self);
    pair_force(kernels_.k, x, other, cross);
    const double cross_weight = cross_sign * w_other;
    double prev_sq = 0.0;  // ghost density left of the first particle
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0.0;
      if (i + 1 < n) {
        const double r = w_own / (x[i + 1] - x[i]);
        sq = r * r;
      }
      v[i] = (c * (prev_sq - sq) + w_own * self[i]) + cross_weight * cross[i];
      prev_sq = sq;
    }
  }

  const KernelTriple& kernels_;
  std::size_t n_rho_, n_eta_;
  double w_rho_, w_eta_, alpha_, d_;
  std::vector<double> self_, cross_;
};

// Solves M x = b for symmetric tridiagonal M (diag, off) by eliminating from
// both ends towards the middle, so that reversing the system reverses the
// solution bit for bit.
void solve_twisted(std::span<const double> diag, std::span<const double> off, std::span<const double> b,
                   std::span<double> x, std::vector<double>& mt, std::vector<double>& bt) {
  const std::size_t n = diag.size();
  mt.resize(n);
  bt.resize(n);
  if (n == 1) {
    x[0] = b[0] / diag[0];
    return;
  }
  const std::size_t half = n / 2;  // rows [0, half) from the left, [n - half, n) from the right
  mt[0] = diag[0];
  bt[0] = b[0];
  for (std::size_t i = 1; i < half; ++i) {
    const double l = off[i - 1] / mt[i - 1];
    mt[i] = diag[i] - l * off[i - 1];
    bt[i] = b[i] - l * bt[i - 1];
  }
  mt[n - 1] = diag[n - 1];
  bt[n - 1] = b[n - 1];
  for (std::size_t i = n - 1; i-- > n - half;) {
    const double l = off[i] / mt[i + 1];
    mt[i] = diag[i] - l * off[i];
    bt[i] = b[i] - l * bt[i + 1];
  }
  if (n % 2 == 1) {
    const std::size_t p = half;
    const double ll = off[p - 1] / mt[p - 1];
    const double lr = off[p] / mt[p + 1];
    const double mp = diag[p] - (ll * off[p - 1] + lr * off[p]);
    const double bp = b[p] - (ll * bt[p - 1] + lr * bt[p + 1]);
    x[p] = bp / mp;
    for (std::size_t i = p; i-- > 0;) x[i] = (bt[i] - off[i] * x[i + 1]) / mt[i];
    for (std::size_t i = p + 1; i < n; ++i) x[i] = (bt[i] - off[i - 1] * x[i - 1]) / mt[i];
  } else {
    // the rows half-1 and half are reduced to a symmetric 2x2 system
    const std::size_t p = half - 1, q = half;
    const double e = off[p];
    const double det = mt[p] * mt[q] - e * e;
    x[p] = (bt[p] * mt[q] - e * bt[q]) / det;
    x[q] = (mt[p] * bt[q] - e * bt[p]) / det;
    for (std::size_t i = p; i-- > 0;) x[i] = (bt[i] - off[i] * x[i + 1]) / mt[i];
    for (std::size_t i = q + 1; i < n; ++i) x[i] = (bt[i] - off[i - 1] * x[i - 1]) / mt[i];
  }
}

// Block-diagonal (per species) solver for W = I - h gamma J_diffusion.
class DiffusionSolve {
 public:
  DiffusionSolve(const ParticleSystem& sys, std::size_t n) : sys_(sys), diag_(n), off_(n), jd_(n), jo_(n) {}

  void factor(std::span<const double> y, double h_gamma) {
    const std::size_t nr = sys_.n_rho();
    const std::size_t n = y.size();
    sys_.diffusion_jacobian(y.first(nr), sys_.w_rho(), std::span<double>(jd_).first(nr),
                            std::span<double>(jo_).first(nr));
    sys_.diffusion_jacobian(y.subspan(nr), sys_.w_eta(), std::span<double>(jd_).subspan(nr, n - nr),
                            std::span<double>(jo_).subspan(nr, n - nr));
    for (std::size_t i = 0; i < n; ++i) {
      diag_[i] = 1.0 - h_gamma * jd_[i];
      off_[i] = -h_gamma * jo_[i];
    }
  }

  void solve(std::span<const double> b, std::span<double> x) {
    const std::size_t nr = sys_.n_rho();
    const std::size_t n = b.size();
    solve_twisted(std::span<const double>(diag_).first(nr), std::span<const double>(off_).first(nr - 1),
                  b.first(nr), x.first(nr), mt_, bt_);
    solve_twisted(std::span<const double>(diag_).subspan(nr, n - nr),
                  std::span<const double>(off_).subspan(nr, n - nr - 1), b.subspan(nr), x.subspan(nr), mt_, bt_);
  }

 private:
  const ParticleSystem& sys_;
  std::vector<double> diag_, off_, jd_, jo_, mt_, bt_;
};

double error_norm(std::span<const double> err, std::span<const double> y0, std::span<const double> y1,
                  double rtol, double atol) {
  double worst = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    worst = std::max(worst, std::abs(err[i]) / scale);
  }
  return worst;
}

std::vector<double> flatten(const ParticleState& s) {
  std::vector<double> y(s.rho.positions);
  y.insert(y.end(), s.eta.positions.begin(), s.eta.positions.end());
  return y;
}

void unflatten(std::span<const double> y, ParticleState& s) {
  const std::size_t nr = s.rho.size();
  std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(nr), s.rho.positions.begin());
  std::copy(y.begin() + static_cast<std::ptrdiff_t>(nr), y.end(), s.eta.positions.begin());
}

}  // namespace

ParticleVelocities particle_rhs(const ParticleState& s, const KernelTriple& kernels) {
  std::size_t where = 0;
  if (!strictly_increasing(s.rho.positions, &where)) {
    throw DomainError("particle_rhs: rho particles not strictly increasing at index " + std::to_string(where));
  }
  if (!strictly_increasing(s.eta.positions, &where)) {
    throw DomainError("particle_rhs: eta particles not strictly increasing at index " + std::to_string(where));
  }
  ParticleSystem sys(s, kernels);
  const std::vector<double> y = flatten(s);
  std::vector<double> f(y.size());
  sys(y, f);
  ParticleVelocities v;
  v.rho.assign(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(s.rho.size()));
  v.eta.assign(f.begin() + static_cast<std::ptrdiff_t>(s.rho.size()), f.end());
  return v;
}

PseudoInverse particles_from(const StepFunction& f, int n_particles) { return pseudo_inverse(f, n_particles); }

ParticleState integrate_rk23(ParticleState s, const KernelTriple& kernels, double t_final,
                             const ParticleRunOptions& opt, const ParticleObserver& observer, ParticleStats* stats) {
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw DomainError("integrate_rk23: tolerances must be positive");
  if (!(t_final >= 0.0) || !(opt.report_dt > 0.0)) {
    throw DomainError("integrate_rk23: need t_final >= 0 and report_dt > 0");
  }
  (void)particle_rhs(s, kernels);  // validates ordering

  ParticleSystem sys(s, kernels);
  const std::size_t n = sys.size();
  std::vector<double> y = flatten(s);
  std::vector<double> f0(n), f1(n), f2(n), k1(n), k2(n), k3(n), ytmp(n), ynew(n), err(n), rhs(n);
  DiffusionSolve wsolve(sys, n);
  ParticleStats local;

  sys(y, f0);
  double t = 0.0;
  if (observer) observer(t, s);

  double h = opt.initial_step;
  if (!(h > 0.0)) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::abs(y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1 = std::max(d1, std::abs(f0[i]) / sc);
    }
    h = (d0 > 1e-5 && d1 > 1e-5) ? 0.01 * d0 / d1 : 1e-6;
  }
  h = std::min(h, opt.report_dt);

  constexpr double kGamma = 1.0 / (2.0 + 1.4142135623730951);
  constexpr double kE32 = 6.0 + 1.4142135623730951;
  double prev_err = 1e-4;
  int crossing_halvings = 0;
  bool rejected_last = false;
  long report_index = 1;

  while (t < t_final) {
    const double next_report = std::min(static_cast<double>(report_index) * opt.report_dt, t_final);
    while (t < next_report) {
      if (local.accepted + local.rejected >= opt.max_steps) {
        throw NumericalError("integrate_rk23: step budget exhausted at t = " + std::to_string(t));
      }
      double step = h;
      bool lands = false;
      if (t + step >= next_report) {
        step = next_report - t;
        lands = true;
      }
      if (!(step > 1e-14 * std::max(1.0, t))) {
        throw NumericalError("integrate_rk23: step size underflow at t = " + std::to_string(t));
      }

      bool ordered = true;
      if (opt.scheme == ParticleScheme::BogackiShampine) {
        // k1 = f0 (first same as last)
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + (0.5 * step) * f0[i];
        ordered = sys.ordered(ytmp);
        if (ordered) {
          sys(ytmp, k2);
          for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + (0.75 * step) * k2[i];
          ordered = sys.ordered(ytmp);
        }
        if (ordered) {
          sys(ytmp, k3);
          for (std::size_t i = 0; i < n; ++i) {
            ynew[i] = y[i] + step * (((2.0 / 9.0) * f0[i] + (1.0 / 3.0) * k2[i]) + (4.0 / 9.0) * k3[i]);
          }
          ordered = sys.ordered(ynew);
        }
        if (ordered) {
          sys(ynew, f2);
          for (std::size_t i = 0; i < n; ++i) {
            err[i] = step * ((((-5.0 / 72.0) * f0[i] + (1.0 / 12.0) * k2[i]) + (1.0 / 9.0) * k3[i]) -
                             (1.0 / 8.0) * f2[i]);
          }
        }
      } else {
        wsolve.factor(y, step * kGamma);
        wsolve.solve(f0, k1);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + (0.5 * step) * k1[i];
        ordered = sys.ordered(ytmp);
        if (ordered) {
          sys(ytmp, f1);
          for (std::size_t i = 0; i < n; ++i) rhs[i] = f1[i] - k1[i];
          wsolve.solve(rhs, k2);
          for (std::size_t i = 0; i < n; ++i) {
            k2[i] = k2[i] + k1[i];
            ynew[i] = y[i] + step * k2[i];
          }
          ordered = sys.ordered(ynew);
        }
        if (ordered) {
          sys(ynew, f2);
          for (std::size_t i = 0; i < n; ++i) {
            rhs[i] = (f2[i] - kE32 * (k2[i] - f1[i])) - 2.0 * (k1[i] - f0[i]);
          }
          wsolve.solve(rhs, k3);
          for (std::size_t i = 0; i < n; ++i) err[i] = (step / 6.0) * ((k1[i] - 2.0 * k2[i]) + k3[i]);
        }
      }

      if (!ordered) {
        ++local.rejected;
        if (++crossing_halvings > opt.max_halvings) {
          std::size_t where = 0;
          const bool rho_bad = !strictly_increasing(std::span<const double>(ytmp).first(s.rho.size()), &where);
          throw NumericalError("integrate_rk23: particle ordering violated at t = " + std::to_string(t) +
                               " (" + (rho_bad ? "rho" : "eta") + " indices " +
                               std::to_string(where == 0 ? 0 : where - 1) + ", " + std::to_string(where) +
                               ") after " + std::to_string(opt.max_halvings) + " halvings");
        }
        h = 0.5 * step;
        rejected_last = true;
        continue;
      }
      crossing_halvings = 0;

      const double e = error_norm(err, y, ynew, opt.rtol, opt.atol);
      if (!std::isfinite(e)) {
        ++local.rejected;
        h = 0.5 * step;
        rejected_last = true;
        continue;
      }
      if (e > 1.0) {
        ++local.rejected;
        h = step * std::max(0.2, 0.9 * std::pow(e, -1.0 / 3.0));
        rejected_last = true;
        continue;
      }

      ++local.accepted;
      y.swap(ynew);
      f0.swap(f2);
      t = lands ? next_report : t + step;
      const double e_safe = std::max(e, 1e-10);
      double factor = 0.9 * std::pow(e_safe, -0.7 / 3.0) * std::pow(prev_err, 0.4 / 3.0);
      factor = std::clamp(factor, 0.2, 5.0);
      if (rejected_last) factor = std::min(factor, 1.0);
      // a step shortened to hit a report time says little about the next one
      h = lands ? std::max(h, step * factor) : step * factor;
      prev_err = e_safe;
      rejected_last = false;
    }
    unflatten(y, s);
    if (observer) observer(t, s);
    ++report_index;
  }
  local.evaluations = sys.evaluations;
  if (stats) *stats = local;
  unflatten(y, s);
  return s;
}

std::vector<bool> vacuum_intervals(const PseudoInverse& u, double factor) {
  const auto& x = u.positions;
  const std::size_t m = x.size() - 1;  // number of intervals
  auto gap = [&](std::size_t i) { return x[i + 1] - x[i]; };
  std::vector<bool> out(m, false);
  // Runs of up to three wide intervals: a run of length > 1 means one or two
  // particles stranded inside the gap (the odd middle particle of a level set).
  for (std::size_t len = 1; len <= 3; ++len) {
    for (std::size_t a = 1; a + len < m; ++a) {
      const std::size_t b = a + len - 1;
      double narrowest = gap(a);
      for (std::size_t i = a + 1; i <= b; ++i) narrowest = std::min(narrowest, gap(i));
      if (narrowest > factor * gap(a - 1) && narrowest > factor * gap(b + 1)) {
        for (std::size_t i = a; i <= b; ++i) out[i] = true;
      }
    }
  }
  return out;
}

Density1D support_density(const PseudoInverse& u, const Grid1D& grid, double factor) {
  const auto vac = vacuum_intervals(u, factor);
  Density1D full = density_from_particles(u, grid);
  const double w = u.interval_mass();
  const auto& x = u.positions;
  for (std::size_t i = 0; i < vac.size(); ++i) {
    if (!vac[i]) continue;
    const double height = w / (x[i + 1] - x[i]);
    for (int j = 0; j < grid.n_cells; ++j) {
      const double lo = std::max(x[i], grid.edge(j));
      const double hi = std::min(x[i + 1], grid.edge(j + 1));
      if (hi > lo) {
        double& v = full.values[static_cast<std::size_t>(j)];
        v = std::max(0.0, v - height * (hi - lo) / grid.dx);
        // cells lying entirely inside the gap are exactly empty
        if (lo == grid.edge(j) && hi == grid.edge(j + 1)) v = 0.0;
      }
    }
  }
  return full;
}

std::optional<double> steady_detect(const std::vector<Frame>& traj, double window, double tol, double scale) {
  if (traj.empty()) return std::nullopt;
  const double limit = tol * scale;
  const double t_last = traj.back().t;
  const double slack = 1e-9 * std::max(1.0, window);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t0 = traj[k].t;
    if (t0 + window > t_last + slack) break;
    bool steady = true;
    // frames up to and including the first one at or past t0 + window, so a
    // report interval longer than the window still compares two frames
    for (std::size_t j = k + 1; j < traj.size() && steady; ++j) {
      const auto& a = traj[k].values;
      const auto& b = traj[j].values;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > limit) {
          steady = false;
          break;
        }
      }
      if (traj[j].t >= t0 + window - slack) break;
    }
    if (steady) return t0;
  }
  return std::nullopt;
}

void write_trajectory_header(std::ostream& os) { os << "t,species,index,position\n"; }

void write_trajectory_rows(std::ostream& os, double t, const ParticleState& s) {
  char line[96];
  for (const auto* p : {&s.rho, &s.eta}) {
    const char* name = (p == &s.rho) ? "rho" : "eta";
    for (std::size_t i = 0; i < p->size(); ++i) {
      std::snprintf(line, sizeof line, "%.17g,%s,%zu,%.17g\n", t, name, i, p->positions[i]);
      os << line;
    }
  }
}

}  // namespace aggdiff
