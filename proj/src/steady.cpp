#include "aggdiff/steady.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aggdiff/error.hpp"

namespace aggdiff {

double SpeciesBumps::total_mass() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }

void BumpLayout::validate() const {
  if (!std::isfinite(alpha) || !(alpha > 0.0)) throw ConfigError("layout: alpha must be positive");
  for (const auto* s : {&rho, &eta}) {
    const char* name = (s == &rho) ? "rho" : "eta";
    if (s->masses.empty()) throw ConfigError(std::string("layout: ") + name + " needs at least one bump");
    if (s->masses.size() != s->centers.size()) {
      throw ConfigError(std::string("layout: ") + name + " masses and centers differ in length");
    }
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (!(s->masses[i] > 0.0) || !std::isfinite(s->masses[i])) {
        throw ConfigError(std::string("layout: ") + name + " masses must be positive");
      }
      if (!std::isfinite(s->centers[i])) throw ConfigError(std::string("layout: ") + name + " centre not finite");
      if (i > 0 && s->centers[i] < s->centers[i - 1]) {
        throw ConfigError(std::string("layout: ") + name + " centres must be sorted");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Force sums at bump centres

namespace {

struct SpeciesView {
  const SpeciesBumps& own;
  const SpeciesBumps& other;
  const Kernel& self_kernel;
  double cross_sign;  // +1 for predators, -alpha for prey
};

SpeciesView view(const BumpLayout& l, const KernelTriple& k, Species s) {
  if (s == Species::Rho) return {l.rho, l.eta, k.s_rho, 1.0};
  return {l.eta, l.rho, k.s_eta, -l.alpha};
}

std::vector<double> force_sum(const SpeciesView& v, const Kernel& cross, bool second) {
  std::vector<double> out(v.own.size());
  for (std::size_t i = 0; i < v.own.size(); ++i) {
    const double c = v.own.centers[i];
    double self = 0.0, other = 0.0;
    for (std::size_t j = 0; j < v.own.size(); ++j) {
      const double x = c - v.own.centers[j];
      self += (second ? v.self_kernel.eval_d2(x) : v.self_kernel.eval_d1(x)) * v.own.masses[j];
    }
    for (std::size_t j = 0; j < v.other.size(); ++j) {
      const double x = c - v.other.centers[j];
      other += (second ? cross.eval_d2(x) : cross.eval_d1(x)) * v.other.masses[j];
    }
    out[i] = self + v.cross_sign * other;
  }
  return out;
}

}  // namespace

BumpValues compute_B(const BumpLayout& layout, const KernelTriple& kernels) {
  layout.validate();
  return {force_sum(view(layout, kernels, Species::Rho), kernels.k, false),
          force_sum(view(layout, kernels, Species::Eta), kernels.k, false)};
}

BumpValues compute_D(const BumpLayout& layout, const KernelTriple& kernels) {
  layout.validate();
  BumpValues out{force_sum(view(layout, kernels, Species::Rho), kernels.k, true),
                 force_sum(view(layout, kernels, Species::Eta), kernels.k, true)};
  for (double& v : out.rho) v = -v;
  for (double& v : out.eta) v = -v;
  return out;
}

double bump_lambda(double mass, double D) {
  if (!(D > 0.0)) throw DomainError("bump radius undefined: D = " + std::to_string(D) + " is not positive");
  if (!(mass > 0.0)) throw DomainError("bump radius undefined: non-positive mass");
  return std::cbrt(3.0 * (0.5 * mass) / D);
}

double alpha_threshold(const BumpLayout& layout, const KernelTriple& kernels) {
  layout.validate();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < layout.eta.size(); ++i) {
    const double c = layout.eta.centers[i];
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < layout.eta.size(); ++j) {
      num += kernels.s_eta.eval_d2(c - layout.eta.centers[j]) * layout.eta.masses[j];
    }
    for (std::size_t j = 0; j < layout.rho.size(); ++j) {
      den += kernels.k.eval_d2(c - layout.rho.centers[j]) * layout.rho.masses[j];
    }
    if (den < 0.0) best = std::min(best, num / den);
  }
  return best;
}

BumpAnalysis analyze(const BumpLayout& layout, const KernelTriple& kernels) {
  BumpAnalysis a;
  a.B = compute_B(layout, kernels);
  a.D = compute_D(layout, kernels);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto fill = [&](const SpeciesBumps& s, const std::vector<double>& D, std::vector<double>& lam,
                  std::vector<std::pair<double, double>>& iv) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double l = D[i] > 0.0 ? bump_lambda(s.masses[i], D[i]) : nan;
      lam.push_back(l);
      iv.emplace_back(s.centers[i] - l, s.centers[i] + l);
    }
  };
  fill(layout.rho, a.D.rho, a.lambda.rho, a.intervals_rho);
  fill(layout.eta, a.D.eta, a.lambda.eta, a.intervals_eta);
  a.alpha_threshold = alpha_threshold(layout, kernels);
  return a;
}

// ---------------------------------------------------------------------------
// Newton solve for the centres

namespace {

std::vector<double> assemble_jacobian(const BumpLayout& layout, const KernelTriple& kernels) {
  const std::size_t nr = layout.rho.size(), n = nr + layout.eta.size();
  std::vector<double> J(n * n, 0.0);
  for (Species s : {Species::Rho, Species::Eta}) {
    const SpeciesView v = view(layout, kernels, s);
    const std::size_t own_off = (s == Species::Rho) ? 0 : nr;
    const std::size_t other_off = (s == Species::Rho) ? nr : 0;
    for (std::size_t i = 0; i < v.own.size(); ++i) {
      const std::size_t row = own_off + i;
      double diag = 0.0;
      for (std::size_t j = 0; j < v.own.size(); ++j) {
        if (j == i) continue;
        const double s2 = v.self_kernel.eval_d2(v.own.centers[i] - v.own.centers[j]) * v.own.masses[j];
        diag += s2;
        J[row * n + own_off + j] = -s2;
      }
      for (std::size_t j = 0; j < v.other.size(); ++j) {
        const double k2 = v.cross_sign * kernels.k.eval_d2(v.own.centers[i] - v.other.centers[j]) * v.other.masses[j];
        diag += k2;
        J[row * n + other_off + j] = -k2;
      }
      J[row * n + row] = diag;
    }
  }
  return J;
}

}  // namespace

std::vector<double> B_jacobian(const BumpLayout& layout, const KernelTriple& kernels) {
  layout.validate();
  return assemble_jacobian(layout, kernels);
}

namespace {

struct NewtonSystem {
  const KernelTriple& kernels;
  BumpLayout layout;
  double target;
  std::size_t replaced;

  void set(const Eigen::VectorXd& c) {
    const std::size_t nr = layout.rho.size();
    for (std::size_t i = 0; i < nr; ++i) layout.rho.centers[i] = c[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < layout.eta.size(); ++i) {
      layout.eta.centers[i] = c[static_cast<Eigen::Index>(nr + i)];
    }
  }

  Eigen::VectorXd centers() const {
    Eigen::VectorXd c(static_cast<Eigen::Index>(layout.rho.size() + layout.eta.size()));
    Eigen::Index k = 0;
    for (double x : layout.rho.centers) c[k++] = x;
    for (double x : layout.eta.centers) c[k++] = x;
    return c;
  }

  double constraint() const {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < layout.rho.size(); ++i) a += layout.rho.masses[i] * layout.rho.centers[i];
    for (std::size_t i = 0; i < layout.eta.size(); ++i) b += layout.eta.masses[i] * layout.eta.centers[i];
    return layout.alpha * a / layout.rho.total_mass() - b / layout.eta.total_mass() - target;
  }

  // The raw force sums, computed without the sortedness check so that a
  // trial step may temporarily reorder centres.
  BumpValues forces() const {
    return {force_sum(view(layout, kernels, Species::Rho), kernels.k, false),
            force_sum(view(layout, kernels, Species::Eta), kernels.k, false)};
  }

  Eigen::VectorXd residual(double* max_b = nullptr) const {
    const BumpValues B = forces();
    Eigen::VectorXd r(static_cast<Eigen::Index>(B.rho.size() + B.eta.size()));
    Eigen::Index k = 0;
    double worst = 0.0;
    for (double x : B.rho) { r[k++] = x; worst = std::max(worst, std::abs(x)); }
    for (double x : B.eta) { r[k++] = x; worst = std::max(worst, std::abs(x)); }
    if (max_b) *max_b = worst;
    r[static_cast<Eigen::Index>(replaced)] = constraint();
    return r;
  }

  Eigen::MatrixXd jacobian() const {
    const std::size_t nr = layout.rho.size(), n = nr + layout.eta.size();
    const std::vector<double> J = assemble_jacobian(layout, kernels);
    Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = J[r * n + c];
      }
    }
    const auto rr = static_cast<Eigen::Index>(replaced);
    for (std::size_t i = 0; i < nr; ++i) {
      M(rr, static_cast<Eigen::Index>(i)) = layout.alpha * layout.rho.masses[i] / layout.rho.total_mass();
    }
    for (std::size_t i = 0; i < layout.eta.size(); ++i) {
      M(rr, static_cast<Eigen::Index>(nr + i)) = -layout.eta.masses[i] / layout.eta.total_mass();
    }
    return M;
  }
};

void check_collisions(const BumpLayout& l, double tol) {
  for (const auto* s : {&l.rho, &l.eta}) {
    std::vector<double> c = s->centers;
    std::sort(c.begin(), c.end());
    for (std::size_t i = 1; i < c.size(); ++i) {
      if (c[i] - c[i - 1] < tol) {
        throw NumericalError(std::string("solve_centers: two ") + (s == &l.rho ? "rho" : "eta") +
                             " centres collided near " + std::to_string(c[i]) + "; try fewer bumps");
      }
    }
  }
}

void sort_species(SpeciesBumps& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.centers[a] < s.centers[b]; });
  SpeciesBumps out;
  for (std::size_t i : idx) {
    out.masses.push_back(s.masses[i]);
    out.centers.push_back(s.centers[i]);
  }
  s = std::move(out);
}

}  // namespace

BumpLayout solve_centers(const BumpLayout& guess, const KernelTriple& kernels, double cm_alpha_target,
                         const NewtonOptions& options, NewtonReport* report) {
  guess.validate();
  if (!std::isfinite(cm_alpha_target)) throw DomainError("solve_centers: target must be finite");

  // The force balance has the null combination alpha z_rho^i B_rho^i - z_eta^i B_eta^i;
  // replace the row carrying the largest weight.
  const std::size_t nr = guess.rho.size();
  std::size_t replaced = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < nr; ++i) {
    const double w = std::abs(guess.alpha * guess.rho.masses[i]);
    if (w > best) { best = w; replaced = i; }
  }
  for (std::size_t i = 0; i < guess.eta.size(); ++i) {
    const double w = guess.eta.masses[i];
    if (w > best) { best = w; replaced = nr + i; }
  }

  check_collisions(guess, options.collision_distance);
  NewtonSystem sys{kernels, guess, cm_alpha_target, replaced};
  NewtonReport rep;
  rep.replaced_row = replaced;

  double max_b = 0.0;
  Eigen::VectorXd r = sys.residual(&max_b);
  for (int it = 0;; ++it) {
    rep.iterations = it;
    rep.max_B = max_b;
    rep.constraint_residual = std::abs(sys.constraint());
    if (max_b <= options.tolerance && rep.constraint_residual <= options.tolerance) break;
    if (it == options.max_iterations) {
      throw NumericalError("solve_centers: no convergence after " + std::to_string(it) +
                           " Newton iterations (max |B| = " + std::to_string(max_b) + ")");
    }
    const Eigen::MatrixXd J = sys.jacobian();
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) throw NumericalError("solve_centers: singular Jacobian");
    const Eigen::VectorXd step = lu.solve(-r);
    const Eigen::VectorXd c0 = sys.centers();
    const double phi0 = 0.5 * r.squaredNorm();
    // Co-located bumps of one species satisfy the force balance trivially, so
    // the merit function alone would happily collapse a gap. No gap may shrink
    // by more than half in one iteration.
    double s = 1.0;
    auto limit_gaps = [&](std::size_t off, std::size_t count) {
      for (std::size_t i = 1; i < count; ++i) {
        const auto a = static_cast<Eigen::Index>(off + i - 1), b = static_cast<Eigen::Index>(off + i);
        const double gap = c0[b] - c0[a];
        const double shrink = step[a] - step[b];
        if (shrink > 0.0) s = std::min(s, 0.5 * gap / shrink);
      }
    };
    limit_gaps(0, nr);
    limit_gaps(nr, guess.eta.size());
    const double s_first = s;
    bool accepted = false;
    for (int back = 0; back < 40; ++back, s *= 0.5) {
      sys.set(c0 + s * step);
      double mb = 0.0;
      const Eigen::VectorXd rt = sys.residual(&mb);
      if (0.5 * rt.squaredNorm() <= (1.0 - 2e-4 * s) * phi0 || rt.norm() == 0.0) {
        r = rt;
        max_b = mb;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // near round-off level the merit function stalls; take the limited step
      sys.set(c0 + s_first * step);
      r = sys.residual(&max_b);
    }
    check_collisions(sys.layout, options.collision_distance);
  }
  check_collisions(sys.layout, options.collision_distance);
  BumpLayout out = sys.layout;
  sort_species(out.rho);
  sort_species(out.eta);
  if (report) *report = rep;
  return out;
}

// ---------------------------------------------------------------------------
// Profiles

namespace {

// Integral of (D / 2d)(R^2 - (x - cm)^2) from cm - R to x (clamped).
double parabola_primitive(double x, double cm, double R, double k) {
  const double u = std::clamp(x - cm, -R, R);
  return k * (R * R * u - u * u * u / 3.0 + (2.0 / 3.0) * R * R * R);
}

void deposit(Density1D& p, double cm, double R, double k) {
  const Grid1D& g = p.grid;
  for (int i = 0; i < g.n_cells; ++i) {
    const double a = g.edge(i), b = g.edge(i + 1);
    if (b <= cm - R || a >= cm + R) continue;
    p.values[static_cast<std::size_t>(i)] +=
        (parabola_primitive(b, cm, R, k) - parabola_primitive(a, cm, R, k)) / g.dx;
  }
}

}  // namespace

MultiBumpState build_state(const BumpLayout& layout, const BumpAnalysis& analysis, const Grid1D& grid, double d) {
  layout.validate();
  if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("build_state: d must be positive");
  MultiBumpState st;
  st.layout = layout;
  st.analysis = analysis;
  st.densities = DensityPair{Density1D::zeros(grid), Density1D::zeros(grid), layout.alpha, d};
  const double scale = std::cbrt(d);

  auto assemble = [&](const SpeciesBumps& s, const std::vector<double>& D, const char* name, Density1D& out,
                      std::vector<double>& radius) {
    if (D.size() != s.size()) throw DomainError("build_state: analysis does not match layout");
    std::vector<std::pair<double, double>> iv;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!(D[i] > 0.0)) {
        throw DomainError(std::string("build_state: D_") + name + "[" + std::to_string(i) + "] = " +
                          std::to_string(D[i]) + " is not positive");
      }
      const double lam = bump_lambda(s.masses[i], D[i]);
      const double mass_identity = (2.0 / 3.0) * D[i] * lam * lam * lam;
      if (std::abs(mass_identity - s.masses[i]) > 1e-12 * s.masses[i]) {
        throw NumericalError("build_state: bump mass identity failed");
      }
      const double R = scale * lam;
      radius.push_back(R);
      iv.emplace_back(s.centers[i] - R, s.centers[i] + R);
      if (s.centers[i] - R < grid.edge(0) || s.centers[i] + R > grid.edge(grid.n_cells)) {
        throw DomainError(std::string("build_state: a ") + name + " bump leaves the grid");
      }
    }
    for (std::size_t i = 1; i < iv.size(); ++i) {
      if (iv[i].first < iv[i - 1].second) {
        throw DisjointnessViolated(std::string("build_state: ") + name + " bumps " + std::to_string(i - 1) +
                                   " and " + std::to_string(i) + " overlap; reduce d or spread the centres");
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i) deposit(out, s.centers[i], radius[i], D[i] / (2.0 * d));
  };
  assemble(layout.rho, analysis.D.rho, "rho", st.densities.rho, st.radius.rho);
  assemble(layout.eta, analysis.D.eta, "eta", st.densities.eta, st.radius.eta);

  if (layout.alpha >= analysis.alpha_threshold) {
    st.warnings.push_back("alpha = " + std::to_string(layout.alpha) + " is not below the prey curvature threshold " +
                          std::to_string(analysis.alpha_threshold));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Diagnostics on densities

std::vector<std::pair<int, int>> support_components(const Density1D& p, double support_tol) {
  double mx = 0.0;
  for (double v : p.values) mx = std::max(mx, v);
  std::vector<std::pair<int, int>> out;
  if (!(mx > 0.0)) return out;
  const double thr = support_tol * mx;
  int start = -1;
  for (int i = 0; i < p.grid.n_cells; ++i) {
    const bool in = p.values[static_cast<std::size_t>(i)] > thr;
    if (in && start < 0) start = i;
    if (!in && start >= 0) {
      out.emplace_back(start, i - 1);
      start = -1;
    }
  }
  if (start >= 0) out.emplace_back(start, p.grid.n_cells - 1);
  return out;
}

std::vector<ComponentResidual> stationarity_residual(const DensityPair& pair, const KernelTriple& kernels) {
  if (!(pair.rho.grid == pair.eta.grid)) throw DomainError("stationarity_residual: grid mismatch");
  const auto s_rho = convolve(kernels.s_rho, pair.rho);
  const auto s_eta = convolve(kernels.s_eta, pair.eta);
  const auto k_eta = convolve(kernels.k, pair.eta);
  const auto k_rho = convolve(kernels.k, pair.rho);
  const std::size_t n = pair.rho.size();
  std::vector<double> el_rho(n), el_eta(n);
  for (std::size_t i = 0; i < n; ++i) {
    el_rho[i] = pair.d * pair.rho.values[i] - s_rho[i] - k_eta[i];
    el_eta[i] = pair.d * pair.eta.values[i] - s_eta[i] + pair.alpha * k_rho[i];
  }

  std::vector<ComponentResidual> out;
  const double length = pair.rho.grid.length();
  for (Species s : {Species::Rho, Species::Eta}) {
    const Density1D& p = (s == Species::Rho) ? pair.rho : pair.eta;
    const auto& el = (s == Species::Rho) ? el_rho : el_eta;
    const double m = mass(p);
    if (!(m > 0.0)) throw DomainError("stationarity_residual: empty support");
    const double thr = m * 1e-8 / length;
    int start = -1;
    auto close = [&](int first, int last) {
      double mean = 0.0;
      for (int i = first; i <= last; ++i) mean += el[static_cast<std::size_t>(i)];
      const int cnt = last - first + 1;
      mean /= cnt;
      double var = 0.0;
      for (int i = first; i <= last; ++i) {
        const double dv = el[static_cast<std::size_t>(i)] - mean;
        var += dv * dv;
      }
      const double sd = std::sqrt(var / cnt);
      const double res = (std::abs(mean) > 0.0) ? sd / std::abs(mean) : std::numeric_limits<double>::infinity();
      out.push_back({s, first, last, res});
    };
    for (int i = 0; i < p.grid.n_cells; ++i) {
      const bool in = p.values[static_cast<std::size_t>(i)] > thr;
      if (in && start < 0) start = i;
      if (!in && start >= 0) {
        close(start, i - 1);
        start = -1;
      }
    }
    if (start >= 0) close(start, p.grid.n_cells - 1);
  }
  return out;
}

double max_residual(const std::vector<ComponentResidual>& r) {
  double worst = 0.0;
  for (const auto& c : r) worst = std::max(worst, c.residual);
  return worst;
}

std::string Classification::to_string() const {
  switch (kind) {
    case Kind::Mixed: return "Mixed";
    case Kind::Separated: return "Separated";
    case Kind::Indeterminate: return "Indeterminate";
    case Kind::MultiBump: break;
  }
  return "MultiBump(" + std::to_string(n_rho) + "," + std::to_string(n_eta) + ")";
}

Classification classify(const DensityPair& pair, double support_tol) {
  const auto cr = support_components(pair.rho, support_tol);
  const auto ce = support_components(pair.eta, support_tol);
  Classification c;
  c.n_rho = static_cast<int>(cr.size());
  c.n_eta = static_cast<int>(ce.size());
  using Kind = Classification::Kind;

  auto contains = [](std::pair<int, int> outer, std::pair<int, int> inner) {
    return outer.first <= inner.first && inner.second <= outer.second;
  };
  auto intersects = [](std::pair<int, int> a, std::pair<int, int> b) {
    return a.first <= b.second && b.first <= a.second;
  };

  if (cr.size() == 1 && ce.size() == 1 && contains(ce[0], cr[0])) {
    c.kind = Kind::Mixed;
    return c;
  }
  if (cr.size() == 1 && ce.size() == 2 && ce[0].second < cr[0].first && cr[0].second < ce[1].first) {
    c.kind = Kind::Separated;
    return c;
  }
  for (const auto& a : cr) {
    for (const auto& b : ce) {
      if (intersects(a, b) && !contains(a, b) && !contains(b, a)) {
        c.kind = Kind::Indeterminate;
        return c;
      }
    }
  }
  c.kind = Kind::MultiBump;
  return c;
}

BumpLayout layout_from_state(const DensityPair& pair, double support_tol) {
  BumpLayout l;
  l.alpha = pair.alpha;
  for (Species s : {Species::Rho, Species::Eta}) {
    const Density1D& p = (s == Species::Rho) ? pair.rho : pair.eta;
    SpeciesBumps& b = (s == Species::Rho) ? l.rho : l.eta;
    for (const auto& [first, last] : support_components(p, support_tol)) {
      double m = 0.0, x = 0.0;
      for (int i = first; i <= last; ++i) {
        const double v = p.values[static_cast<std::size_t>(i)];
        m += v;
        x += v * p.grid.center(i);
      }
      b.masses.push_back(m * p.grid.dx);
      b.centers.push_back(x / m);
    }
  }
  return l;
}

}  // namespace aggdiff
