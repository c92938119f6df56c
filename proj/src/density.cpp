#include "aggdiff/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "aggdiff/error.hpp"
#include "aggdiff/simd.hpp"

namespace aggdiff {

// ---------------------------------------------------------------------------
// Value types

Grid1D::Grid1D(double x_min_, double dx_, int n_cells_) : x_min(x_min_), dx(dx_), n_cells(n_cells_) {
  if (!std::isfinite(x_min) || !std::isfinite(dx) || !(dx > 0.0)) {
    throw DomainError("Grid1D: x_min must be finite and dx positive");
  }
  if (n_cells < 2) throw DomainError("Grid1D: need at least two cells");
}

Grid1D Grid1D::covering(double a, double b, int n_cells) {
  if (!(b > a)) throw DomainError("Grid1D::covering: empty interval");
  return Grid1D(a, (b - a) / n_cells, n_cells);
}

Density1D::Density1D(Grid1D grid_, std::vector<double> values_) : grid(grid_), values(std::move(values_)) {
  if (values.size() != grid.size()) throw DomainError("Density1D: value count does not match grid");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("Density1D: values must be finite and non-negative");
  }
}

PseudoInverse::PseudoInverse(std::vector<double> positions_, double mass_)
    : positions(std::move(positions_)), mass(mass_) {
  if (positions.size() < 2) throw DomainError("PseudoInverse: need at least two particles");
  if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("PseudoInverse: mass must be positive");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!std::isfinite(positions[i])) throw DomainError("PseudoInverse: non-finite position");
    if (i > 0 && positions[i] < positions[i - 1]) {
      throw DomainError("PseudoInverse: positions must be non-decreasing");
    }
  }
}

StepFunction StepFunction::from_density(const Density1D& p) {
  StepFunction f;
  f.breaks.resize(p.size() + 1);
  for (int j = 0; j <= p.grid.n_cells; ++j) f.breaks[static_cast<std::size_t>(j)] = p.grid.edge(j);
  f.heights = p.values;
  return f;
}

namespace {

std::vector<double> cell_masses(const StepFunction& f) {
  std::vector<double> m(f.heights.size());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = f.heights[j] * (f.breaks[j + 1] - f.breaks[j]);
  return m;
}

// Sum in mirror-pair order so that reversing the input leaves the result unchanged.
double mirror_sum(const std::vector<double>& v) {
  const std::size_t k = v.size();
  double acc = 0.0;
  for (std::size_t j = 0; j < k / 2; ++j) acc = acc + (v[j] + v[k - 1 - j]);
  if (k % 2 == 1) acc = acc + v[k / 2];
  return acc;
}

}  // namespace

double StepFunction::mass() const { return mirror_sum(cell_masses(*this)); }

StepFunction step_function_from_segments(std::span<const Segment> segments) {
  std::vector<double> pts;
  for (const auto& s : segments) {
    if (!std::isfinite(s.a) || !std::isfinite(s.b) || !(s.b > s.a)) {
      throw ConfigError("segment: need finite a < b");
    }
    if (!(s.height >= 0.0) || !std::isfinite(s.height)) throw ConfigError("segment: height must be >= 0");
    pts.push_back(s.a);
    pts.push_back(s.b);
  }
  if (pts.empty()) throw ConfigError("segment list is empty");
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  StepFunction f;
  f.breaks = pts;
  f.heights.assign(pts.size() - 1, 0.0);
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
    const double mid = 0.5 * (pts[j] + pts[j + 1]);
    for (const auto& s : segments) {
      if (s.a <= mid && mid <= s.b) f.heights[j] += s.height;
    }
  }
  return f;
}

Density1D density_from_segments(const Grid1D& grid, std::span<const Segment> segments) {
  std::vector<double> v(grid.size(), 0.0);
  for (const auto& s : segments) {
    if (!(s.b > s.a) || !(s.height >= 0.0)) throw ConfigError("segment: need a < b and height >= 0");
    for (int i = 0; i < grid.n_cells; ++i) {
      const double lo = std::max(s.a, grid.edge(i));
      const double hi = std::min(s.b, grid.edge(i + 1));
      if (hi > lo) v[static_cast<std::size_t>(i)] += s.height * (hi - lo) / grid.dx;
    }
  }
  return Density1D(grid, std::move(v));
}

// ---------------------------------------------------------------------------
// CDF and quantiles

double CdfTable::operator()(double at) const {
  if (at <= x.front()) return 0.0;
  if (at >= x.back()) return F.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t j = static_cast<std::size_t>(it - x.begin()) - 1;
  const double t = (at - x[j]) / (x[j + 1] - x[j]);
  return F[j] + t * (F[j + 1] - F[j]);
}

CdfTable cdf(const Density1D& p) {
  if (!(mass(p) > 0.0)) throw DomainError("cdf: zero mass");
  CdfTable t;
  t.x.resize(p.size() + 1);
  t.F.resize(p.size() + 1);
  t.F[0] = 0.0;
  for (int j = 0; j <= p.grid.n_cells; ++j) t.x[static_cast<std::size_t>(j)] = p.grid.edge(j);
  for (std::size_t j = 0; j < p.size(); ++j) t.F[j + 1] = t.F[j] + p.values[j] * p.grid.dx;
  return t;
}

namespace {

// Leftmost x with F(x) = level, accumulating from the left.
double quantile_from_left(const StepFunction& f, const std::vector<double>& m, double level) {
  double acc = 0.0;
  std::size_t last_positive = 0;
  bool any = false;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (!(f.heights[j] > 0.0)) continue;
    any = true;
    last_positive = j;
    if (acc + m[j] >= level) {
      const double x = f.breaks[j] + (level - acc) / f.heights[j];
      return std::clamp(x, f.breaks[j], f.breaks[j + 1]);
    }
    acc = acc + m[j];
  }
  if (!any) throw DomainError("pseudo_inverse: zero mass");
  return f.breaks[last_positive + 1];
}

// Rightmost x with (total - F(x)) = level, accumulating from the right.
double quantile_from_right(const StepFunction& f, const std::vector<double>& m, double level) {
  double acc = 0.0;
  std::size_t last_positive = 0;
  bool any = false;
  for (std::size_t jj = m.size(); jj-- > 0;) {
    if (!(f.heights[jj] > 0.0)) continue;
    any = true;
    last_positive = jj;
    if (acc + m[jj] >= level) {
      const double x = f.breaks[jj + 1] - (level - acc) / f.heights[jj];
      return std::clamp(x, f.breaks[jj], f.breaks[jj + 1]);
    }
    acc = acc + m[jj];
  }
  if (!any) throw DomainError("pseudo_inverse: zero mass");
  return f.breaks[last_positive];
}

}  // namespace

PseudoInverse pseudo_inverse(const StepFunction& f, int n_particles) {
  if (n_particles < 2) throw DomainError("pseudo_inverse: need n_particles >= 2");
  const std::vector<double> m = cell_masses(f);
  const double total = mirror_sum(m);
  if (!(total > 0.0)) throw DomainError("pseudo_inverse: zero mass");
  const int last = n_particles - 1;
  const double w = total / last;
  std::vector<double> x(static_cast<std::size_t>(n_particles));
  for (int i = 0; i < n_particles; ++i) {
    const double left = quantile_from_left(f, m, i * w);
    const double right = quantile_from_right(f, m, (last - i) * w);
    x[static_cast<std::size_t>(i)] = 0.5 * (left + right);
  }
  // the two sweeps can disagree by an ulp; keep the sequence ordered
  for (std::size_t i = 1; i < x.size(); ++i) x[i] = std::max(x[i], x[i - 1]);
  return PseudoInverse(std::move(x), total);
}

PseudoInverse pseudo_inverse(const Density1D& p, int n_particles) {
  return pseudo_inverse(StepFunction::from_density(p), n_particles);
}

Density1D density_from_particles(const PseudoInverse& u, const Grid1D& grid) {
  const auto& x = u.positions;
  const double lo_edge = grid.edge(0);
  const double hi_edge = grid.edge(grid.n_cells);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo_edge || x[i] > hi_edge) {
      throw DomainError("density_from_particles: particle " + std::to_string(i) + " at " +
                        std::to_string(x[i]) + " lies outside the grid");
    }
    if (i > 0 && !(x[i] > x[i - 1])) {
      throw DomainError("density_from_particles: particles " + std::to_string(i - 1) + " and " +
                        std::to_string(i) + " coincide");
    }
  }
  const double w = u.interval_mass();
  std::vector<double> v(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i], b = x[i + 1];
    const double height = w / (b - a);
    int j = static_cast<int>(std::floor((a - grid.x_min) / grid.dx));
    j = std::clamp(j - 1, 0, grid.n_cells - 1);
    for (; j < grid.n_cells && grid.edge(j) < b; ++j) {
      const double lo = std::max(a, grid.edge(j));
      const double hi = std::min(b, grid.edge(j + 1));
      if (hi > lo) v[static_cast<std::size_t>(j)] += height * (hi - lo);
    }
  }
  for (double& val : v) val /= grid.dx;
  return Density1D(grid, std::move(v));
}

// ---------------------------------------------------------------------------
// Moments

double mass(const Density1D& p) {
  double acc = 0.0;
  for (double v : p.values) acc += v;
  return acc * p.grid.dx;
}

double center_of_mass(const Density1D& p) {
  double m = 0.0, first = 0.0;
  for (int i = 0; i < p.grid.n_cells; ++i) {
    const double v = p.values[static_cast<std::size_t>(i)];
    m += v;
    first += v * p.grid.center(i);
  }
  if (!(m > 0.0)) throw DomainError("center_of_mass: zero mass");
  return first / m;
}

double mass(const PseudoInverse& u) { return u.mass; }

double center_of_mass(const PseudoInverse& u) {
  double acc = 0.0;
  for (double x : u.positions) acc += x;
  return acc / static_cast<double>(u.positions.size());
}

double joint_center(const Density1D& rho, const Density1D& eta, double alpha) {
  return alpha * center_of_mass(rho) - center_of_mass(eta);
}

double joint_center(const DensityPair& pair) { return joint_center(pair.rho, pair.eta, pair.alpha); }

// ---------------------------------------------------------------------------
// Transport distances

namespace {

// Quantiles of the normalised step function at z_k = (k + 1/2) / K.
std::vector<double> midpoint_quantiles(const StepFunction& f, int nodes) {
  const std::vector<double> m = cell_masses(f);
  double total = 0.0;
  for (double v : m) total += v;
  std::vector<double> q(static_cast<std::size_t>(nodes));
  std::size_t j = 0;
  double acc = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double level = (k + 0.5) / nodes * total;
    while (j < m.size() && (!(f.heights[j] > 0.0) || acc + m[j] < level)) {
      acc += m[j];
      ++j;
    }
    if (j == m.size()) {
      // rounding past the last loaded cell
      std::size_t back = m.size();
      while (back > 0 && !(f.heights[back - 1] > 0.0)) --back;
      q[static_cast<std::size_t>(k)] = f.breaks[back];
      continue;
    }
    const double x = f.breaks[j] + (level - acc) / f.heights[j];
    q[static_cast<std::size_t>(k)] = std::clamp(x, f.breaks[j], f.breaks[j + 1]);
  }
  return q;
}

}  // namespace

double wasserstein(const StepFunction& p, const StepFunction& q, double order) {
  if (!(order >= 1.0)) throw DomainError("wasserstein: order must be >= 1");
  const double mp = p.mass(), mq = q.mass();
  if (!(mp > 0.0) || !(mq > 0.0)) throw DomainError("wasserstein: zero mass");
  if (std::abs(mp - mq) > 1e-9 * std::max(mp, mq)) {
    throw DomainError("wasserstein: mass mismatch (" + std::to_string(mp) + " vs " + std::to_string(mq) + ")");
  }
  const auto up = midpoint_quantiles(p, kWassersteinNodes);
  const auto uq = midpoint_quantiles(q, kWassersteinNodes);
  double acc = 0.0;
  for (std::size_t k = 0; k < up.size(); ++k) acc += std::pow(std::abs(up[k] - uq[k]), order);
  return std::pow(acc / kWassersteinNodes, 1.0 / order);
}

double wasserstein(const Density1D& p, const Density1D& q, double order) {
  return wasserstein(StepFunction::from_density(p), StepFunction::from_density(q), order);
}

double product_w2(const DensityPair& a, const DensityPair& b) {
  const double wr = wasserstein(a.rho, b.rho, 2.0);
  const double we = wasserstein(a.eta, b.eta, 2.0);
  return std::sqrt(wr * wr + we * we);
}

// ---------------------------------------------------------------------------
// Energy and convolution

std::vector<double> kernel_table(const Kernel& kernel, const Grid1D& grid) {
  std::vector<double> t(grid.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = kernel.eval(static_cast<double>(k) * grid.dx);
  return t;
}

std::vector<double> convolve(const Kernel& kernel, const Density1D& f) {
  const std::size_t n = f.size();
  std::vector<double> padded(3 * n, 0.0);
  std::copy(f.values.begin(), f.values.end(), padded.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> out(n);
  simd::toeplitz_apply(kernel_table(kernel, f.grid), padded, out);
  for (double& v : out) v *= f.grid.dx;
  return out;
}

double energy(const DensityPair& pair, const DensityPair& reference, const KernelTriple& kernels) {
  const Grid1D& g = pair.rho.grid;
  if (!(pair.eta.grid == g) || !(reference.rho.grid == g) || !(reference.eta.grid == g)) {
    throw DomainError("energy: all densities must share one grid");
  }
  const auto s_rho = convolve(kernels.s_rho, pair.rho);
  const auto s_eta = convolve(kernels.s_eta, pair.eta);
  const auto k_mu = convolve(kernels.k, reference.eta);
  const auto k_nu = convolve(kernels.k, reference.rho);
  double quad = 0.0, self = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = pair.rho.values[i], e = pair.eta.values[i];
    quad += r * r + e * e;
    self += r * s_rho[i] + e * s_eta[i];
    cross += -r * k_mu[i] + pair.alpha * e * k_nu[i];
  }
  return g.dx * (0.5 * pair.d * quad - 0.5 * self + cross);
}

Density1D reflect(const Density1D& p) {
  std::vector<double> v(p.values.rbegin(), p.values.rend());
  return Density1D(p.grid, std::move(v));
}

double l1_distance(const Density1D& p, const Density1D& q) {
  if (!(p.grid == q.grid)) throw DomainError("l1_distance: grid mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p.values[i] - q.values[i]);
  return acc * p.grid.dx;
}

// ---------------------------------------------------------------------------
// CSV

void write_snapshot_csv(std::ostream& os, const DensityPair& pair) {
  if (!(pair.rho.grid == pair.eta.grid)) throw DomainError("snapshot: grid mismatch");
  os << "x,rho,eta\n";
  char line[128];
  for (int i = 0; i < pair.rho.grid.n_cells; ++i) {
    const auto k = static_cast<std::size_t>(i);
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", pair.rho.grid.center(i), pair.rho.values[k],
                  pair.eta.values[k]);
    os << line;
  }
}

void write_snapshot_csv(const std::string& path, const DensityPair& pair) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_snapshot_csv(os, pair);
  if (!os) throw Error("failed writing " + path);
}

}  // namespace aggdiff
