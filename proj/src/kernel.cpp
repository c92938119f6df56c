#include "aggdiff/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aggdiff/error.hpp"

namespace aggdiff {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(what) + ": non-finite argument");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// TabulatedKernel

TabulatedKernel::TabulatedKernel(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size()) throw ConfigError("tabulated kernel: x and y differ in length");
  if (x_.size() < 2) throw ConfigError("tabulated kernel: need at least two samples");
  for (std::size_t k = 0; k < x_.size(); ++k) {
    if (!std::isfinite(x_[k]) || !std::isfinite(y_[k])) {
      throw ConfigError("tabulated kernel: non-finite sample");
    }
    if (k > 0 && !(x_[k] > x_[k - 1])) {
      throw ConfigError("tabulated kernel: x must be strictly increasing");
    }
  }

  // Natural spline: m_0 = m_{n-1} = 0, Thomas algorithm on the interior.
  const std::size_t n = x_.size();
  m_.assign(n, 0.0);
  if (n > 2) {
    std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double h0 = x_[k] - x_[k - 1];
      const double h1 = x_[k + 1] - x_[k];
      diag[k] = (h0 + h1) / 3.0;
      upper[k] = h1 / 6.0;
      rhs[k] = (y_[k + 1] - y_[k]) / h1 - (y_[k] - y_[k - 1]) / h0;
    }
    // forward sweep; lower[k] = h0 / 6
    for (std::size_t k = 2; k + 1 < n; ++k) {
      const double lower = (x_[k] - x_[k - 1]) / 6.0;
      const double w = lower / diag[k - 1];
      diag[k] -= w * upper[k - 1];
      rhs[k] -= w * rhs[k - 1];
    }
    for (std::size_t k = n - 2; k >= 1; --k) {
      const double next = (k + 2 < n) ? m_[k + 1] : 0.0;
      m_[k] = (rhs[k] - upper[k] * next) / diag[k];
      if (k == 1) break;
    }
  }

  cumulative_.assign(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double h = x_[k + 1] - x_[k];
    cumulative_[k + 1] =
        cumulative_[k] + h * (0.5 * (y_[k] + y_[k + 1]) - h * h / 24.0 * (m_[k] + m_[k + 1]));
  }
  primitive_at_zero_ = primitive(0.0);
}

std::size_t TabulatedKernel::segment(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t k = static_cast<std::size_t>(it - x_.begin());
  k = (k == 0) ? 0 : k - 1;
  return std::min(k, x_.size() - 2);
}

double TabulatedKernel::eval(double x) const {
  if (x < x_.front() || x > x_.back()) return 0.0;
  const std::size_t k = segment(x);
  const double h = x_[k + 1] - x_[k];
  const double a = (x_[k + 1] - x) / h;
  const double b = (x - x_[k]) / h;
  return a * y_[k] + b * y_[k + 1] + ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * h * h / 6.0;
}

double TabulatedKernel::d1(double x) const {
  if (x < x_.front() || x > x_.back()) return 0.0;
  const std::size_t k = segment(x);
  const double h = x_[k + 1] - x_[k];
  const double a = (x_[k + 1] - x) / h;
  const double b = (x - x_[k]) / h;
  return (y_[k + 1] - y_[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m_[k] +
         (3.0 * b * b - 1.0) / 6.0 * h * m_[k + 1];
}

double TabulatedKernel::d2(double x) const {
  if (x < x_.front() || x > x_.back()) return 0.0;
  const std::size_t k = segment(x);
  const double h = x_[k + 1] - x_[k];
  const double a = (x_[k + 1] - x) / h;
  const double b = (x - x_[k]) / h;
  return a * m_[k] + b * m_[k + 1];
}

double TabulatedKernel::primitive(double x) const {
  if (x <= x_.front()) return 0.0;
  if (x >= x_.back()) return cumulative_.back();
  const std::size_t k = segment(x);
  const double h = x_[k + 1] - x_[k];
  const double b = (x - x_[k]) / h;
  const double a = 1.0 - b;
  const double i_left = -0.25 * a * a * a * a + 0.5 * a * a - 0.25;
  const double i_right = 0.25 * b * b * b * b - 0.5 * b * b;
  return cumulative_[k] + h * (y_[k] * (b - 0.5 * b * b) + y_[k + 1] * 0.5 * b * b +
                               h * h / 6.0 * (m_[k] * i_left + m_[k + 1] * i_right));
}

double TabulatedKernel::antiderivative(double x) const { return primitive(x) - primitive_at_zero_; }

// ---------------------------------------------------------------------------
// Kernel

double Kernel::default_amplitude() { return 1.0 / std::sqrt(std::numbers::pi); }

Kernel Kernel::gaussian(double amplitude, double width) {
  if (!std::isfinite(amplitude) || !std::isfinite(width) || width <= 0.0) {
    throw ConfigError("gaussian kernel: amplitude must be finite and width positive");
  }
  return Kernel(GaussianKernel{amplitude, width});
}

Kernel Kernel::tabulated(std::vector<double> x, std::vector<double> y) {
  return Kernel(TabulatedKernel(std::move(x), std::move(y)));
}

Kernel Kernel::zero() { return Kernel(GaussianKernel{0.0, 1.0}); }

double Kernel::eval(double x) const {
  require_finite(x, "Kernel::eval");
  if (const auto* g = as_gaussian()) {
    const double u = x / g->width;
    return g->amplitude * std::exp(-u * u);
  }
  return std::get<TabulatedKernel>(family_).eval(x);
}

double Kernel::eval_d1(double x) const {
  require_finite(x, "Kernel::eval_d1");
  if (const auto* g = as_gaussian()) {
    const double u = x / g->width;
    return -2.0 * g->amplitude * u / g->width * std::exp(-u * u);
  }
  return std::get<TabulatedKernel>(family_).d1(x);
}

double Kernel::eval_d2(double x) const {
  require_finite(x, "Kernel::eval_d2");
  if (const auto* g = as_gaussian()) {
    const double u = x / g->width;
    return g->amplitude * (4.0 * u * u - 2.0) / (g->width * g->width) * std::exp(-u * u);
  }
  return std::get<TabulatedKernel>(family_).d2(x);
}

double Kernel::antider(double x) const {
  require_finite(x, "Kernel::antider");
  if (const auto* g = as_gaussian()) {
    return g->amplitude * g->width * 0.5 * std::sqrt(std::numbers::pi) * std::erf(x / g->width);
  }
  return std::get<TabulatedKernel>(family_).antiderivative(x);
}

Kernel Kernel::scaled(double factor) const {
  if (const auto* g = as_gaussian()) return Kernel(GaussianKernel{g->amplitude * factor, g->width});
  const auto& t = std::get<TabulatedKernel>(family_);
  std::vector<double> y = t.y();
  for (double& v : y) v *= factor;
  return Kernel::tabulated(t.x(), std::move(y));
}

// ---------------------------------------------------------------------------
// Assumption checks

KernelCheck check_kernel(const Kernel& kernel, double radius, int n_samples) {
  if (!(radius > 0.0) || n_samples < 3) {
    throw DomainError("check_assumptions: need radius > 0 and n_samples >= 3");
  }
  KernelCheck out;
  std::vector<double> xs(static_cast<std::size_t>(n_samples));
  for (int k = 0; k < n_samples; ++k) {
    xs[static_cast<std::size_t>(k)] = -radius + 2.0 * radius * k / (n_samples - 1);
  }

  double scale = 0.0;
  for (double x : xs) scale = std::max(scale, std::abs(kernel.eval(x)));
  const double tol = 1e-12 * std::max(scale, 1e-300);

  for (double x : xs) {
    const double v = kernel.eval(x);
    if (std::abs(v - kernel.eval(-x)) > tol) out.symmetric = false;
    if (v < 0.0) out.nonnegative = false;
  }
  double prev = kernel.eval(0.0);
  for (double x : xs) {
    if (x <= 0.0) continue;
    const double v = kernel.eval(x);
    if (v > prev + tol) out.nonincreasing_radial = false;
    prev = v;
  }

  // contiguous run of S'' < 0 through the sample nearest the origin
  std::size_t centre = 0;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    if (std::abs(xs[k]) < std::abs(xs[centre])) centre = k;
  }
  if (kernel.eval_d2(xs[centre]) < 0.0) {
    std::size_t lo = centre, hi = centre;
    while (lo > 0 && kernel.eval_d2(xs[lo - 1]) < 0.0) --lo;
    while (hi + 1 < xs.size() && kernel.eval_d2(xs[hi + 1]) < 0.0) ++hi;
    out.concavity_range = std::make_pair(xs[lo], xs[hi]);
  }
  return out;
}

AssumptionReport check_assumptions(const KernelTriple& kernels, double radius, int n_samples) {
  return {check_kernel(kernels.s_rho, radius, n_samples), check_kernel(kernels.s_eta, radius, n_samples),
          check_kernel(kernels.k, radius, n_samples)};
}

}  // namespace aggdiff
