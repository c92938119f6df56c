#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace aggdiff {

/// amplitude * exp(-(x / width)^2)
struct GaussianKernel {
  double amplitude;
  double width;
};

/// Even potential given by samples, interpolated with a natural cubic spline
/// and extended by zero outside the sampled range.
class TabulatedKernel {
 public:
  TabulatedKernel(std::vector<double> x, std::vector<double> y);

  double eval(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  double antiderivative(double x) const;

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }

 private:
  std::size_t segment(double x) const;
  double primitive(double x) const;  // integral from x_.front()

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;         // spline second derivatives at the knots
  std::vector<double> cumulative_;  // primitive at the knots
  double primitive_at_zero_ = 0.0;
};

/// Radial interaction potential S, with S', S'' and the odd primitive G
/// (G' = S, G(0) = 0).
class Kernel {
 public:
  static Kernel gaussian(double amplitude = default_amplitude(), double width = 1.0);
  static Kernel tabulated(std::vector<double> x, std::vector<double> y);
  static Kernel zero();

  /// 1/sqrt(pi): the unit-mass normalisation of exp(-x^2).
  static double default_amplitude();

  double eval(double x) const;
  double eval_d1(double x) const;
  double eval_d2(double x) const;
  double antider(double x) const;

  bool is_gaussian() const { return std::holds_alternative<GaussianKernel>(family_); }
  const GaussianKernel* as_gaussian() const { return std::get_if<GaussianKernel>(&family_); }

  /// Returns a copy with every value multiplied by `factor`.
  Kernel scaled(double factor) const;

  /// Sampled tables (x, y) for a tabulated kernel; nullptr for Gaussian.
  const TabulatedKernel* as_tabulated() const { return std::get_if<TabulatedKernel>(&family_); }

 private:
  explicit Kernel(std::variant<GaussianKernel, TabulatedKernel> f) : family_(std::move(f)) {}
  std::variant<GaussianKernel, TabulatedKernel> family_;
};

struct KernelTriple {
  Kernel s_rho = Kernel::gaussian();
  Kernel s_eta = Kernel::gaussian();
  Kernel k = Kernel::gaussian();

  static KernelTriple gaussian() { return {}; }
  static KernelTriple zero() { return {Kernel::zero(), Kernel::zero(), Kernel::zero()}; }
};

struct KernelCheck {
  bool symmetric = true;
  bool nonincreasing_radial = true;
  bool nonnegative = true;
  /// Sampled interval around 0 on which S'' < 0; empty when S''(0) >= 0.
  std::optional<std::pair<double, double>> concavity_range;

  bool ok() const { return symmetric && nonincreasing_radial && nonnegative; }
};

struct AssumptionReport {
  KernelCheck s_rho;
  KernelCheck s_eta;
  KernelCheck k;

  bool ok() const { return s_rho.ok() && s_eta.ok() && k.ok(); }
};

KernelCheck check_kernel(const Kernel& kernel, double radius, int n_samples);
AssumptionReport check_assumptions(const KernelTriple& kernels, double radius, int n_samples);

}  // namespace aggdiff
