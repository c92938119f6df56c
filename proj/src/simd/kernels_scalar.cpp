#include <bit>
#include <cmath>
#include <cstdint>

#include "aggdiff/simd.hpp"
#include "exp_impl.hpp"

namespace aggdiff::simd {

double exp_nonpositive(double y) {
  using namespace detail;
  if (!(y >= kExpUnderflow)) return 0.0;
  const double n = std::nearbyint(y * kLog2e);
  const double r = (y - n * kLn2Hi) - n * kLn2Lo;
  double p = kExpCoeff[0];
  for (int k = 1; k < 12; ++k) p = p * r + kExpCoeff[k];
  p = p * r + 1.0;
  p = p * r + 1.0;
  const auto bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(n) + 1023) << 52;
  return p * std::bit_cast<double>(bits);
}

namespace {

inline double gaussian_d1(double c, double inv_width, double x) {
  const double u = x * inv_width;
  return c * u * exp_nonpositive(-(u * u));
}

void toeplitz_scalar(std::span<const double> table, std::span<const double> padded,
                     std::span<double> out) {
  const std::size_t n = out.size();
  const double* f = padded.data() + n;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = table[0] * f[i];
    for (std::size_t k = 1; k < n; ++k) {
      acc = acc + table[k] * (f[static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(k)] + f[i + k]);
    }
    out[i] = acc;
  }
}

void pair_force_scalar(double amplitude, double width, std::span<const double> targets,
                       std::span<const double> sources, std::span<double> out) {
  const double c = -2.0 * amplitude / width;
  const double inv_width = 1.0 / width;
  const std::size_t m = sources.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double t = targets[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < m / 2; ++j) {
      acc = acc + (gaussian_d1(c, inv_width, t - sources[j]) +
                   gaussian_d1(c, inv_width, t - sources[m - 1 - j]));
    }
    if (m % 2 == 1) acc = acc + gaussian_d1(c, inv_width, t - sources[m / 2]);
    out[i] = acc;
  }
}

}  // namespace

namespace detail {

const KernelTable& scalar_kernels() {
  static const KernelTable table{&toeplitz_scalar, &pair_force_scalar};
  return table;
}

}  // namespace detail

}  // namespace aggdiff::simd
