#include <immintrin.h>

#include <cmath>

#include "aggdiff/simd.hpp"
#include "exp_impl.hpp"

namespace aggdiff::simd {

namespace {

inline __m256d exp_nonpositive_avx2(__m256d y) {
  using namespace detail;
  const __m256d valid = _mm256_cmp_pd(y, _mm256_set1_pd(kExpUnderflow), _CMP_GE_OQ);
  y = _mm256_max_pd(y, _mm256_set1_pd(kExpUnderflow));
  const __m256d n =
      _mm256_round_pd(_mm256_mul_pd(y, _mm256_set1_pd(kLog2e)), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d r = _mm256_sub_pd(_mm256_sub_pd(y, _mm256_mul_pd(n, _mm256_set1_pd(kLn2Hi))),
                                  _mm256_mul_pd(n, _mm256_set1_pd(kLn2Lo)));
  __m256d p = _mm256_set1_pd(kExpCoeff[0]);
  for (int k = 1; k < 12; ++k) p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(kExpCoeff[k]));
  const __m256d one = _mm256_set1_pd(1.0);
  p = _mm256_add_pd(_mm256_mul_pd(p, r), one);
  p = _mm256_add_pd(_mm256_mul_pd(p, r), one);
  __m256i e = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  e = _mm256_slli_epi64(_mm256_add_epi64(e, _mm256_set1_epi64x(1023)), 52);
  return _mm256_and_pd(_mm256_mul_pd(p, _mm256_castsi256_pd(e)), valid);
}

inline __m256d gaussian_d1_avx2(__m256d c, __m256d inv_width, __m256d x) {
  const __m256d u = _mm256_mul_pd(x, inv_width);
  const __m256d neg_u2 = _mm256_sub_pd(_mm256_setzero_pd(), _mm256_mul_pd(u, u));
  return _mm256_mul_pd(_mm256_mul_pd(c, u), exp_nonpositive_avx2(neg_u2));
}

inline double gaussian_d1(double c, double inv_width, double x) {
  const double u = x * inv_width;
  return c * u * exp_nonpositive(-(u * u));
}

void toeplitz_avx2(std::span<const double> table, std::span<const double> padded, std::span<double> out) {
  const std::size_t n = out.size();
  const double* f = padded.data() + n;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_mul_pd(_mm256_set1_pd(table[0]), _mm256_loadu_pd(f + i));
    for (std::size_t k = 1; k < n; ++k) {
      const __m256d pair = _mm256_add_pd(_mm256_loadu_pd(f + i - k), _mm256_loadu_pd(f + i + k));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(table[k]), pair));
    }
    _mm256_storeu_pd(out.data() + i, acc);
  }
  for (; i < n; ++i) {
    double acc = table[0] * f[i];
    for (std::size_t k = 1; k < n; ++k) {
      acc = acc + table[k] * (f[static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(k)] + f[i + k]);
    }
    out[i] = acc;
  }
}

void pair_force_avx2(double amplitude, double width, std::span<const double> targets,
                     std::span<const double> sources, std::span<double> out) {
  const double c = -2.0 * amplitude / width;
  const double inv_width = 1.0 / width;
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vinv = _mm256_set1_pd(inv_width);
  const std::size_t m = sources.size();
  const std::size_t nt = targets.size();
  std::size_t i = 0;
  for (; i + 4 <= nt; i += 4) {
    const __m256d t = _mm256_loadu_pd(targets.data() + i);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < m / 2; ++j) {
      const __m256d a = gaussian_d1_avx2(vc, vinv, _mm256_sub_pd(t, _mm256_set1_pd(sources[j])));
      const __m256d b = gaussian_d1_avx2(vc, vinv, _mm256_sub_pd(t, _mm256_set1_pd(sources[m - 1 - j])));
      acc = _mm256_add_pd(acc, _mm256_add_pd(a, b));
    }
    if (m % 2 == 1) {
      acc = _mm256_add_pd(acc, gaussian_d1_avx2(vc, vinv, _mm256_sub_pd(t, _mm256_set1_pd(sources[m / 2]))));
    }
    _mm256_storeu_pd(out.data() + i, acc);
  }
  for (; i < nt; ++i) {
    const double t = targets[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < m / 2; ++j) {
      acc = acc + (gaussian_d1(c, inv_width, t - sources[j]) + gaussian_d1(c, inv_width, t - sources[m - 1 - j]));
    }
    if (m % 2 == 1) acc = acc + gaussian_d1(c, inv_width, t - sources[m / 2]);
    out[i] = acc;
  }
}

}  // namespace

namespace detail {

const KernelTable& avx2_kernels() {
  static const KernelTable table{&toeplitz_avx2, &pair_force_avx2};
  return table;
}

}  // namespace detail

}  // namespace aggdiff::simd
