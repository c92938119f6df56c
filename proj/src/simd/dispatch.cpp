#include <atomic>

#include "aggdiff/simd.hpp"

namespace aggdiff::simd {

namespace {

Isa probe() {
#if defined(AGGDIFF_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

const detail::KernelTable& table() {
#if defined(AGGDIFF_WITH_AVX2)
  if (active().load(std::memory_order_relaxed) == Isa::Avx2) return detail::avx2_kernels();
#endif
  return detail::scalar_kernels();
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2) isa = Isa::Scalar;
  active().store(isa, std::memory_order_relaxed);
}

void toeplitz_apply(std::span<const double> table_values, std::span<const double> padded, std::span<double> out) {
  table().toeplitz_apply(table_values, padded, out);
}

void gaussian_pair_force(double amplitude, double width, std::span<const double> targets,
                         std::span<const double> sources, std::span<double> out) {
  table().gaussian_pair_force(amplitude, width, targets, sources, out);
}

}  // namespace aggdiff::simd
