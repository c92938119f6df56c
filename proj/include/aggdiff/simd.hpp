#pragma once

// Data-parallel inner loops. Every routine has a scalar reference and, on
// x86-64, an AVX2 variant selected at runtime. Both variants perform the same
// IEEE operations in the same order per output element, so their results are
// bitwise identical; the summation orders are chosen so that reflecting the
// input (x -> -x) reflects the output exactly.

#include <span>
#include <string_view>

namespace aggdiff::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Best instruction set supported by both the build and the running CPU.
Isa detected_isa();

/// Instruction set used by the dispatching entry points below.
Isa active_isa();

/// Overrides the dispatch choice (tests use this to compare variants). Requests
/// for an unavailable ISA fall back to scalar.
void set_active_isa(Isa isa);

/// exp(y) for y <= 0 with a fixed operation sequence shared by all variants.
/// Returns 0 below -708.
double exp_nonpositive(double y);

/// Offset-ordered symmetric Toeplitz product
///   out[i] = table[0] f[i] + sum_{k=1}^{n-1} table[k] (f[i-k] + f[i+k]),
/// with f = 0 outside [0, n). `padded` holds f at offset n inside a zero
/// buffer of length 3n; table.size() >= n.
void toeplitz_apply(std::span<const double> table, std::span<const double> padded,
                    std::span<double> out);

/// out[i] = sum_j g'(targets[i] - sources[j]) for g(x) = amplitude exp(-(x/width)^2),
/// accumulated over the mirror pairs (j, m-1-j) in increasing j, then the middle
/// source when m is odd.
void gaussian_pair_force(double amplitude, double width, std::span<const double> targets,
                         std::span<const double> sources, std::span<double> out);

namespace detail {

struct KernelTable {
  void (*toeplitz_apply)(std::span<const double>, std::span<const double>, std::span<double>);
  void (*gaussian_pair_force)(double, double, std::span<const double>, std::span<const double>,
                              std::span<double>);
};

const KernelTable& scalar_kernels();
#if defined(AGGDIFF_WITH_AVX2)
const KernelTable& avx2_kernels();
#endif

}  // namespace detail

}  // namespace aggdiff::simd
