#pragma once

// Data-parallel inner loops behind the correlation and Frobenius metrics.
// Every kernel has a portable scalar reference and, on x86-64, an AVX2
// variant; the active set is chosen once at startup from CPUID and can be
// pinned with VALIGN_ISA=scalar|avx2 or force_isa().

#include <cstddef>
#include <span>
#include <string_view>

namespace valign::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Raw sums over rows where both observations are present.
struct PairMoments {
    double n = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
};

/// x and y hold values with 0 written at missing positions; mx and my are
/// 1.0 where observed and 0.0 where missing. All four spans share a length.
using MaskedMomentsFn = PairMoments (*)(std::span<const double> x, std::span<const double> mx,
                                        std::span<const double> y, std::span<const double> my);

/// sum_i mask[i] * (a[i] - b[i])^2
using MaskedSquaredDistanceFn = double (*)(std::span<const double> a, std::span<const double> b,
                                           std::span<const double> mask);

/// sum_i a[i]^2
using SumSquaresFn = double (*)(std::span<const double> a);

struct KernelTable {
    Isa isa;
    MaskedMomentsFn masked_moments;
    MaskedSquaredDistanceFn masked_squared_distance;
    SumSquaresFn sum_squares;
};

namespace scalar {
PairMoments masked_moments(std::span<const double> x, std::span<const double> mx,
                           std::span<const double> y, std::span<const double> my);
double masked_squared_distance(std::span<const double> a, std::span<const double> b,
                               std::span<const double> mask);
double sum_squares(std::span<const double> a);
}  // namespace scalar

namespace avx2 {
PairMoments masked_moments(std::span<const double> x, std::span<const double> mx,
                           std::span<const double> y, std::span<const double> my);
double masked_squared_distance(std::span<const double> a, std::span<const double> b,
                               std::span<const double> mask);
double sum_squares(std::span<const double> a);
}  // namespace avx2

/// True when the AVX2 variants were compiled in and the CPU supports them.
bool avx2_available();

const KernelTable& table_for(Isa isa);
const KernelTable& active();
/// Pins the active table (tests, benchmarks). Throws std::invalid_argument
/// when the ISA is unavailable.
void force_isa(Isa isa);
/// Returns to the CPUID-selected default.
void reset_isa();

inline PairMoments masked_moments(std::span<const double> x, std::span<const double> mx,
                                  std::span<const double> y, std::span<const double> my) {
    return active().masked_moments(x, mx, y, my);
}

inline double masked_squared_distance(std::span<const double> a, std::span<const double> b,
                                      std::span<const double> mask) {
    return active().masked_squared_distance(a, b, mask);
}

inline double sum_squares(std::span<const double> a) { return active().sum_squares(a); }

}  // namespace valign::kernels
