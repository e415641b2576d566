#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "valign/kernels.hpp"

namespace valign::kernels {

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

namespace {

constexpr KernelTable scalar_table{Isa::scalar, &scalar::masked_moments,
                                   &scalar::masked_squared_distance, &scalar::sum_squares};

#if defined(VALIGN_HAVE_AVX2)
constexpr KernelTable avx2_table{Isa::avx2, &avx2::masked_moments, &avx2::masked_squared_distance,
                                 &avx2::sum_squares};
#endif

const KernelTable* detect() {
    if (const char* env = std::getenv("VALIGN_ISA")) {
        std::string_view want(env);
        if (want == "scalar") return &scalar_table;
        if (want == "avx2" && avx2_available()) return &table_for(Isa::avx2);
    }
    return avx2_available() ? &table_for(Isa::avx2) : &scalar_table;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{detect()};
    return table;
}

}  // namespace

bool avx2_available() {
#if defined(VALIGN_HAVE_AVX2)
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok;
#else
    return false;
#endif
}

const KernelTable& table_for(Isa isa) {
    if (isa == Isa::scalar) return scalar_table;
#if defined(VALIGN_HAVE_AVX2)
    if (avx2_available()) return avx2_table;
#endif
    throw std::invalid_argument("AVX2 kernels are not available on this machine");
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void force_isa(Isa isa) { current().store(&table_for(isa), std::memory_order_release); }

void reset_isa() { current().store(detect(), std::memory_order_release); }

}  // namespace valign::kernels
