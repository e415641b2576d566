#include <immintrin.h>

#include "valign/kernels.hpp"

namespace valign::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

PairMoments masked_moments(std::span<const double> x, std::span<const double> mx,
                           std::span<const double> y, std::span<const double> my) {
    const std::size_t n = x.size();
    __m256d vn = _mm256_setzero_pd(), vsx = _mm256_setzero_pd(), vsy = _mm256_setzero_pd();
    __m256d vsxx = _mm256_setzero_pd(), vsyy = _mm256_setzero_pd(), vsxy = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x.data() + i);
        const __m256d yv = _mm256_loadu_pd(y.data() + i);
        const __m256d mxv = _mm256_loadu_pd(mx.data() + i);
        const __m256d myv = _mm256_loadu_pd(my.data() + i);
        const __m256d xm = _mm256_mul_pd(xv, myv);
        const __m256d ym = _mm256_mul_pd(yv, mxv);
        vn = _mm256_fmadd_pd(mxv, myv, vn);
        vsx = _mm256_add_pd(vsx, xm);
        vsy = _mm256_add_pd(vsy, ym);
        vsxx = _mm256_fmadd_pd(xm, xv, vsxx);
        vsyy = _mm256_fmadd_pd(ym, yv, vsyy);
        vsxy = _mm256_fmadd_pd(xv, yv, vsxy);
    }
    PairMoments m{hsum(vn), hsum(vsx), hsum(vsy), hsum(vsxx), hsum(vsyy), hsum(vsxy)};
    for (; i < n; ++i) {
        const double xi = x[i] * my[i];
        const double yi = y[i] * mx[i];
        m.n += mx[i] * my[i];
        m.sx += xi;
        m.sy += yi;
        m.sxx += xi * x[i];
        m.syy += yi * y[i];
        m.sxy += x[i] * y[i];
    }
    return m;
}

double masked_squared_distance(std::span<const double> a, std::span<const double> b,
                               std::span<const double> mask) {
    const std::size_t n = a.size();
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(mask.data() + i), d), d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += mask[i] * d * d;
    }
    return s;
}

double sum_squares(std::span<const double> a) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d v0 = _mm256_loadu_pd(a.data() + i);
        const __m256d v1 = _mm256_loadu_pd(a.data() + i + 4);
        acc0 = _mm256_fmadd_pd(v0, v0, acc0);
        acc1 = _mm256_fmadd_pd(v1, v1, acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * a[i];
    return s;
}

}  // namespace valign::kernels::avx2
