#include "valign/kernels.hpp"

namespace valign::kernels::scalar {

PairMoments masked_moments(std::span<const double> x, std::span<const double> mx,
                           std::span<const double> y, std::span<const double> my) {
    PairMoments m;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
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
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += mask[i] * d * d;
    }
    return s;
}

double sum_squares(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

}  // namespace valign::kernels::scalar
