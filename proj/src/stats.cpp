#include "rsde/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsde {

namespace {

double pairwise_block(const double* v, std::size_t n) {
    if (n <= 64) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_block(v, half) + pairwise_block(v + half, n - half);
}

} // namespace

double pairwise_sum(std::span<const double> values) {
    return pairwise_block(values.data(), values.size());
}

MeanSd mean_sd(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) throw std::invalid_argument("mean_sd: empty sample");
    MeanSd out;
    out.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n == 1) return out;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = values[i] - out.mean;
        sq[i] = c * c;
    }
    const double ss = pairwise_sum(sq);
    out.sd = std::sqrt(ss / static_cast<double>(n - 1));
    out.stderror = out.sd / std::sqrt(static_cast<double>(n));
    return out;
}

Regression least_squares(std::span<const double> x, std::span<const double> y,
                         std::span<const double> weights) {
    const std::size_t n = x.size();
    if (n != y.size() || (!weights.empty() && weights.size() != n))
        throw std::invalid_argument("least_squares: size mismatch");
    if (n < 2) throw std::invalid_argument("least_squares: need at least two points");
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
        syy += w * y[i] * y[i];
    }
    Regression r;
    const double det = sw * sxx - sx * sx;
    r.slope = (sw * sxy - sx * sy) / det;
    r.intercept = (sy - r.slope * sx) / sw;
    const double cov = sw * sxy - sx * sy;
    const double vx = sw * sxx - sx * sx;
    const double vy = sw * syy - sy * sy;
    r.r2 = (vy > 0.0) ? (cov * cov) / (vx * vy) : 1.0;
    return r;
}

double mann_kendall_z(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 3) throw std::invalid_argument("mann_kendall_z: need at least three points");
    long long s = 0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (values[j] > values[i]) ++s;
            else if (values[j] < values[i]) --s;
        }
    const double nn = static_cast<double>(n);
    const double var = nn * (nn - 1.0) * (2.0 * nn + 5.0) / 18.0;
    if (s == 0) return 0.0;
    const double shift = (s > 0) ? -1.0 : 1.0;
    return (static_cast<double>(s) + shift) / std::sqrt(var);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty sample");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    std::nth_element(values.begin(), values.begin() + mid - 1, values.begin() + mid);
    return 0.5 * (values[mid - 1] + hi);
}

} // namespace rsde
