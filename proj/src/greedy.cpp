#include "rsde/greedy.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rsde/format.hpp"

namespace rsde::greedy {

namespace {

Label classify(double omega, double alpha) {
    if (omega > alpha) return Label::s2;
    if (omega < 0.5 * alpha) return Label::s1;
    return Label::s0;
}

const char* label_name(Label l) {
    switch (l) {
    case Label::s0: return "S0";
    case Label::s1: return "S1";
    default: return "S2";
    }
}

template <typename NextFn>
GreedyPartition build(const roughpath::Control& omega, double alpha, NextFn next_point) {
    if (!(alpha > 0.0)) throw std::domain_error("greedy_sequence: alpha must be positive");
    const std::size_t n = omega.grid().steps();
    GreedyPartition part;
    part.alpha = alpha;
    part.variation_exponent = omega.variation_exponent();
    part.points.push_back(0);
    std::size_t s = 0;
    while (s < n) {
        std::size_t t;
        if (omega(s, s + 1) > alpha) {
            t = s + 1; // oversized single step
        } else {
            t = next_point(s);
        }
        const double w = omega(s, t);
        part.points.push_back(t);
        part.omegas.push_back(w);
        part.labels.push_back(classify(w, alpha));
        s = t;
    }
    return part;
}

} // namespace

GreedyPartition greedy_sequence(const roughpath::Control& omega, double alpha) {
    const std::size_t n = omega.grid().steps();
    return build(omega, alpha, [&](std::size_t s) {
        // Largest u > s with omega(s, u) <= alpha; omega(s, s+1) <= alpha holds
        // here, so lo is a valid candidate throughout.
        std::size_t lo = s + 1, hi = n;
        if (omega(s, hi) <= alpha) return hi;
        while (hi - lo > 1) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (omega(s, mid) <= alpha)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    });
}

GreedyPartition greedy_sequence_linear_scan(const roughpath::Control& omega, double alpha) {
    const std::size_t n = omega.grid().steps();
    return build(omega, alpha, [&](std::size_t s) {
        std::size_t u = s + 1;
        while (u < n && omega(s, u + 1) <= alpha) ++u;
        return u;
    });
}

std::array<std::size_t, 3> classify_counts(const GreedyPartition& part) {
    std::array<std::size_t, 3> counts{0, 0, 0};
    for (Label l : part.labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

MProducts m_products(const GreedyPartition& part, const roughpath::Level2Path& lift,
                     double k_const, const HurstParam& hurst) {
    if (!(k_const > 0.0)) throw std::domain_error("m_products: K must be positive");
    MProducts out;
    out.k_const = k_const;
    const double inv_p = 1.0 / part.variation_exponent;
    const double dt2h = std::pow(lift.grid().dt(), hurst.two_h());
    for (std::size_t j = 0; j < part.intervals(); ++j) {
        const std::size_t a = part.points[j], b = part.points[j + 1];
        switch (part.labels[j]) {
        case Label::s0:
            out.m0 *= k_const * std::pow(part.omegas[j], inv_p) + 1.0;
            break;
        case Label::s1:
            out.m1 *= k_const * std::pow(part.omegas[j], inv_p) + 1.0;
            break;
        case Label::s2:
            out.m2 *= k_const * lift.increment_norm(a, b) + k_const * dt2h + 1.0;
            break;
        }
    }
    return out;
}

void write_csv(const GreedyPartition& part, const UniformGrid& grid, std::ostream& os) {
    os << "j,s_j,s_j1,omega,label\n";
    for (std::size_t j = 0; j < part.intervals(); ++j)
        os << j << "," << fmt17(grid.point(part.points[j])) << ","
           << fmt17(grid.point(part.points[j + 1])) << "," << fmt17(part.omegas[j]) << ","
           << label_name(part.labels[j]) << "\n";
}

} // namespace rsde::greedy
