#include "rsde/sewing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "rsde/format.hpp"
#include "rsde/rng.hpp"

namespace rsde::sewing {

namespace {

double vec_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double ratio(double num, double denom) {
    if (num == 0.0) return 0.0;
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return num / denom;
}

/// Uniform index in [0, bound) from a counter-based stream.
std::size_t pick(std::uint64_t seed, std::uint64_t ctr, std::size_t bound) {
    const auto r = Philox4x32::block(
        {static_cast<std::uint32_t>(ctr), static_cast<std::uint32_t>(ctr >> 32), 0x5E51Cu, 0},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const std::uint64_t u = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    return static_cast<std::size_t>(u % bound);
}

} // namespace

double sewing_constant(double mu) {
    if (!(mu > 1.0))
        throw std::domain_error("sewing_constant: the series diverges for mu <= 1");
    // Ascending direct sum so the small terms accumulate first.
    constexpr std::size_t kTerms = 1000000;
    double sum = 0.0;
    for (std::size_t l = kTerms; l >= 1; --l)
        sum += std::pow(static_cast<double>(l), -mu);
    // Euler-Maclaurin tail: sum_{l>L} l^-mu = L^{1-mu}/(mu-1) - L^-mu/2 + mu L^{-mu-1}/12 - ...
    const double L = static_cast<double>(kTerms);
    const double tail = std::pow(L, 1.0 - mu) / (mu - 1.0) - 0.5 * std::pow(L, -mu) +
                        mu / 12.0 * std::pow(L, -mu - 1.0);
    return std::pow(2.0, mu) * (sum + tail);
}

SewingReport verify_sewing(const IncrementFn& increment, const roughpath::Control& omega,
                           double mu, std::uint64_t sample_seed) {
    if (!(mu > 1.0)) throw std::domain_error("verify_sewing: need mu > 1");
    const std::size_t n = omega.grid().steps();
    SewingReport rep;
    rep.mu = mu;
    rep.k_mu = sewing_constant(mu);

    // Hypothesis 1: single steps.
    for (std::size_t k = 0; k < n; ++k) {
        const double r = ratio(vec_norm(increment(k, k + 1)), std::pow(omega(k, k + 1), mu));
        rep.max_step_hypothesis = std::max(rep.max_step_hypothesis, r);
    }

    const bool exhaustive = n <= 512;

    // Hypothesis 2: the coboundary over triples.
    auto triple_ratio = [&](std::size_t s, std::size_t u, std::size_t t) {
        const auto rst = increment(s, t);
        const auto rsu = increment(s, u);
        const auto rut = increment(u, t);
        std::vector<double> d(rst.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = rst[i] - rsu[i] - rut[i];
        return ratio(vec_norm(d), std::pow(omega(s, t), mu));
    };
    if (exhaustive) {
        for (std::size_t s = 0; s + 2 <= n; ++s)
            for (std::size_t u = s + 1; u < n; ++u)
                for (std::size_t t = u + 1; t <= n; ++t)
                    rep.max_triple_hypothesis =
                        std::max(rep.max_triple_hypothesis, triple_ratio(s, u, t));
    } else {
        const std::size_t samples = n * static_cast<std::size_t>(std::log2(double(n)) + 1);
        std::uint64_t ctr = 0;
        for (std::size_t i = 0; i < samples; ++i) {
            std::size_t s = pick(sample_seed, ctr++, n - 1);
            std::size_t t = s + 2 + pick(sample_seed, ctr++, n - s - 1);
            if (t > n) t = n;
            const std::size_t u = s + 1 + pick(sample_seed, ctr++, t - s - 1);
            rep.max_triple_hypothesis =
                std::max(rep.max_triple_hypothesis, triple_ratio(s, u, t));
        }
    }

    // The bound itself over pairs.
    auto pair_ratio = [&](std::size_t s, std::size_t t) {
        const double r = ratio(vec_norm(increment(s, t)), std::pow(omega(s, t), mu));
        if (r > rep.max_ratio) {
            rep.max_ratio = r;
            rep.witness_from = s;
            rep.witness_to = t;
        }
    };
    if (exhaustive) {
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t t = s + 1; t <= n; ++t) pair_ratio(s, t);
    } else {
        const std::size_t samples = n * static_cast<std::size_t>(std::log2(double(n)) + 1);
        std::uint64_t ctr = 1u << 20;
        for (std::size_t i = 0; i < samples; ++i) {
            const std::size_t s = pick(sample_seed, ctr++, n);
            const std::size_t t = s + 1 + pick(sample_seed, ctr++, n - s);
            pair_ratio(s, t);
        }
    }

    if (rep.max_step_hypothesis > 1.0 || rep.max_triple_hypothesis > 1.0)
        rep.verdict = Verdict::hypothesis_failure;
    else
        rep.verdict = (rep.max_ratio <= rep.k_mu) ? Verdict::pass : Verdict::fail;
    return rep;
}

double weighted_sum_j(std::span<const double> f, std::span<const double> g, std::size_t from,
                      std::size_t to) {
    if (from > to || to >= f.size() || f.size() != g.size())
        throw std::domain_error("weighted_sum_j: index range out of bounds");
    double s = 0.0;
    for (std::size_t k = from; k < to; ++k)
        s += (f[k] - f[from]) * (g[k + 1] - g[k]);
    return s;
}

void write_csv(const SewingReport& report, const UniformGrid& grid, std::ostream& os) {
    const char* verdict = report.verdict == Verdict::pass
                              ? "PASS"
                              : (report.verdict == Verdict::fail ? "FAIL" : "HYPOTHESIS-FAIL");
    os << "mu,K_mu,max_ratio,witness_s,witness_t,verdict\n";
    os << fmt17(report.mu) << "," << fmt17(report.k_mu) << "," << fmt17(report.max_ratio) << ","
       << fmt17(grid.point(report.witness_from)) << "," << fmt17(grid.point(report.witness_to))
       << "," << verdict << "\n";
}

} // namespace rsde::sewing
