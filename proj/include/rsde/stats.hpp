#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rsde {

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// numerically stable for the million-replica reductions the harness runs.
double pairwise_sum(std::span<const double> values);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;     ///< sample standard deviation (n-1)
    double stderror = 0.0; ///< sd / sqrt(n)
};

MeanSd mean_sd(std::span<const double> values);

struct Regression {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares of y against x, optionally weighted.
Regression least_squares(std::span<const double> x, std::span<const double> y,
                         std::span<const double> weights = {});

/// One-sided Mann-Kendall trend statistic. Returns the normalized z score;
/// values above 1.645 reject "no upward trend" at the 5% level.
double mann_kendall_z(std::span<const double> values);

double median(std::vector<double> values);

} // namespace rsde
