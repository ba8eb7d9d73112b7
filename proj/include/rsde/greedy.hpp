#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "rsde/grid.hpp"
#include "rsde/roughpath.hpp"

namespace rsde::greedy {

enum class Label { s0, s1, s2 };

/// Greedy partition of [0, T] by a control threshold alpha: each interval is
/// either a maximal interval of control mass <= alpha or a single oversized
/// step. Labels follow the classification
///   S2: omega > alpha (single steps),  S0: alpha/2 <= omega <= alpha,
///   S1: omega < alpha/2.
struct GreedyPartition {
    double alpha = 0.0;
    double variation_exponent = 0.0; // p of the control that built the partition
    std::vector<std::size_t> points; // grid indices, strictly increasing, last = n
    std::vector<Label> labels;       // per interval
    std::vector<double> omegas;      // per interval

    std::size_t intervals() const { return labels.size(); }
};

/// Recursive construction: a single step when the next step already exceeds
/// alpha, otherwise the largest grid point u with omega(s_j, u) <= alpha. The
/// search is a binary search, valid because controls are monotone in interval
/// inclusion; greedy_sequence_linear_scan is the O(n) verification mode.
GreedyPartition greedy_sequence(const roughpath::Control& omega, double alpha);
GreedyPartition greedy_sequence_linear_scan(const roughpath::Control& omega, double alpha);

/// Cardinalities (|S0|, |S1|, |S2|).
std::array<std::size_t, 3> classify_counts(const GreedyPartition& part);

struct MProducts {
    double m0 = 1.0;
    double m1 = 1.0;
    double m2 = 1.0;
    double k_const = 1.0;
};

/// M0 = prod_{S0} (K omega^{1/p} + 1), M1 the same over S1,
/// M2 = prod_{S2} (K |x_step| + K dt^{2H} + 1) with |x| the rough-path
/// increment norm |x1| + |x2|^{1/2} of the single step.
MProducts m_products(const GreedyPartition& part, const roughpath::Level2Path& lift,
                     double k_const, const HurstParam& hurst);

/// CSV: j,s_j,s_j1,omega,label.
void write_csv(const GreedyPartition& part, const UniformGrid& grid, std::ostream& os);

} // namespace rsde::greedy
