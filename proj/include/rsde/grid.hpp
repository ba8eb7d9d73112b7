#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace rsde {

/// Hurst parameter of a fractional Brownian motion. The library accepts
/// H in (0, 1/2]; everything is tuned for the rough band 1/3 < H <= 1/2,
/// use in_target_band() to warn callers outside it.
class HurstParam {
public:
    explicit HurstParam(double h) : h_(h) {
        if (!(h > 0.0) || h > 0.5)
            throw std::domain_error("HurstParam: H must lie in (0, 1/2], got " + std::to_string(h));
    }

    double value() const { return h_; }
    double two_h() const { return 2.0 * h_; }

    /// True when 1/3 < H <= 1/2, the band the simulation targets.
    bool in_target_band() const { return h_ > 1.0 / 3.0; }

private:
    double h_;
};

/// Uniform partition 0 = t_0 < t_1 < ... < t_n = T with t_k = k*T/n.
/// Points are always computed as k*T/n, never accumulated, so t_n == T exactly.
class UniformGrid {
public:
    UniformGrid(double horizon, std::size_t steps) : T_(horizon), n_(steps) {
        if (!(horizon > 0.0))
            throw std::domain_error("UniformGrid: horizon must be positive");
        if (steps == 0)
            throw std::domain_error("UniformGrid: need at least one step");
        dt_ = T_ / static_cast<double>(n_);
    }

    double horizon() const { return T_; }
    std::size_t steps() const { return n_; }
    std::size_t points() const { return n_ + 1; }
    double dt() const { return dt_; }

    double point(std::size_t k) const {
        return (k == n_) ? T_ : static_cast<double>(k) * T_ / static_cast<double>(n_);
    }

    /// Index of eta(u): the largest t_k <= u, with eta(T) = t_{n-1} so that
    /// [eta(u), eta(u)+dt] is always a genuine step of the grid.
    std::size_t eta_index(double u) const {
        if (u < 0.0 || u > T_ * (1.0 + 1e-14))
            throw std::domain_error("UniformGrid::eta_index: time outside [0, T]");
        auto k = static_cast<std::size_t>(std::floor(u / dt_));
        if (k >= n_) k = n_ - 1;
        return k;
    }

    double eta(double u) const { return point(eta_index(u)); }

    bool same_as(const UniformGrid& other) const {
        return n_ == other.n_ && T_ == other.T_;
    }

private:
    double T_;
    std::size_t n_;
    double dt_;
};

} // namespace rsde
