#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rsde/grid.hpp"
#include "rsde/rng.hpp"

namespace rsde::fbm {

/// Covariance R(s,t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2 of one fBm coordinate.
double cov(const HurstParam& hurst, double s, double t);

/// Rectangular increment covariance E[dx_{uv} dx_{st}] for intervals
/// [u,v] and [s,t]. Equals (v-u)^{2H} on the diagonal, is nonnegative for
/// nested intervals and negative for disjoint ones when H < 1/2.
double rect_cov(const HurstParam& hurst, double u, double v, double s, double t);

enum class SampleMethod {
    automatic, ///< circulant embedding, dense Cholesky if the embedding fails
    circulant,
    cholesky,
};

/// Raised when no exact sampling route is available (embedding indefinite and
/// the increment covariance is numerically singular).
class generation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A d-dimensional fBm sample on a uniform grid. Immutable after construction;
/// values[i][0] == 0 and coordinates are independent.
class FbmPath {
public:
    FbmPath(UniformGrid grid, HurstParam hurst, std::size_t dim,
            std::uint64_t seed, std::uint64_t replica, std::vector<double> values);

    const UniformGrid& grid() const { return grid_; }
    const HurstParam& hurst() const { return hurst_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t replica() const { return replica_; }

    double value(std::size_t coord, std::size_t k) const {
        return values_[coord * grid_.points() + k];
    }
    double increment(std::size_t coord, std::size_t k) const {
        return value(coord, k + 1) - value(coord, k);
    }
    std::span<const double> coordinate(std::size_t coord) const {
        return {values_.data() + coord * grid_.points(), grid_.points()};
    }

private:
    UniformGrid grid_;
    HurstParam hurst_;
    std::size_t dim_;
    std::uint64_t seed_;
    std::uint64_t replica_;
    std::vector<double> values_;
};

/// Exact-in-distribution sampling via circulant embedding of the increment
/// autocovariance (Davies-Harte), with a dense Cholesky fallback. Deterministic
/// in (seed, replica, hurst, grid, dim) regardless of thread count.
FbmPath sample_fbm(const HurstParam& hurst, const UniformGrid& grid, std::size_t dim,
                   std::uint64_t seed, std::uint64_t replica = 0,
                   SampleMethod method = SampleMethod::automatic);

/// Restrict a path to every factor-th grid point. The result shares the fine
/// path's randomness, which is what couples coarse and fine scheme runs.
FbmPath refine_subsample(const FbmPath& fine, std::size_t factor);

/// CSV with header t,x1,...,xd and one row per grid point (17 significant digits).
void write_csv(const FbmPath& path, std::ostream& os);

namespace detail {

/// Autocovariance gamma(0..n) of fGn increments at mesh dt.
std::vector<double> fgn_acvf(double two_h, double dt, std::size_t n);

/// Eigenvalues of the circulant embedding (size 2n) of acvf = gamma(0..n).
std::vector<double> circulant_eigenvalues(std::span<const double> acvf);

/// n stationary Gaussian increments with autocovariance `acvf`, drawn from
/// `gauss` by index. Exposed so tests can drive the fallback and error paths
/// with synthetic covariances.
std::vector<double> sample_increments(std::span<const double> acvf,
                                      const GaussianStream& gauss, SampleMethod method);

} // namespace detail

} // namespace rsde::fbm
