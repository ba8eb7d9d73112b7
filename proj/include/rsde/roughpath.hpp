#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "rsde/fbm.hpp"
#include "rsde/grid.hpp"
#include "rsde/schemes.hpp"

namespace rsde::roughpath {

enum class LiftMethod { diagonal_exact, fine_grid_approx };

/// Level-1 increments and level-2 iterated integrals of a path over a grid,
/// Chen-consistent by construction. Values for any grid pair (a,b) are
/// recovered in O(d^2) from prefix data:
///   x2_{ab} = P_b - P_a - x_a (x) (x_b - x_a),  P_k = x2_{0k}.
///
/// The tensor convention is x2^{ij}_{st} = int_s^t (x^i_u - x^i_s) dx^j_u.
class Level2Path {
public:
    Level2Path(UniformGrid grid, std::size_t dim, LiftMethod method, std::size_t fine_factor,
               std::vector<double> point_values, std::vector<double> level2_prefix);

    const UniformGrid& grid() const { return grid_; }
    std::size_t dim() const { return dim_; }
    LiftMethod method() const { return method_; }
    std::size_t fine_factor() const { return fine_factor_; }

    /// True when every x2 entry is meaningful. A diagonal-exact lift in
    /// dimension >= 2 carries zero-area placeholders off the diagonal.
    bool offdiagonal_valid() const { return method_ == LiftMethod::fine_grid_approx || dim_ == 1; }

    double x1(std::size_t coord, std::size_t from, std::size_t to) const {
        return pv(to, coord) - pv(from, coord);
    }
    /// Euclidean norm of the level-1 increment over [t_from, t_to].
    double x1_norm(std::size_t from, std::size_t to) const;

    double x2(std::size_t i, std::size_t j, std::size_t from, std::size_t to) const {
        return p2(to, i, j) - p2(from, i, j) - pv(from, i) * (pv(to, j) - pv(from, j));
    }
    /// Frobenius norm of the level-2 increment over [t_from, t_to].
    double x2_norm(std::size_t from, std::size_t to) const;

    /// Rough-path increment size |x1| + |x2|^{1/2} of a grid pair.
    double increment_norm(std::size_t from, std::size_t to) const;

private:
    double pv(std::size_t k, std::size_t i) const { return point_values_[k * dim_ + i]; }
    double p2(std::size_t k, std::size_t i, std::size_t j) const {
        return level2_prefix_[(k * dim_ + i) * dim_ + j];
    }

    UniformGrid grid_;
    std::size_t dim_;
    LiftMethod method_;
    std::size_t fine_factor_;
    std::vector<double> point_values_;  // (n+1) x d, path relative to t_0
    std::vector<double> level2_prefix_; // (n+1) x d x d, x2_{0k}
};

/// Exact geometric lift restricted to the diagonal: per step
/// x2^{ii} = (dx^i)^2 / 2. Complete only for d = 1; for d >= 2 the fBm Levy
/// area has no closed form and off-diagonal entries are not provided.
Level2Path level2_diagonal(const fbm::FbmPath& path);

/// Full lift of the piecewise-linear interpolant read off a finer grid:
/// per fine segment x2 = dx (x) dx / 2, assembled by the Chen relation. The
/// diagonal agrees with level2_diagonal up to rounding.
Level2Path level2_fine_approx(const fbm::FbmPath& fine, std::size_t factor);

/// Max-norm of x2_{st} - x2_{su} - x2_{ut} - dx_{su} (x) dx_{ut} over entries.
double chen_defect(const Level2Path& lift, std::size_t s, std::size_t u, std::size_t t);

/// Largest entrywise violation of the shuffle identity
/// x2^{ij} + x2^{ji} = dx^i dx^j over a grid pair.
double shuffle_defect(const Level2Path& lift, std::size_t from, std::size_t to);

/// Discrete p-variation of scalar values[from..to]:
/// (max over subsequences of sum |consecutive differences|^p)^{1/p},
/// computed exactly by dynamic programming.
double p_variation(std::span<const double> values, double p, std::size_t from, std::size_t to);

/// Core DP shared by all variation norms: maximal sum of inc(i,j)^exponent
/// over subsequences of 0..count-1 (both endpoints included). inc must be the
/// nonnegative increment size between point indices.
double p_variation_sum(std::size_t count, double exponent,
                       const std::function<double(std::size_t, std::size_t)>& inc);

/// Second-chaos process q^{ij}_{st} = sum_{s<=t_k<t} (x2^{ij}_step - dt^{2H}/2 * 1{i=j}),
/// stored as prefix sums so q is additive by construction.
class QProcess {
public:
    QProcess(UniformGrid grid, HurstParam hurst, std::size_t dim, std::vector<double> prefix);

    const UniformGrid& grid() const { return grid_; }
    const HurstParam& hurst() const { return hurst_; }
    std::size_t dim() const { return dim_; }

    double entry(std::size_t i, std::size_t j, std::size_t from, std::size_t to) const {
        return pre(to, i, j) - pre(from, i, j);
    }
    /// Frobenius norm of q over a grid pair.
    double norm(std::size_t from, std::size_t to) const;

private:
    double pre(std::size_t k, std::size_t i, std::size_t j) const {
        return prefix_[(k * dim_ + i) * dim_ + j];
    }

    UniformGrid grid_;
    HurstParam hurst_;
    std::size_t dim_;
    std::vector<double> prefix_; // (n+1) x d x d
};

QProcess q_process(const Level2Path& lift, const HurstParam& hurst);

/// Superadditive two-index function on the discrete simplex, vanishing on the
/// diagonal, used to steer greedy partitions and sewing bounds.
class Control {
public:
    virtual ~Control() = default;
    virtual const UniformGrid& grid() const = 0;
    virtual double variation_exponent() const = 0;
    /// omega(t_from, t_to) for grid indices from <= to.
    virtual double operator()(std::size_t from, std::size_t to) const = 0;
};

/// The control omega(s,t) = ||w||_{p-var}^p + ||q||_{p/2-var}^{p/2}
/// (+ the same term for an optional independent copy q_b), where ||w|| is the
/// rough-path norm ||x1||_{p-var} + ||x2||_{p/2-var}^{1/2}.
///
/// Owns copies of the lift and q, so it stays valid independently of them.
/// Evaluation is lazy: each query runs an exact O(k^2) variation DP whose
/// per-anchor rows are memoized LRU-style, so greedy sweeps and binary
/// searches extend one row instead of recomputing. Queries are serialized by
/// an internal lock; results do not depend on thread count.
class ControlTable : public Control {
public:
    ControlTable(Level2Path lift, QProcess q, std::optional<QProcess> q_b, double p);

    const UniformGrid& grid() const override { return lift_.grid(); }
    double variation_exponent() const override { return p_; }
    double operator()(std::size_t from, std::size_t to) const override;

private:
    struct Row {
        std::size_t anchor = 0;
        // Maximal partition sums from `anchor` to each point covered so far.
        std::vector<double> level1;
        std::vector<double> level2;
        std::vector<double> q;
        std::vector<double> q_b;
    };

    Row& row_for(std::size_t anchor) const;
    void extend(Row& row, std::size_t to) const;

    Level2Path lift_;
    QProcess q_;
    std::optional<QProcess> qb_;
    double p_;

    static constexpr std::size_t kMaxRows = 8;
    mutable std::unique_ptr<std::mutex> lock_;
    mutable std::list<Row> rows_; // front = most recent
};

ControlTable control_omega(const Level2Path& lift, const QProcess& q, double p);
ControlTable control_omega(const Level2Path& lift, const QProcess& q, const QProcess& q_b,
                           double p);

/// Euclidean norm of the Davie remainder of a scheme trajectory over a grid
/// pair: |dy_{st} - sum V0(y_k) dt - V(y_s) dx_{st} - sum_{ij} dV_j V_i(y_s) x2^{ij}_{st}|,
/// the drift integral taken as a left-point sum. Decays like omega(s,t)^{3/p}
/// along solutions in the Davie sense.
double davie_remainder(const schemes::SchemeTrajectory& traj,
                       const schemes::VectorFieldSpec& vf, const Level2Path& lift,
                       std::size_t from, std::size_t to);

/// The remainder as an m-vector, for callers that need its coboundary.
std::vector<double> davie_remainder_vector(const schemes::SchemeTrajectory& traj,
                                           const schemes::VectorFieldSpec& vf,
                                           const Level2Path& lift, std::size_t from,
                                           std::size_t to);

/// CSV with per-step entries: k_from,k_to,i,j,value.
void write_lift_csv(const Level2Path& lift, std::ostream& os);
void write_q_csv(const QProcess& q, std::ostream& os);

} // namespace rsde::roughpath
