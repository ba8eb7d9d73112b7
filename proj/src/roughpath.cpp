#include "rsde/roughpath.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rsde/format.hpp"

namespace rsde::roughpath {

Level2Path::Level2Path(UniformGrid grid, std::size_t dim, LiftMethod method,
                       std::size_t fine_factor, std::vector<double> point_values,
                       std::vector<double> level2_prefix)
    : grid_(grid), dim_(dim), method_(method), fine_factor_(fine_factor),
      point_values_(std::move(point_values)), level2_prefix_(std::move(level2_prefix)) {
    if (point_values_.size() != grid_.points() * dim_ ||
        level2_prefix_.size() != grid_.points() * dim_ * dim_)
        throw std::invalid_argument("Level2Path: prefix arrays do not match grid");
}

double Level2Path::x1_norm(std::size_t from, std::size_t to) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        const double v = x1(i, from, to);
        s += v * v;
    }
    return std::sqrt(s);
}

double Level2Path::x2_norm(std::size_t from, std::size_t to) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < dim_; ++j) {
            const double v = x2(i, j, from, to);
            s += v * v;
        }
    return std::sqrt(s);
}

double Level2Path::increment_norm(std::size_t from, std::size_t to) const {
    return x1_norm(from, to) + std::sqrt(x2_norm(from, to));
}

Level2Path level2_diagonal(const fbm::FbmPath& path) {
    const std::size_t n = path.grid().steps();
    const std::size_t d = path.dim();
    std::vector<double> pv((n + 1) * d);
    std::vector<double> p2((n + 1) * d * d, 0.0);
    for (std::size_t k = 0; k <= n; ++k)
        for (std::size_t i = 0; i < d; ++i) pv[k * d + i] = path.value(i, k) - path.value(i, 0);
    for (std::size_t k = 0; k < n; ++k) {
        // P_{k+1} = P_k + step + x_k (x) dx_k, step diagonal = dx^2/2.
        for (std::size_t i = 0; i < d; ++i) {
            const double dxi = pv[(k + 1) * d + i] - pv[k * d + i];
            for (std::size_t j = 0; j < d; ++j) {
                const double dxj = pv[(k + 1) * d + j] - pv[k * d + j];
                const double step = (i == j) ? 0.5 * dxi * dxi : 0.0;
                p2[((k + 1) * d + i) * d + j] =
                    p2[(k * d + i) * d + j] + step + pv[k * d + i] * dxj;
            }
        }
    }
    return Level2Path(path.grid(), d, LiftMethod::diagonal_exact, 1, std::move(pv),
                      std::move(p2));
}

Level2Path level2_fine_approx(const fbm::FbmPath& fine, std::size_t factor) {
    if (factor < 2) throw std::domain_error("level2_fine_approx: factor must be >= 2");
    if (fine.grid().steps() % factor != 0)
        throw std::domain_error("level2_fine_approx: factor must divide the fine step count");
    const std::size_t d = fine.dim();
    const std::size_t n_fine = fine.grid().steps();
    const std::size_t n = n_fine / factor;
    UniformGrid coarse(fine.grid().horizon(), n);

    std::vector<double> pv((n + 1) * d);
    std::vector<double> p2((n + 1) * d * d, 0.0);
    for (std::size_t k = 0; k <= n; ++k)
        for (std::size_t i = 0; i < d; ++i)
            pv[k * d + i] = fine.value(i, k * factor) - fine.value(i, 0);

    // Running fine-grid prefix of the piecewise-linear lift; snapshot at the
    // coarse points. Per fine segment the integral contributes dx (x) dx / 2.
    std::vector<double> run(d * d, 0.0);
    for (std::size_t l = 0; l < n_fine; ++l) {
        for (std::size_t i = 0; i < d; ++i) {
            const double dxi = fine.value(i, l + 1) - fine.value(i, l);
            const double xi = fine.value(i, l) - fine.value(i, 0);
            for (std::size_t j = 0; j < d; ++j) {
                const double dxj = fine.value(j, l + 1) - fine.value(j, l);
                run[i * d + j] += 0.5 * dxi * dxj + xi * dxj;
            }
        }
        if ((l + 1) % factor == 0) {
            const std::size_t k = (l + 1) / factor;
            std::copy(run.begin(), run.end(), p2.begin() + k * d * d);
        }
    }
    return Level2Path(coarse, d, LiftMethod::fine_grid_approx, factor, std::move(pv),
                      std::move(p2));
}

double chen_defect(const Level2Path& lift, std::size_t s, std::size_t u, std::size_t t) {
    if (!(s <= u && u <= t)) throw std::domain_error("chen_defect: need s <= u <= t");
    const std::size_t d = lift.dim();
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double defect = lift.x2(i, j, s, t) - lift.x2(i, j, s, u) -
                                  lift.x2(i, j, u, t) - lift.x1(i, s, u) * lift.x1(j, u, t);
            worst = std::max(worst, std::abs(defect));
        }
    return worst;
}

double shuffle_defect(const Level2Path& lift, std::size_t from, std::size_t to) {
    const std::size_t d = lift.dim();
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double lhs = lift.x2(i, j, from, to) + lift.x2(j, i, from, to);
            const double rhs = lift.x1(i, from, to) * lift.x1(j, from, to);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    return worst;
}

double p_variation_sum(std::size_t count, double exponent,
                       const std::function<double(std::size_t, std::size_t)>& inc) {
    if (count <= 1) return 0.0;
    std::vector<double> best(count, 0.0);
    for (std::size_t j = 1; j < count; ++j) {
        double b = 0.0;
        for (std::size_t i = 0; i < j; ++i)
            b = std::max(b, best[i] + std::pow(inc(i, j), exponent));
        best[j] = b;
    }
    return best[count - 1];
}

double p_variation(std::span<const double> values, double p, std::size_t from, std::size_t to) {
    if (p < 1.0) throw std::domain_error("p_variation: p must be >= 1");
    if (from > to || to >= values.size())
        throw std::domain_error("p_variation: index range out of bounds");
    const double sum = p_variation_sum(to - from + 1, p, [&](std::size_t i, std::size_t j) {
        return std::abs(values[from + j] - values[from + i]);
    });
    return std::pow(sum, 1.0 / p);
}

QProcess::QProcess(UniformGrid grid, HurstParam hurst, std::size_t dim,
                   std::vector<double> prefix)
    : grid_(grid), hurst_(hurst), dim_(dim), prefix_(std::move(prefix)) {
    if (prefix_.size() != grid_.points() * dim_ * dim_)
        throw std::invalid_argument("QProcess: prefix does not match grid");
}

double QProcess::norm(std::size_t from, std::size_t to) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < dim_; ++j) {
            const double v = entry(i, j, from, to);
            s += v * v;
        }
    return std::sqrt(s);
}

QProcess q_process(const Level2Path& lift, const HurstParam& hurst) {
    const std::size_t n = lift.grid().steps();
    const std::size_t d = lift.dim();
    const double half_dt2h = 0.5 * std::pow(lift.grid().dt(), hurst.two_h());
    std::vector<double> prefix((n + 1) * d * d, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double step = lift.x2(i, j, k, k + 1) - (i == j ? half_dt2h : 0.0);
                prefix[((k + 1) * d + i) * d + j] = prefix[(k * d + i) * d + j] + step;
            }
    return QProcess(lift.grid(), hurst, d, std::move(prefix));
}

ControlTable::ControlTable(Level2Path lift, QProcess q, std::optional<QProcess> q_b, double p)
    : lift_(std::move(lift)), q_(std::move(q)), qb_(std::move(q_b)), p_(p),
      lock_(std::make_unique<std::mutex>()) {
    const double h = q_.hurst().value();
    if (!(p > 1.0 / h) || !(p < 3.0))
        throw std::domain_error("ControlTable: need 1/H < p < 3");
    if (!lift_.grid().same_as(q_.grid()))
        throw std::invalid_argument("ControlTable: lift and q live on different grids");
    if (qb_ && !qb_->grid().same_as(q_.grid()))
        throw std::invalid_argument("ControlTable: q_b lives on a different grid");
}

ControlTable::Row& ControlTable::row_for(std::size_t anchor) const {
    for (auto it = rows_.begin(); it != rows_.end(); ++it) {
        if (it->anchor == anchor) {
            rows_.splice(rows_.begin(), rows_, it);
            return rows_.front();
        }
    }
    if (rows_.size() >= kMaxRows) rows_.pop_back();
    Row row;
    row.anchor = anchor;
    row.level1 = {0.0};
    row.level2 = {0.0};
    row.q = {0.0};
    if (qb_) row.q_b = {0.0};
    rows_.push_front(std::move(row));
    return rows_.front();
}

void ControlTable::extend(Row& row, std::size_t to) const {
    const std::size_t a = row.anchor;
    const double half_p = 0.5 * p_;
    for (std::size_t j = a + row.level1.size(); j <= to; ++j) {
        double b1 = 0.0, b2 = 0.0, bq = 0.0, bqb = 0.0;
        for (std::size_t i = a; i < j; ++i) {
            const std::size_t r = i - a;
            b1 = std::max(b1, row.level1[r] + std::pow(lift_.x1_norm(i, j), p_));
            b2 = std::max(b2, row.level2[r] + std::pow(lift_.x2_norm(i, j), half_p));
            bq = std::max(bq, row.q[r] + std::pow(q_.norm(i, j), half_p));
            if (qb_) bqb = std::max(bqb, row.q_b[r] + std::pow(qb_->norm(i, j), half_p));
        }
        row.level1.push_back(b1);
        row.level2.push_back(b2);
        row.q.push_back(bq);
        if (qb_) row.q_b.push_back(bqb);
    }
}

double ControlTable::operator()(std::size_t from, std::size_t to) const {
    if (from > to || to > grid().steps())
        throw std::domain_error("ControlTable: index range out of bounds");
    if (from == to) return 0.0;
    std::lock_guard<std::mutex> guard(*lock_);
    Row& row = row_for(from);
    if (row.level1.size() <= to - from) extend(row, to);
    const std::size_t r = to - from;
    // ||S2(w)||^p with ||S2(w)|| = A^{1/p} + B^{1/p}: reverse Minkowski keeps
    // this superadditive because A and B are superadditive partition sums.
    const double rough = std::pow(std::pow(row.level1[r], 1.0 / p_) +
                                      std::pow(row.level2[r], 1.0 / p_),
                                  p_);
    double omega = rough + row.q[r];
    if (qb_) omega += row.q_b[r];
    return omega;
}

ControlTable control_omega(const Level2Path& lift, const QProcess& q, double p) {
    return ControlTable(lift, q, std::nullopt, p);
}

ControlTable control_omega(const Level2Path& lift, const QProcess& q, const QProcess& q_b,
                           double p) {
    return ControlTable(lift, q, q_b, p);
}

std::vector<double> davie_remainder_vector(const schemes::SchemeTrajectory& traj,
                                           const schemes::VectorFieldSpec& vf,
                                           const Level2Path& lift, std::size_t from,
                                           std::size_t to) {
    if (!traj.grid().same_as(lift.grid()))
        throw std::invalid_argument("davie_remainder: trajectory and lift grids differ");
    if (from > to || to > traj.grid().steps())
        throw std::domain_error("davie_remainder: index range out of bounds");
    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    const auto ys = traj.state(from);
    const auto yt = traj.state(to);
    std::vector<double> r(m);
    for (std::size_t k = 0; k < m; ++k) r[k] = yt[k] - ys[k];

    // Left-point drift sum.
    for (std::size_t k = from; k < to; ++k) {
        const auto v0 = vf.eval_drift(traj.state(k));
        for (std::size_t l = 0; l < m; ++l) r[l] -= v0[l] * traj.grid().dt();
    }

    const schemes::Matrix v = vf.eval_diffusion(ys);
    for (std::size_t l = 0; l < m; ++l)
        for (std::size_t j = 0; j < d; ++j) r[l] -= v(l, j) * lift.x1(j, from, to);

    // The coefficient of x2^{ij} = int dx^i dx^j in the Taylor expansion is
    // dV_j V_i.
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const auto coef = schemes::contract_dv(vf, ys, j, i);
            const double x2 = lift.x2(i, j, from, to);
            for (std::size_t l = 0; l < m; ++l) r[l] -= coef[l] * x2;
        }
    return r;
}

double davie_remainder(const schemes::SchemeTrajectory& traj,
                       const schemes::VectorFieldSpec& vf, const Level2Path& lift,
                       std::size_t from, std::size_t to) {
    const auto r = davie_remainder_vector(traj, vf, lift, from, to);
    double s = 0.0;
    for (double x : r) s += x * x;
    return std::sqrt(s);
}

void write_lift_csv(const Level2Path& lift, std::ostream& os) {
    os << "k_from,k_to,i,j,value\n";
    const std::size_t d = lift.dim();
    for (std::size_t k = 0; k < lift.grid().steps(); ++k) {
        for (std::size_t i = 0; i < d; ++i)
            os << k << "," << k + 1 << "," << i + 1 << ",0," << fmt17(lift.x1(i, k, k + 1))
               << "\n";
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                os << k << "," << k + 1 << "," << i + 1 << "," << j + 1 << ","
                   << fmt17(lift.x2(i, j, k, k + 1)) << "\n";
    }
}

void write_q_csv(const QProcess& q, std::ostream& os) {
    os << "k_from,k_to,i,j,value\n";
    const std::size_t d = q.dim();
    for (std::size_t k = 0; k < q.grid().steps(); ++k)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                os << k << "," << k + 1 << "," << i + 1 << "," << j + 1 << ","
                   << fmt17(q.entry(i, j, k, k + 1)) << "\n";
}

} // namespace rsde::roughpath
