#include "rsde/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>

#include "rsde/format.hpp"
#include "rsde/rng.hpp"

namespace rsde::schemes {

namespace {

constexpr double kOverflowGuard = 1e12;

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::invalid_argument(std::string("euler_step: non-finite ") + what);
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Gauss-Jordan inverse with partial pivoting plus a 1-norm condition estimate.
Matrix invert(const Matrix& in, double* condition) {
    const std::size_t n = in.rows;
    Matrix a = in;
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (a(pivot, col) == 0.0)
            throw ill_conditioning_error("matrix inverse: singular pivot");
        if (pivot != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a.a[pivot * n + c], a.a[col * n + c]);
                std::swap(inv.a[pivot * n + c], inv.a[col * n + c]);
            }
        const double piv = a(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            a.a[col * n + c] /= piv;
            inv.a[col * n + c] /= piv;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                a.a[r * n + c] -= f * a.a[col * n + c];
                inv.a[r * n + c] -= f * inv.a[col * n + c];
            }
        }
    }
    if (condition) {
        auto one_norm = [n](const Matrix& m) {
            double best = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                double s = 0.0;
                for (std::size_t r = 0; r < n; ++r) s += std::abs(m(r, c));
                best = std::max(best, s);
            }
            return best;
        };
        *condition = one_norm(in) * one_norm(inv);
    }
    return inv;
}

double fro_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

// ---- built-in vector fields -------------------------------------------------

VectorFieldSpec make_linear1d() {
    VectorFieldSpec vf;
    vf.name = "linear1d";
    vf.state_dim = vf.noise_dim = 1;
    vf.smoothness = VectorFieldSpec::Smoothness::c4;
    vf.drift = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    vf.diffusion = [](std::span<const double> y, std::span<double> out) { out[0] = y[0]; };
    vf.diffusion_jacobian = [](std::span<const double>, std::span<double> out) { out[0] = 1.0; };
    vf.diffusion_hessian = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    return vf;
}

VectorFieldSpec make_sine1d() {
    VectorFieldSpec vf;
    vf.name = "sine1d";
    vf.state_dim = vf.noise_dim = 1;
    vf.smoothness = VectorFieldSpec::Smoothness::c4;
    vf.drift = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    vf.diffusion = [](std::span<const double> y, std::span<double> out) {
        out[0] = std::sin(y[0]);
    };
    vf.diffusion_jacobian = [](std::span<const double> y, std::span<double> out) {
        out[0] = std::cos(y[0]);
    };
    vf.diffusion_hessian = [](std::span<const double> y, std::span<double> out) {
        out[0] = -std::sin(y[0]);
    };
    return vf;
}

VectorFieldSpec make_rot2d() {
    VectorFieldSpec vf;
    vf.name = "rot2d";
    vf.state_dim = vf.noise_dim = 2;
    vf.smoothness = VectorFieldSpec::Smoothness::c4;
    vf.drift = [](std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
        out[1] = 0.0;
    };
    // Rotation by the angle y2: columns stay orthonormal, all derivatives bounded.
    vf.diffusion = [](std::span<const double> y, std::span<double> out) {
        const double c = std::cos(y[1]), s = std::sin(y[1]);
        out[0 * 2 + 0] = c;  // V^1_1
        out[0 * 2 + 1] = -s; // V^1_2
        out[1 * 2 + 0] = s;  // V^2_1
        out[1 * 2 + 1] = c;  // V^2_2
    };
    vf.diffusion_jacobian = [](std::span<const double> y, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const double c = std::cos(y[1]), s = std::sin(y[1]);
        const std::size_t m = 2, d = 2;
        auto at = [&](std::size_t k, std::size_t j, std::size_t l) -> double& {
            return out[(k * d + j) * m + l];
        };
        at(0, 0, 1) = -s;
        at(0, 1, 1) = -c;
        at(1, 0, 1) = c;
        at(1, 1, 1) = -s;
    };
    return vf;
}

VectorFieldSpec make_poly2d() {
    VectorFieldSpec vf;
    vf.name = "poly2d";
    vf.state_dim = vf.noise_dim = 2;
    vf.smoothness = VectorFieldSpec::Smoothness::c4;
    // f and g are bounded rational bumps with bounded derivatives of all orders.
    auto f = [](double x) { return x / (1.0 + x * x); };
    auto fp = [](double x) {
        const double u = 1.0 + x * x;
        return (1.0 - x * x) / (u * u);
    };
    auto g = [](double x) { return 1.0 / (1.0 + x * x); };
    auto gp = [](double x) {
        const double u = 1.0 + x * x;
        return -2.0 * x / (u * u);
    };
    vf.drift = [g, f](std::span<const double> y, std::span<double> out) {
        out[0] = 0.2 * g(y[1]);
        out[1] = -0.2 * f(y[0]);
    };
    vf.diffusion = [f, g](std::span<const double> y, std::span<double> out) {
        out[0 * 2 + 0] = f(y[0]); // V^1_1
        out[0 * 2 + 1] = g(y[0]); // V^1_2
        out[1 * 2 + 0] = g(y[1]); // V^2_1
        out[1 * 2 + 1] = f(y[1]); // V^2_2
    };
    vf.diffusion_jacobian = [fp, gp](std::span<const double> y, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t m = 2, d = 2;
        auto at = [&](std::size_t k, std::size_t j, std::size_t l) -> double& {
            return out[(k * d + j) * m + l];
        };
        at(0, 0, 0) = fp(y[0]);
        at(0, 1, 0) = gp(y[0]);
        at(1, 0, 1) = gp(y[1]);
        at(1, 1, 1) = fp(y[1]);
    };
    return vf;
}

} // namespace

State VectorFieldSpec::eval_drift(std::span<const double> y) const {
    State out(state_dim, 0.0);
    if (drift) drift(y, out);
    return out;
}

Matrix VectorFieldSpec::eval_diffusion(std::span<const double> y) const {
    Matrix out(state_dim, noise_dim);
    diffusion(y, out.a);
    return out;
}

std::vector<double> VectorFieldSpec::eval_jacobian(std::span<const double> y) const {
    if (!diffusion_jacobian)
        throw std::logic_error("VectorFieldSpec '" + name + "': analytic dV not available");
    std::vector<double> out(state_dim * noise_dim * state_dim, 0.0);
    diffusion_jacobian(y, out);
    return out;
}

const VectorFieldSpec& field_registry(const std::string& name) {
    static const std::map<std::string, VectorFieldSpec> fields = [] {
        std::map<std::string, VectorFieldSpec> m;
        for (auto&& vf : {make_linear1d(), make_sine1d(), make_rot2d(), make_poly2d()})
            m.emplace(vf.name, vf);
        return m;
    }();
    auto it = fields.find(name);
    if (it == fields.end()) {
        std::string known;
        for (const auto& [k, v] : fields) known += (known.empty() ? "" : ", ") + k;
        throw std::invalid_argument("unknown vector field '" + name + "' (registry: " + known +
                                    ")");
    }
    return it->second;
}

std::vector<std::string> field_names() {
    return {"linear1d", "poly2d", "rot2d", "sine1d"};
}

double jacobian_fd_mismatch(const VectorFieldSpec& vf, std::size_t count, std::uint64_t seed) {
    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    GaussianStream gauss(seed, 0, 0xFDu);
    const double h = 1e-5;
    double worst = 0.0;
    std::uint64_t idx = 0;
    for (std::size_t c = 0; c < count; ++c) {
        State y(m);
        for (std::size_t l = 0; l < m; ++l) y[l] = gauss(idx++);
        const auto jac = vf.eval_jacobian(y);
        for (std::size_t l = 0; l < m; ++l) {
            State yp = y, ym = y;
            yp[l] += h;
            ym[l] -= h;
            const Matrix vp = vf.eval_diffusion(yp);
            const Matrix vm = vf.eval_diffusion(ym);
            for (std::size_t k = 0; k < m; ++k)
                for (std::size_t j = 0; j < d; ++j) {
                    const double fd = (vp(k, j) - vm(k, j)) / (2.0 * h);
                    const double an = jac[(k * d + j) * m + l];
                    const double err = std::abs(fd - an) / std::max(1.0, std::abs(an));
                    worst = std::max(worst, err);
                }
        }
    }
    return worst;
}

Matrix contract_dvv(const VectorFieldSpec& vf, std::span<const double> y) {
    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    const auto jac = vf.eval_jacobian(y);
    const Matrix v = vf.eval_diffusion(y);
    Matrix out(m, d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < m; ++k) {
            double s = 0.0;
            for (std::size_t l = 0; l < m; ++l) s += jac[(k * d + j) * m + l] * v(l, j);
            out(k, j) = s;
        }
    return out;
}

State contract_dv(const VectorFieldSpec& vf, std::span<const double> y, std::size_t a,
                  std::size_t b) {
    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    if (a >= d || b >= d) throw std::invalid_argument("contract_dv: noise index out of range");
    const auto jac = vf.eval_jacobian(y);
    const Matrix v = vf.eval_diffusion(y);
    State out(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        double s = 0.0;
        for (std::size_t l = 0; l < m; ++l) s += jac[(k * d + a) * m + l] * v(l, b);
        out[k] = s;
    }
    return out;
}

State euler_step(const VectorFieldSpec& vf, std::span<const double> y,
                 std::span<const double> dx, double dt, const HurstParam& hurst) {
    if (!(dt > 0.0)) throw std::domain_error("euler_step: dt must be positive");
    require_finite(y, "state");
    require_finite(dx, "increment");
    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    const State v0 = vf.eval_drift(y);
    const Matrix v = vf.eval_diffusion(y);
    const Matrix corr = contract_dvv(vf, y);
    const double dt2h = std::pow(dt, hurst.two_h());
    State out(m);
    for (std::size_t k = 0; k < m; ++k) {
        double s = y[k] + v0[k] * dt;
        for (std::size_t j = 0; j < d; ++j) s += v(k, j) * dx[j];
        for (std::size_t j = 0; j < d; ++j) s += 0.5 * corr(k, j) * dt2h;
        out[k] = s;
    }
    return out;
}

SchemeTrajectory::SchemeTrajectory(UniformGrid grid, HurstParam hurst, std::size_t state_dim,
                                   std::size_t noise_dim, std::vector<double> states,
                                   std::vector<double> increments)
    : grid_(grid), hurst_(hurst), state_dim_(state_dim), noise_dim_(noise_dim),
      states_(std::move(states)), increments_(std::move(increments)) {
    if (states_.size() != grid_.points() * state_dim_ ||
        increments_.size() != grid_.steps() * noise_dim_)
        throw std::invalid_argument("SchemeTrajectory: array sizes do not match grid");
}

SchemeTrajectory run_modified_euler(const VectorFieldSpec& vf, const fbm::FbmPath& path,
                                    std::span<const double> initial) {
    if (path.dim() != vf.noise_dim)
        throw std::invalid_argument("run_modified_euler: path dimension does not match field");
    if (initial.size() != vf.state_dim)
        throw std::invalid_argument("run_modified_euler: initial state has wrong dimension");
    const std::size_t n = path.grid().steps();
    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    std::vector<double> states((n + 1) * m);
    std::vector<double> incs(n * d);
    std::copy(initial.begin(), initial.end(), states.begin());
    State y(initial.begin(), initial.end());
    State dx(d);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            dx[j] = path.increment(j, k);
            incs[k * d + j] = dx[j];
        }
        y = euler_step(vf, y, dx, path.grid().dt(), path.hurst());
        const double norm = norm2(y);
        if (!(norm < kOverflowGuard)) throw divergence_error(k, norm);
        std::copy(y.begin(), y.end(), states.begin() + (k + 1) * m);
    }
    return SchemeTrajectory(path.grid(), path.hurst(), m, d, std::move(states),
                            std::move(incs));
}

State interpolate(const SchemeTrajectory& traj, const VectorFieldSpec& vf,
                  const fbm::FbmPath& fine, double t) {
    const UniformGrid& grid = traj.grid();
    if (t < 0.0 || t > grid.horizon() * (1.0 + 1e-14))
        throw std::domain_error("interpolate: t outside [0, T]");
    if (fine.grid().steps() % grid.steps() != 0)
        throw std::invalid_argument("interpolate: fine path is not a refinement of the grid");
    const std::size_t factor = fine.grid().steps() / grid.steps();

    // Exact grid points return the stored state bit-exactly.
    const double pos = t / grid.dt();
    const auto nearest = static_cast<std::size_t>(std::llround(pos));
    if (nearest <= grid.steps() && std::abs(pos - static_cast<double>(nearest)) < 1e-9)
        return State(traj.state(nearest).begin(), traj.state(nearest).end());

    const std::size_t k = grid.eta_index(t);
    const double tk = grid.point(k);

    // Locate t on the fine grid.
    const double fpos = t / fine.grid().dt();
    const auto fidx = static_cast<std::size_t>(std::llround(fpos));
    if (fidx > fine.grid().steps() || std::abs(fpos - static_cast<double>(fidx)) > 1e-9)
        throw std::domain_error("interpolate: t is not a fine grid point");

    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    const auto y = traj.state(k);
    const State v0 = vf.eval_drift(y);
    const Matrix v = vf.eval_diffusion(y);
    const Matrix corr = contract_dvv(vf, y);
    const double pow2h = std::pow(t - tk, traj.hurst().two_h());
    State out(m);
    for (std::size_t r = 0; r < m; ++r) {
        double s = y[r] + v0[r] * (t - tk);
        for (std::size_t j = 0; j < d; ++j)
            s += v(r, j) * (fine.value(j, fidx) - fine.value(j, k * factor));
        for (std::size_t j = 0; j < d; ++j) s += 0.5 * corr(r, j) * pow2h;
        out[r] = s;
    }
    return out;
}

void gauss_legendre_01(std::size_t order, std::vector<double>& nodes,
                       std::vector<double>& weights) {
    if (order == 0) throw std::invalid_argument("gauss_legendre_01: order must be positive");
    nodes.assign(order, 0.0);
    weights.assign(order, 0.0);
    const std::size_t n = order;
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        // Newton iteration on P_n from the Chebyshev initial guess.
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            if (n == 1) p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
}

LinearizedPair solve_gamma_lambda(const VectorFieldSpec& vf, const SchemeTrajectory& coarse,
                                  const SchemeTrajectory& reference, std::size_t quad_order,
                                  double residual_tolerance, double condition_guard) {
    const std::size_t n = coarse.grid().steps();
    const std::size_t m = vf.state_dim, d = vf.noise_dim;
    if (reference.grid().steps() % n != 0)
        throw std::invalid_argument("solve_gamma_lambda: reference grid is not a refinement");
    if (reference.state_dim() != m || coarse.state_dim() != m)
        throw std::invalid_argument("solve_gamma_lambda: state dimension mismatch");
    const std::size_t factor = reference.grid().steps() / n;

    std::vector<double> nodes, weights;
    gauss_legendre_01(quad_order, nodes, weights);

    LinearizedPair out;
    out.gamma.reserve(n + 1);
    out.lambda.reserve(n + 1);
    out.gamma.push_back(Matrix::identity(m));
    out.lambda.push_back(Matrix::identity(m));

    const double dt2h = std::pow(coarse.grid().dt(), coarse.hurst().two_h());
    State mix(m);
    for (std::size_t k = 0; k < n; ++k) {
        const auto yn = coarse.state(k);
        const auto yref = reference.state(k * factor);

        // A_j(k): the theta-averaged Jacobian of V_j along the segment
        // between scheme and reference states.
        std::vector<Matrix> avg(d, Matrix(m, m));
        for (std::size_t qidx = 0; qidx < quad_order; ++qidx) {
            const double th = nodes[qidx], w = weights[qidx];
            for (std::size_t l = 0; l < m; ++l) mix[l] = th * yref[l] + (1.0 - th) * yn[l];
            const auto jac = vf.eval_jacobian(mix);
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < m; ++c)
                        avg[j](r, c) += w * jac[(r * d + j) * m + c];
        }

        const Matrix& g = out.gamma.back();
        Matrix next = g;
        const auto dx = coarse.increment(k);
        for (std::size_t j = 0; j < d; ++j) {
            // A_j Gamma dx^j  +  (1/2) A_j A_j Gamma dt^{2H}
            Matrix ag(m, m);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) {
                    double s = 0.0;
                    for (std::size_t l = 0; l < m; ++l) s += avg[j](r, l) * g(l, c);
                    ag(r, c) = s;
                }
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) {
                    double s2 = 0.0;
                    for (std::size_t l = 0; l < m; ++l) s2 += avg[j](r, l) * ag(l, c);
                    next(r, c) += ag(r, c) * dx[j] + 0.5 * s2 * dt2h;
                }
        }

        double condition = 0.0;
        Matrix inv = invert(next, &condition);
        if (condition > condition_guard)
            throw ill_conditioning_error("solve_gamma_lambda: condition number " +
                                         std::to_string(condition) + " at step " +
                                         std::to_string(k + 1));
        // Residual ||Lambda Gamma - Id||.
        Matrix res(m, m);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < m; ++c) {
                double s = 0.0;
                for (std::size_t l = 0; l < m; ++l) s += inv(r, l) * next(l, c);
                res(r, c) = s - (r == c ? 1.0 : 0.0);
            }
        out.worst_residual = std::max(out.worst_residual, fro_norm(res));
        if (out.worst_residual > residual_tolerance)
            throw ill_conditioning_error("solve_gamma_lambda: inverse residual " +
                                         std::to_string(out.worst_residual) +
                                         " exceeds tolerance at step " + std::to_string(k + 1));
        out.gamma.push_back(std::move(next));
        out.lambda.push_back(std::move(inv));
    }
    return out;
}

double exact_linear_solution(double x_terminal, double initial) {
    return initial * std::exp(x_terminal);
}

void write_csv(const SchemeTrajectory& traj, std::ostream& os) {
    os << "k,t_k";
    for (std::size_t i = 1; i <= traj.state_dim(); ++i) os << ",y" << i;
    os << "\n";
    for (std::size_t k = 0; k < traj.grid().points(); ++k) {
        os << k << "," << fmt17(traj.grid().point(k));
        for (double v : traj.state(k)) os << "," << fmt17(v);
        os << "\n";
    }
}

} // namespace rsde::schemes
