#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsde/fbm.hpp"
#include "rsde/grid.hpp"

namespace rsde::schemes {

using State = std::vector<double>;

/// Dense row-major matrix, sized for the small state/noise dimensions the
/// schemes work with.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

/// A vector field specification: drift V0, diffusion V and its analytic
/// derivatives, evaluable at any state.
///
/// Layouts: diffusion fills out[k*d + j] = V^k_j; the Jacobian fills
/// out[(k*d + j)*m + l] = d_l V^k_j; the optional Hessian appends one more
/// state index.
struct VectorFieldSpec {
    enum class Smoothness { c2, c3, c4 };

    std::string name;
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    Smoothness smoothness = Smoothness::c4;

    std::function<void(std::span<const double>, std::span<double>)> drift;
    std::function<void(std::span<const double>, std::span<double>)> diffusion;
    std::function<void(std::span<const double>, std::span<double>)> diffusion_jacobian;
    std::function<void(std::span<const double>, std::span<double>)> diffusion_hessian; // optional

    State eval_drift(std::span<const double> y) const;
    Matrix eval_diffusion(std::span<const double> y) const;
    std::vector<double> eval_jacobian(std::span<const double> y) const;
    bool has_jacobian() const { return static_cast<bool>(diffusion_jacobian); }
};

/// Built-in fields: "linear1d" (dy = y dx, exact solution available),
/// "sine1d" (V = sin), "rot2d" (rotation matrix by the second coordinate),
/// "poly2d" (bounded rational field with drift).
const VectorFieldSpec& field_registry(const std::string& name);
std::vector<std::string> field_names();

/// Largest relative mismatch between the analytic Jacobian and a central
/// finite difference of V over `count` pseudo-random states.
double jacobian_fd_mismatch(const VectorFieldSpec& vf, std::size_t count, std::uint64_t seed);

/// Columns dVj Vj(y): out(k, j) = sum_l d_l V^k_j(y) V^l_j(y), the contraction
/// that replaces the level-2 integral in the modified scheme.
Matrix contract_dvv(const VectorFieldSpec& vf, std::span<const double> y);

/// General contraction dV_a V_b(y) = (sum_l d_l V^k_a V^l_b; k).
State contract_dv(const VectorFieldSpec& vf, std::span<const double> y, std::size_t a,
                  std::size_t b);

/// One step of the modified Euler scheme:
/// y + V0(y) dt + V(y) dx + (1/2) sum_j dVj Vj(y) dt^{2H}.
State euler_step(const VectorFieldSpec& vf, std::span<const double> y,
                 std::span<const double> dx, double dt, const HurstParam& hurst);

class divergence_error : public std::runtime_error {
public:
    divergence_error(std::size_t step, double norm)
        : std::runtime_error("modified Euler diverged at step " + std::to_string(step) +
                             " (|y| = " + std::to_string(norm) + ")"),
          step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class ill_conditioning_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// States of one scheme run over a grid. Stores a copy of the driving
/// increments so a step can be replayed bit-exactly.
class SchemeTrajectory {
public:
    SchemeTrajectory(UniformGrid grid, HurstParam hurst, std::size_t state_dim,
                     std::size_t noise_dim, std::vector<double> states,
                     std::vector<double> increments);

    const UniformGrid& grid() const { return grid_; }
    const HurstParam& hurst() const { return hurst_; }
    std::size_t state_dim() const { return state_dim_; }
    std::size_t noise_dim() const { return noise_dim_; }

    std::span<const double> state(std::size_t k) const {
        return {states_.data() + k * state_dim_, state_dim_};
    }
    std::span<const double> increment(std::size_t k) const {
        return {increments_.data() + k * noise_dim_, noise_dim_};
    }

private:
    UniformGrid grid_;
    HurstParam hurst_;
    std::size_t state_dim_, noise_dim_;
    std::vector<double> states_;     // (n+1) x m
    std::vector<double> increments_; // n x d
};

/// Iterate euler_step along the driving path from initial state a.
/// Throws divergence_error when |y| exceeds the 1e12 overflow guard.
SchemeTrajectory run_modified_euler(const VectorFieldSpec& vf, const fbm::FbmPath& path,
                                    std::span<const double> initial);

/// Interpolated scheme value at time t in [0, T]:
/// y_k + V0(y_k)(t - t_k) + V(y_k) dx_{t_k t} + (1/2) sum_j dVjVj(y_k)(t - t_k)^{2H}.
/// The driving value x_t is read from `fine`, a refinement of the trajectory's
/// driving path, so t must be one of the fine grid points; grid points of the
/// trajectory return the stored state bit-exactly.
State interpolate(const SchemeTrajectory& traj, const VectorFieldSpec& vf,
                  const fbm::FbmPath& fine, double t);

struct LinearizedPair {
    std::vector<Matrix> gamma;  // per grid point, m x m
    std::vector<Matrix> lambda; // inverses
    double worst_residual = 0.0; // max over steps of ||Lambda Gamma - Id||
};

/// Gamma solves the linearized system dGamma = Vtilde(s) Gamma dx advanced by
/// the matrix analogue of the modified Euler step; Lambda is its per-step
/// inverse. Vtilde averages dV along the segment between the reference and
/// scheme states with a Gauss-Legendre rule of the given order.
LinearizedPair solve_gamma_lambda(const VectorFieldSpec& vf, const SchemeTrajectory& coarse,
                                  const SchemeTrajectory& reference, std::size_t quad_order = 8,
                                  double residual_tolerance = 1e-6,
                                  double condition_guard = 1e8);

/// Closed-form solution a * exp(x_T) of the scalar geometric equation
/// dy = y dx driven by a geometric rough path.
double exact_linear_solution(double x_terminal, double initial);

/// Trajectory CSV: k,t_k,y1,...,ym.
void write_csv(const SchemeTrajectory& traj, std::ostream& os);

/// Gauss-Legendre nodes/weights on [0,1].
void gauss_legendre_01(std::size_t order, std::vector<double>& nodes,
                       std::vector<double>& weights);

} // namespace rsde::schemes
