#include "rsde/fbm.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <ostream>

#include "rsde/format.hpp"

namespace rsde::fbm {

namespace {

double pow2h(double base, double two_h) { return std::pow(base, two_h); }

std::mutex g_planner_mutex; // FFTW planner is not thread-safe

/// Thread-local FFT workspace per transform size. Plan creation is serialized;
/// execution runs on thread-owned buffers.
class FftEngine {
public:
    static FftEngine& local() {
        thread_local FftEngine engine;
        return engine;
    }

    /// In-place complex DFT (forward, unnormalized) of buf[0..m).
    void forward(std::complex<double>* buf, std::size_t m) {
        Plan& plan = plan_for(m);
        std::copy(buf, buf + m, reinterpret_cast<std::complex<double>*>(plan.in));
        fftw_execute(plan.plan);
        std::copy(reinterpret_cast<std::complex<double>*>(plan.out),
                  reinterpret_cast<std::complex<double>*>(plan.out) + m, buf);
    }

private:
    struct Plan {
        fftw_plan plan = nullptr;
        fftw_complex* in = nullptr;
        fftw_complex* out = nullptr;
    };

    Plan& plan_for(std::size_t m) {
        auto it = plans_.find(m);
        if (it != plans_.end()) return it->second;
        std::lock_guard<std::mutex> lock(g_planner_mutex);
        Plan p;
        p.in = fftw_alloc_complex(m);
        p.out = fftw_alloc_complex(m);
        p.plan = fftw_plan_dft_1d(static_cast<int>(m), p.in, p.out, FFTW_FORWARD, FFTW_ESTIMATE);
        return plans_.emplace(m, p).first->second;
    }

    ~FftEngine() {
        std::lock_guard<std::mutex> lock(g_planner_mutex);
        for (auto& [m, p] : plans_) {
            fftw_destroy_plan(p.plan);
            fftw_free(p.in);
            fftw_free(p.out);
        }
    }

    std::map<std::size_t, Plan> plans_;
};

constexpr double kRelEigTolerance = 1e-12;

std::vector<double> sample_circulant(std::span<const double> acvf, const GaussianStream& gauss,
                                     bool* embedding_ok) {
    const std::size_t n = acvf.size() - 1;
    const std::size_t m = 2 * n;
    auto lambda = detail::circulant_eigenvalues(acvf);
    const double lam_max = *std::max_element(lambda.begin(), lambda.end());
    const double lam_min = *std::min_element(lambda.begin(), lambda.end());
    if (lam_min < -kRelEigTolerance * std::max(lam_max, 1e-300)) {
        *embedding_ok = false;
        return {};
    }
    *embedding_ok = true;
    for (double& l : lambda) l = std::max(l, 0.0);

    std::vector<double> g(2 * n);
    gauss.fill(g.data(), 2 * n);

    std::vector<std::complex<double>> a(m);
    const double dm = static_cast<double>(m);
    a[0] = std::sqrt(lambda[0] / dm) * g[0];
    a[n] = std::sqrt(lambda[n] / dm) * g[1];
    for (std::size_t k = 1; k < n; ++k) {
        const double s = std::sqrt(lambda[k] / (2.0 * dm));
        a[k] = {s * g[2 * k], s * g[2 * k + 1]};
        a[m - k] = std::conj(a[k]);
    }
    FftEngine::local().forward(a.data(), m);
    std::vector<double> z(n);
    for (std::size_t k = 0; k < n; ++k) z[k] = a[k].real();
    return z;
}

std::vector<double> sample_cholesky(std::span<const double> acvf, const GaussianStream& gauss) {
    const std::size_t n = acvf.size() - 1;
    // Dense lower-triangular Cholesky of the Toeplitz increment covariance.
    std::vector<double> L(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = acvf[0];
        for (std::size_t k = 0; k < j; ++k) diag -= L[j * n + k] * L[j * n + k];
        if (!(diag > 0.0) || !std::isfinite(diag))
            throw generation_error(
                "fbm: increment covariance is numerically singular (circulant embedding "
                "indefinite and Cholesky pivot <= 0 at row " + std::to_string(j) + ")");
        L[j * n + j] = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = acvf[i - j];
            for (std::size_t k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
            L[i * n + j] = s / L[j * n + j];
        }
    }
    std::vector<double> g(n);
    gauss.fill(g.data(), n);
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += L[i * n + k] * g[k];
        z[i] = s;
    }
    return z;
}

} // namespace

namespace detail {

std::vector<double> fgn_acvf(double two_h, double dt, std::size_t n) {
    std::vector<double> gamma(n + 1);
    const double scale = 0.5 * std::pow(dt, two_h);
    gamma[0] = 2.0 * scale; // dt^{2H}
    if (n >= 1) gamma[1] = scale * (std::pow(2.0, two_h) - 2.0);
    for (std::size_t k = 2; k <= n; ++k) {
        // (k+1)^{2H} - 2k^{2H} + (k-1)^{2H} = k^{2H} * [((1+1/k)^{2H}-1) + ((1-1/k)^{2H}-1)]
        // via expm1/log1p to dodge the cancellation at large lags.
        const double x = 1.0 / static_cast<double>(k);
        const double a = std::expm1(two_h * std::log1p(x));
        const double b = std::expm1(two_h * std::log1p(-x));
        gamma[k] = scale * std::pow(static_cast<double>(k), two_h) * (a + b);
    }
    return gamma;
}

std::vector<double> circulant_eigenvalues(std::span<const double> acvf) {
    const std::size_t n = acvf.size() - 1;
    const std::size_t m = 2 * n;
    std::vector<std::complex<double>> c(m);
    for (std::size_t j = 0; j <= n; ++j) c[j] = acvf[j];
    for (std::size_t j = n + 1; j < m; ++j) c[j] = acvf[m - j];
    FftEngine::local().forward(c.data(), m);
    std::vector<double> lambda(m);
    for (std::size_t j = 0; j < m; ++j) lambda[j] = c[j].real();
    return lambda;
}

std::vector<double> sample_increments(std::span<const double> acvf,
                                      const GaussianStream& gauss, SampleMethod method) {
    if (acvf.size() < 2)
        throw std::invalid_argument("sample_increments: need at least one increment");
    if (method == SampleMethod::cholesky) return sample_cholesky(acvf, gauss);
    bool ok = false;
    auto z = sample_circulant(acvf, gauss, &ok);
    if (ok) return z;
    if (method == SampleMethod::circulant)
        throw generation_error("fbm: circulant embedding has eigenvalues below tolerance");
    return sample_cholesky(acvf, gauss);
}

} // namespace detail

double cov(const HurstParam& hurst, double s, double t) {
    if (s < 0.0 || t < 0.0)
        throw std::domain_error("fbm::cov: times must be nonnegative");
    const double th = hurst.two_h();
    return 0.5 * (pow2h(s, th) + pow2h(t, th) - pow2h(std::abs(t - s), th));
}

double rect_cov(const HurstParam& hurst, double u, double v, double s, double t) {
    if (v < u || t < s)
        throw std::domain_error("fbm::rect_cov: interval endpoints reversed");
    if (u < 0.0 || s < 0.0)
        throw std::domain_error("fbm::rect_cov: times must be nonnegative");
    const double th = hurst.two_h();
    return 0.5 * (pow2h(std::abs(v - s), th) + pow2h(std::abs(u - t), th) -
                  pow2h(std::abs(v - t), th) - pow2h(std::abs(u - s), th));
}

FbmPath::FbmPath(UniformGrid grid, HurstParam hurst, std::size_t dim,
                 std::uint64_t seed, std::uint64_t replica, std::vector<double> values)
    : grid_(grid), hurst_(hurst), dim_(dim), seed_(seed), replica_(replica),
      values_(std::move(values)) {
    if (dim_ == 0) throw std::invalid_argument("FbmPath: dimension must be positive");
    if (values_.size() != dim_ * grid_.points())
        throw std::invalid_argument("FbmPath: value array does not match grid");
}

FbmPath sample_fbm(const HurstParam& hurst, const UniformGrid& grid, std::size_t dim,
                   std::uint64_t seed, std::uint64_t replica, SampleMethod method) {
    if (dim == 0) throw std::invalid_argument("sample_fbm: dimension must be positive");
    const std::size_t n = grid.steps();
    const auto acvf = detail::fgn_acvf(hurst.two_h(), grid.dt(), n);
    std::vector<double> values(dim * grid.points());
    for (std::size_t coord = 0; coord < dim; ++coord) {
        GaussianStream gauss(seed, replica, static_cast<std::uint32_t>(coord));
        const auto z = detail::sample_increments(acvf, gauss, method);
        double* x = values.data() + coord * grid.points();
        x[0] = 0.0;
        for (std::size_t k = 0; k < n; ++k) x[k + 1] = x[k] + z[k];
    }
    return FbmPath(grid, hurst, dim, seed, replica, std::move(values));
}

FbmPath refine_subsample(const FbmPath& fine, std::size_t factor) {
    if (factor == 0 || fine.grid().steps() % factor != 0)
        throw std::domain_error("refine_subsample: factor must divide the fine step count");
    const std::size_t n = fine.grid().steps() / factor;
    UniformGrid coarse(fine.grid().horizon(), n);
    std::vector<double> values(fine.dim() * coarse.points());
    for (std::size_t coord = 0; coord < fine.dim(); ++coord)
        for (std::size_t k = 0; k <= n; ++k)
            values[coord * coarse.points() + k] = fine.value(coord, k * factor);
    return FbmPath(coarse, fine.hurst(), fine.dim(), fine.seed(), fine.replica(),
                   std::move(values));
}

void write_csv(const FbmPath& path, std::ostream& os) {
    os << "t";
    for (std::size_t i = 1; i <= path.dim(); ++i) os << ",x" << i;
    os << "\n";
    for (std::size_t k = 0; k < path.grid().points(); ++k) {
        os << fmt17(path.grid().point(k));
        for (std::size_t i = 0; i < path.dim(); ++i) os << "," << fmt17(path.value(i, k));
        os << "\n";
    }
}

} // namespace rsde::fbm
