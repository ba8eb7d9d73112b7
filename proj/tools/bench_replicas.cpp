// Benchmark of the OpenMP replica kernels against the serial reference
// implementation. Also asserts that both paths agree bit for bit.
#include <chrono>
#include <cstdio>
#include <string>

#include "rsde/experiments.hpp"
#include "rsde/parallel.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool same_report(const rsde::harness::RateReport& a, const rsde::harness::RateReport& b) {
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].error != b.points[i].error ||
            a.points[i].stderror != b.points[i].stderror)
            return false;
    return true;
}

} // namespace

int main(int argc, char** argv) {
    std::size_t reps = 4000;
    if (argc > 1) reps = std::stoul(argv[1]);

    rsde::harness::ExperimentConfig cfg;
    cfg.hurst = 0.4;
    cfg.horizon = 1.0;
    cfg.field = "linear1d";
    cfg.n_grid = {16, 32, 64, 128, 256};
    cfg.replicas = reps;
    cfg.seed = 20240915;

    std::printf("replica kernel benchmark: strong-rate loop, %zu replicas, n up to %zu\n",
                reps, cfg.n_grid.back());
    std::printf("threads available: %d\n\n", rsde::max_threads());
    std::printf("%-10s %10s %10s\n", "mode", "seconds", "speedup");

    cfg.mode = rsde::ExecMode::serial;
    auto t0 = Clock::now();
    const auto serial = rsde::harness::strong_error(cfg);
    const double ts = seconds_since(t0);
    std::printf("%-10s %10.3f %10s\n", "serial", ts, "1.00x");

    cfg.mode = rsde::ExecMode::parallel;
    t0 = Clock::now();
    const auto parallel = rsde::harness::strong_error(cfg);
    const double tp = seconds_since(t0);
    std::printf("%-10s %10.3f %9.2fx\n", "openmp", tp, ts / tp);

    if (!same_report(serial, parallel)) {
        std::printf("\nFAIL: serial and OpenMP kernels disagree\n");
        return 1;
    }
    std::printf("\nserial and OpenMP kernels agree bit-for-bit\n");
    return 0;
}
