#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsde/parallel.hpp"
#include "rsde/sewing.hpp"
#include "rsde/stats.hpp"

namespace rsde::harness {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class experiment_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Monte Carlo experiment description. Mirrors the TOML-style key=value
/// config file; CLI flags override file values.
struct ExperimentConfig {
    double hurst = 0.4;
    double horizon = 1.0;
    std::size_t noise_dim = 1;
    std::string field = "linear1d";
    std::vector<double> initial = {1.0};
    std::vector<std::size_t> n_grid = {16, 32, 64, 128, 256, 512, 1024};
    std::size_t ref_factor = 64;
    std::size_t replicas = 10000;
    std::string test_function = "cos";
    std::uint64_t seed = 1;
    std::string outdir = "out";
    std::string reference = "auto"; ///< auto | exact | self
    double greedy_alpha = 1.0;
    double variation_p = 0.0; ///< 0 = midpoint of (1/H, 3)
    ExecMode mode = ExecMode::parallel;

    double resolved_p() const;
    /// Throws config_error on violated invariants (n powers of two ascending,
    /// ref factor >= 16, registry names known, dimensions consistent).
    void validate() const;
};

/// Parse `key = value` lines (# comments, ints, floats, strings, [lists]).
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config_file(const std::string& path);

/// Test functions f: R^m -> R used by the weak error: identity (first
/// coordinate), cos (of the coordinate sum), quartic-bump 1/(1 + |y|^4).
double apply_test_function(const std::string& name, std::span<const double> y);
std::vector<std::string> test_function_names();

struct RatePoint {
    std::size_t n = 0;
    double error = 0.0;
    double stderror = 0.0;
    bool excluded = false; ///< noise-dominated, dropped from the fit
};

struct WeakBenchmarkPoint {
    std::size_t n = 0;
    double mc_mean = 0.0;   ///< Monte Carlo mean of exp(x_T)
    double analytic = 0.0;  ///< exp(T^{2H}/2)
    double stderror = 0.0;
};

struct RateReport {
    std::string kind; ///< strong | weak | q-scaling
    std::vector<RatePoint> points;
    Regression fit;
    std::size_t divergent_replicas = 0;
    std::vector<WeakBenchmarkPoint> benchmark; ///< weak runs on the linear field
};

/// OLS of log2(error) against log2(n) over non-excluded points; requires at
/// least four of them. Optional inverse-variance weighting in log space via
/// the delta method.
Regression regress_rate(const std::vector<RatePoint>& points, bool weighted = false);

/// Coupled strong error E|y^n_T - y^ref_T| per n, all n driven by one fine
/// path per replica. Reference is the closed form a exp(x_T) for the linear
/// field or a modified Euler run refined by ref_factor.
RateReport strong_error(const ExperimentConfig& config);

/// Coupled weak estimator mean[f(y^n_T) - f(y^ref_T)] per n with noise
/// flagging at 3 standard errors; at least four surviving points required.
RateReport weak_error(const ExperimentConfig& config);

/// Monte Carlo standard deviation of q^{11}_{0T} per n.
RateReport q_scaling(const ExperimentConfig& config);

/// Davie-remainder instantiation of the discrete sewing lemma: run the scheme
/// for `replica` at step count n, take R = Davie remainder, mu = 3/p, and
/// verify against the control rescaled so the lemma's hypotheses hold with
/// constant one.
sewing::SewingReport davie_sewing_check(const ExperimentConfig& config, std::size_t n,
                                        std::uint64_t replica);

/// CSVs: `<kind>_rates.csv` with n,error,stderr(,excluded for weak) and
/// `report.csv` with slope,intercept,r2.
void write_rates_csv(const RateReport& report, std::ostream& os);
void write_report_csv(const RateReport& report, std::ostream& os);
void write_benchmark_csv(const RateReport& report, std::ostream& os);

int run_cli(int argc, const char* const* argv);

} // namespace rsde::harness
