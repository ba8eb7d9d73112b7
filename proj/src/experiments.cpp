#include "rsde/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

#include "rsde/fbm.hpp"
#include "rsde/format.hpp"
#include "rsde/greedy.hpp"
#include "rsde/roughpath.hpp"
#include "rsde/schemes.hpp"

namespace rsde::harness {

namespace {

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& body) {
    std::vector<std::string> items;
    std::string cur;
    for (char c : body) {
        if (c == ',') {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) items.push_back(trim(cur));
    return items;
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw config_error("config: bad numeric value for '" + key + "': " + v);
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw config_error("config: bad integer value for '" + key + "': " + v);
    }
}

std::string unquote(std::string v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\'')))
        return v.substr(1, v.size() - 2);
    return v;
}

double norm2_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Indices of replicas that survived, in replica order.
std::vector<std::size_t> survivors(const std::vector<unsigned char>& diverged) {
    std::vector<std::size_t> idx;
    idx.reserve(diverged.size());
    for (std::size_t r = 0; r < diverged.size(); ++r)
        if (!diverged[r]) idx.push_back(r);
    return idx;
}

MeanSd reduce(const std::vector<double>& slots, const std::vector<std::size_t>& keep) {
    std::vector<double> vals;
    vals.reserve(keep.size());
    for (std::size_t r : keep) vals.push_back(slots[r]);
    return mean_sd(vals);
}

struct ReplicaSetup {
    const schemes::VectorFieldSpec* vf = nullptr;
    bool exact_reference = false;
    std::size_t n_fine = 0;
};

ReplicaSetup resolve_setup(const ExperimentConfig& config) {
    config.validate();
    ReplicaSetup s;
    s.vf = &schemes::field_registry(config.field);
    if (config.reference == "exact" || (config.reference == "auto" && config.field == "linear1d")) {
        if (config.field != "linear1d")
            throw config_error("config: exact reference is only available for linear1d");
        s.exact_reference = true;
        s.n_fine = config.n_grid.back();
    } else {
        s.exact_reference = false;
        s.n_fine = config.n_grid.back() * config.ref_factor;
    }
    return s;
}

void check_divergence(const ExperimentConfig& config, std::size_t divergent) {
    const double limit = 0.01 * static_cast<double>(config.replicas);
    if (static_cast<double>(divergent) > limit)
        throw experiment_error("experiment: " + std::to_string(divergent) + " of " +
                               std::to_string(config.replicas) + " replicas diverged (> 1%)");
}

} // namespace

double ExperimentConfig::resolved_p() const {
    if (variation_p > 0.0) return variation_p;
    return 0.5 * (1.0 / hurst + 3.0);
}

void ExperimentConfig::validate() const {
    HurstParam h(hurst); // throws outside (0, 1/2]
    (void)h;
    if (!(horizon > 0.0)) throw config_error("config: T must be positive");
    if (n_grid.empty()) throw config_error("config: n grid is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (!is_power_of_two(n_grid[i]))
            throw config_error("config: n values must be powers of two");
        if (i > 0 && n_grid[i] <= n_grid[i - 1])
            throw config_error("config: n values must be strictly increasing");
    }
    if (ref_factor < 16) throw config_error("config: reference factor must be >= 16");
    if (replicas == 0) throw config_error("config: replica count must be positive");
    const auto& vf = schemes::field_registry(field); // throws with the registry listing
    if (noise_dim != vf.noise_dim)
        throw config_error("config: field '" + field + "' has noise dimension " +
                           std::to_string(vf.noise_dim) + ", config says " +
                           std::to_string(noise_dim));
    if (initial.size() != vf.state_dim)
        throw config_error("config: initial state must have dimension " +
                           std::to_string(vf.state_dim));
    apply_test_function(test_function, std::vector<double>(vf.state_dim, 0.0)); // name check
    if (reference != "auto" && reference != "exact" && reference != "self")
        throw config_error("config: reference must be auto, exact or self");
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    std::optional<std::size_t> nmin, nmax;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "H") cfg.hurst = to_double(value, key);
        else if (key == "T") cfg.horizon = to_double(value, key);
        else if (key == "d") cfg.noise_dim = to_u64(value, key);
        else if (key == "field") cfg.field = unquote(value);
        else if (key == "f") cfg.test_function = unquote(value);
        else if (key == "a") {
            if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
                cfg.initial.clear();
                for (const auto& item : split_list(value.substr(1, value.size() - 2)))
                    cfg.initial.push_back(to_double(item, key));
            } else {
                cfg.initial = {to_double(value, key)};
            }
        } else if (key == "n_list") {
            if (value.size() < 2 || value.front() != '[' || value.back() != ']')
                throw config_error("config: n_list must be a [..] list");
            cfg.n_grid.clear();
            for (const auto& item : split_list(value.substr(1, value.size() - 2)))
                cfg.n_grid.push_back(to_u64(item, key));
        } else if (key == "nmin") nmin = to_u64(value, key);
        else if (key == "nmax") nmax = to_u64(value, key);
        else if (key == "ref_factor") cfg.ref_factor = to_u64(value, key);
        else if (key == "reps") cfg.replicas = to_u64(value, key);
        else if (key == "seed") cfg.seed = to_u64(value, key);
        else if (key == "outdir") cfg.outdir = unquote(value);
        else if (key == "reference") cfg.reference = unquote(value);
        else if (key == "alpha") cfg.greedy_alpha = to_double(value, key);
        else if (key == "p") cfg.variation_p = to_double(value, key);
        else if (key == "mode") {
            const std::string m = unquote(value);
            if (m == "serial") cfg.mode = ExecMode::serial;
            else if (m == "parallel") cfg.mode = ExecMode::parallel;
            else throw config_error("config: mode must be serial or parallel");
        } else {
            throw config_error("config: unknown key '" + key + "'");
        }
    }
    if (nmin || nmax) {
        if (!nmin || !nmax) throw config_error("config: nmin and nmax must be given together");
        if (!is_power_of_two(*nmin) || !is_power_of_two(*nmax) || *nmax < *nmin)
            throw config_error("config: nmin/nmax must be powers of two with nmin <= nmax");
        cfg.n_grid.clear();
        for (std::size_t n = *nmin; n <= *nmax; n *= 2) cfg.n_grid.push_back(n);
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    return parse_config(in);
}

double apply_test_function(const std::string& name, std::span<const double> y) {
    if (name == "identity") return y[0];
    if (name == "cos") {
        double s = 0.0;
        for (double v : y) s += v;
        return std::cos(s);
    }
    if (name == "quartic-bump") {
        double s = 0.0;
        for (double v : y) s += v * v;
        return 1.0 / (1.0 + s * s);
    }
    throw config_error("unknown test function '" + name +
                       "' (registry: cos, identity, quartic-bump)");
}

std::vector<std::string> test_function_names() { return {"cos", "identity", "quartic-bump"}; }

Regression regress_rate(const std::vector<RatePoint>& points, bool weighted) {
    std::vector<double> x, y, w;
    for (const auto& pt : points) {
        if (pt.excluded) continue;
        if (!(pt.error > 0.0))
            throw std::domain_error("regress_rate: errors must be positive");
        x.push_back(std::log2(static_cast<double>(pt.n)));
        y.push_back(std::log2(pt.error));
        if (weighted) {
            // Delta method: var(log2 e) = (se / (e ln 2))^2.
            const double s = pt.stderror / (pt.error * std::numbers::ln2);
            w.push_back(s > 0.0 ? 1.0 / (s * s) : 1.0);
        }
    }
    if (x.size() < 4)
        throw experiment_error("regress_rate: need at least 4 points, have " +
                               std::to_string(x.size()));
    return least_squares(x, y, weighted ? std::span<const double>(w) : std::span<const double>{});
}

RateReport strong_error(const ExperimentConfig& config) {
    const ReplicaSetup setup = resolve_setup(config);
    const HurstParam hurst(config.hurst);
    const UniformGrid fine_grid(config.horizon, setup.n_fine);
    const std::size_t n_count = config.n_grid.size();
    const std::size_t reps = config.replicas;

    std::vector<std::vector<double>> slots(n_count, std::vector<double>(reps, 0.0));
    std::vector<unsigned char> diverged(reps, 0);

    for_each_replica(reps, config.mode, [&](std::size_t r) {
        try {
            const auto fine =
                fbm::sample_fbm(hurst, fine_grid, config.noise_dim, config.seed, r);
            std::vector<double> y_ref;
            if (setup.exact_reference) {
                y_ref = {schemes::exact_linear_solution(fine.value(0, setup.n_fine),
                                                        config.initial[0])};
            } else {
                const auto traj = schemes::run_modified_euler(*setup.vf, fine, config.initial);
                const auto last = traj.state(setup.n_fine);
                y_ref.assign(last.begin(), last.end());
            }
            for (std::size_t i = 0; i < n_count; ++i) {
                const std::size_t n = config.n_grid[i];
                const auto path = (n == setup.n_fine)
                                      ? fine
                                      : fbm::refine_subsample(fine, setup.n_fine / n);
                const auto traj = schemes::run_modified_euler(*setup.vf, path, config.initial);
                slots[i][r] = norm2_diff(traj.state(n), y_ref);
            }
        } catch (const schemes::divergence_error&) {
            diverged[r] = 1;
        }
    });

    RateReport report;
    report.kind = "strong";
    report.divergent_replicas =
        static_cast<std::size_t>(std::count(diverged.begin(), diverged.end(), 1));
    check_divergence(config, report.divergent_replicas);
    const auto keep = survivors(diverged);
    for (std::size_t i = 0; i < n_count; ++i) {
        const MeanSd ms = reduce(slots[i], keep);
        report.points.push_back({config.n_grid[i], ms.mean, ms.stderror, false});
    }
    report.fit = regress_rate(report.points);
    return report;
}

RateReport weak_error(const ExperimentConfig& config) {
    const ReplicaSetup setup = resolve_setup(config);
    const HurstParam hurst(config.hurst);
    const UniformGrid fine_grid(config.horizon, setup.n_fine);
    const std::size_t n_count = config.n_grid.size();
    const std::size_t reps = config.replicas;
    const bool linear = config.field == "linear1d";

    std::vector<std::vector<double>> slots(n_count, std::vector<double>(reps, 0.0));
    std::vector<double> bench(linear ? reps : 0, 0.0);
    std::vector<unsigned char> diverged(reps, 0);

    for_each_replica(reps, config.mode, [&](std::size_t r) {
        try {
            const auto fine =
                fbm::sample_fbm(hurst, fine_grid, config.noise_dim, config.seed, r);
            std::vector<double> y_ref;
            if (setup.exact_reference) {
                y_ref = {schemes::exact_linear_solution(fine.value(0, setup.n_fine),
                                                        config.initial[0])};
            } else {
                const auto traj = schemes::run_modified_euler(*setup.vf, fine, config.initial);
                const auto last = traj.state(setup.n_fine);
                y_ref.assign(last.begin(), last.end());
            }
            const double f_ref = apply_test_function(config.test_function, y_ref);
            if (linear) bench[r] = std::exp(fine.value(0, setup.n_fine));
            for (std::size_t i = 0; i < n_count; ++i) {
                const std::size_t n = config.n_grid[i];
                const auto path = (n == setup.n_fine)
                                      ? fine
                                      : fbm::refine_subsample(fine, setup.n_fine / n);
                const auto traj = schemes::run_modified_euler(*setup.vf, path, config.initial);
                slots[i][r] =
                    apply_test_function(config.test_function, traj.state(n)) - f_ref;
            }
        } catch (const schemes::divergence_error&) {
            diverged[r] = 1;
        }
    });

    RateReport report;
    report.kind = "weak";
    report.divergent_replicas =
        static_cast<std::size_t>(std::count(diverged.begin(), diverged.end(), 1));
    check_divergence(config, report.divergent_replicas);
    const auto keep = survivors(diverged);
    for (std::size_t i = 0; i < n_count; ++i) {
        const MeanSd ms = reduce(slots[i], keep);
        RatePoint pt;
        pt.n = config.n_grid[i];
        pt.error = std::abs(ms.mean);
        pt.stderror = ms.stderror;
        pt.excluded = pt.error < 3.0 * pt.stderror; // noise-dominated
        report.points.push_back(pt);
    }
    if (linear) {
        const MeanSd mb = reduce(bench, keep);
        const double analytic = std::exp(0.5 * std::pow(config.horizon, hurst.two_h()));
        for (std::size_t i = 0; i < n_count; ++i)
            report.benchmark.push_back({config.n_grid[i], mb.mean, analytic, mb.stderror});
    }
    report.fit = regress_rate(report.points);
    return report;
}

RateReport q_scaling(const ExperimentConfig& config) {
    config.validate();
    const HurstParam hurst(config.hurst);
    const std::size_t n_fine = config.n_grid.back();
    const UniformGrid fine_grid(config.horizon, n_fine);
    const std::size_t n_count = config.n_grid.size();
    const std::size_t reps = config.replicas;

    std::vector<std::vector<double>> slots(n_count, std::vector<double>(reps, 0.0));

    for_each_replica(reps, config.mode, [&](std::size_t r) {
        const auto fine = fbm::sample_fbm(hurst, fine_grid, config.noise_dim, config.seed, r);
        for (std::size_t i = 0; i < n_count; ++i) {
            const std::size_t n = config.n_grid[i];
            const auto path =
                (n == n_fine) ? fine : fbm::refine_subsample(fine, n_fine / n);
            const auto lift = roughpath::level2_diagonal(path);
            const auto q = roughpath::q_process(lift, hurst);
            slots[i][r] = q.entry(0, 0, 0, n);
        }
    });

    RateReport report;
    report.kind = "q-scaling";
    for (std::size_t i = 0; i < n_count; ++i) {
        const MeanSd ms = mean_sd(slots[i]);
        RatePoint pt;
        pt.n = config.n_grid[i];
        pt.error = ms.sd;
        // Asymptotic standard error of a sample standard deviation.
        pt.stderror = ms.sd / std::sqrt(2.0 * static_cast<double>(reps - 1));
        report.points.push_back(pt);
    }
    report.fit = regress_rate(report.points);
    return report;
}

sewing::SewingReport davie_sewing_check(const ExperimentConfig& config, std::size_t n,
                                        std::uint64_t replica) {
    config.validate();
    const HurstParam hurst(config.hurst);
    const auto& vf = schemes::field_registry(config.field);
    const double p = config.resolved_p();
    const double mu = 3.0 / p;

    const UniformGrid grid(config.horizon, n);
    fbm::FbmPath path = [&] {
        if (vf.noise_dim == 1)
            return fbm::sample_fbm(hurst, grid, 1, config.seed, replica);
        // Off-diagonal areas need the piecewise-linear lift of a finer path.
        const UniformGrid fg(config.horizon, n * 64);
        return fbm::sample_fbm(hurst, fg, vf.noise_dim, config.seed, replica);
    }();

    const auto lift = (vf.noise_dim == 1) ? roughpath::level2_diagonal(path)
                                          : roughpath::level2_fine_approx(path, 64);
    const auto coarse = (vf.noise_dim == 1) ? path : fbm::refine_subsample(path, 64);
    const auto traj = schemes::run_modified_euler(vf, coarse, config.initial);
    const auto q = roughpath::q_process(lift, hurst);
    const roughpath::ControlTable omega = roughpath::control_omega(lift, q, p);

    sewing::IncrementFn remainder = [&](std::size_t a, std::size_t b) {
        return roughpath::davie_remainder_vector(traj, vf, lift, a, b);
    };

    // First pass measures the hypothesis constants; the rescaled control
    // absorbs them (a control times a positive constant is still a control).
    const auto first = sewing::verify_sewing(remainder, omega, mu, config.seed);
    const double worst = std::max(first.max_step_hypothesis, first.max_triple_hypothesis);
    if (worst <= 1.0) return first;
    const double scale = std::pow(worst, 1.0 / mu) * (1.0 + 1e-12);
    sewing::ScaledControl scaled(omega, scale);
    return sewing::verify_sewing(remainder, scaled, mu, config.seed);
}

void write_rates_csv(const RateReport& report, std::ostream& os) {
    const bool weak = report.kind == "weak";
    os << (weak ? "n,error,stderr,excluded\n" : "n,error,stderr\n");
    for (const auto& pt : report.points) {
        os << pt.n << "," << fmt17(pt.error) << "," << fmt17(pt.stderror);
        if (weak) os << "," << (pt.excluded ? 1 : 0);
        os << "\n";
    }
}

void write_report_csv(const RateReport& report, std::ostream& os) {
    os << "slope,intercept,r2\n";
    os << fmt17(report.fit.slope) << "," << fmt17(report.fit.intercept) << ","
       << fmt17(report.fit.r2) << "\n";
}

void write_benchmark_csv(const RateReport& report, std::ostream& os) {
    os << "n,mc_mean,analytic,stderr\n";
    for (const auto& b : report.benchmark)
        os << b.n << "," << fmt17(b.mc_mean) << "," << fmt17(b.analytic) << ","
           << fmt17(b.stderror) << "\n";
}

} // namespace rsde::harness
