#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "rsde/experiments.hpp"
#include "rsde/fbm.hpp"
#include "rsde/parallel.hpp"
#include "rsde/rng.hpp"
#include "rsde/schemes.hpp"
#include "rsde/stats.hpp"

using namespace rsde;
using harness::ExperimentConfig;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string rates_string(const harness::RateReport& rep) {
    std::ostringstream os;
    harness::write_rates_csv(rep, os);
    harness::write_report_csv(rep, os);
    harness::write_benchmark_csv(rep, os);
    return os.str();
}

} // namespace

TEST_CASE("statistics helpers") {
    SUBCASE("pairwise sum is exact on integers and order-stable") {
        std::vector<double> v(1000);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
        CHECK(pairwise_sum(v) == 500500.0);
    }
    SUBCASE("mean/sd of a known sample") {
        const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
        const auto ms = mean_sd(v);
        CHECK(ms.mean == doctest::Approx(2.5).epsilon(1e-15));
        CHECK(ms.sd == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
    }
    SUBCASE("mann-kendall flags a strict trend and tolerates noise") {
        const std::vector<double> up = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
        CHECK(mann_kendall_z(up) > 1.645);
        const std::vector<double> flat = {1.0, 0.9, 1.1, 0.95, 1.05, 1.0};
        CHECK(mann_kendall_z(flat) <= 1.645);
    }
    SUBCASE("median") {
        CHECK(median({3.0, 1.0, 2.0}) == 2.0);
        CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    }
}

TEST_CASE("config parsing") {
    SUBCASE("full file") {
        std::istringstream in(R"(
# experiment
H = 0.4
T = 2.0
d = 2
field = "poly2d"
f = quartic-bump
a = [0.3, -0.2]
n_list = [16, 32, 64, 128]
ref_factor = 32
reps = 500
seed = 99
outdir = "results"
reference = self
alpha = 0.7
p = 2.8
mode = serial
)");
        const auto cfg = harness::parse_config(in);
        CHECK(cfg.hurst == 0.4);
        CHECK(cfg.horizon == 2.0);
        CHECK(cfg.noise_dim == 2);
        CHECK(cfg.field == "poly2d");
        CHECK(cfg.test_function == "quartic-bump");
        CHECK(cfg.initial == std::vector<double>{0.3, -0.2});
        CHECK(cfg.n_grid == std::vector<std::size_t>{16, 32, 64, 128});
        CHECK(cfg.ref_factor == 32);
        CHECK(cfg.replicas == 500);
        CHECK(cfg.seed == 99);
        CHECK(cfg.outdir == "results");
        CHECK(cfg.reference == "self");
        CHECK(cfg.greedy_alpha == 0.7);
        CHECK(cfg.variation_p == 2.8);
        CHECK(cfg.mode == ExecMode::serial);
        CHECK_NOTHROW(cfg.validate());
    }
    SUBCASE("nmin/nmax expansion") {
        std::istringstream in("nmin = 16\nnmax = 128\n");
        const auto cfg = harness::parse_config(in);
        CHECK(cfg.n_grid == std::vector<std::size_t>{16, 32, 64, 128});
    }
    SUBCASE("unknown key rejected") {
        std::istringstream in("bogus = 1\n");
        CHECK_THROWS_AS(harness::parse_config(in), harness::config_error);
    }
    SUBCASE("resolved p defaults to the midpoint of (1/H, 3)") {
        ExperimentConfig cfg;
        cfg.hurst = 0.4;
        CHECK(cfg.resolved_p() == doctest::Approx(2.75).epsilon(1e-15));
        cfg.variation_p = 2.9;
        CHECK(cfg.resolved_p() == 2.9);
    }
}

TEST_CASE("config validation") {
    ExperimentConfig cfg; // defaults are valid
    CHECK_NOTHROW(cfg.validate());

    SUBCASE("n grid must be ascending powers of two") {
        cfg.n_grid = {16, 24};
        CHECK_THROWS_AS(cfg.validate(), harness::config_error);
        cfg.n_grid = {32, 16};
        CHECK_THROWS_AS(cfg.validate(), harness::config_error);
    }
    SUBCASE("reference factor floor") {
        cfg.ref_factor = 8;
        CHECK_THROWS_AS(cfg.validate(), harness::config_error);
    }
    SUBCASE("unknown names carry the registry listing") {
        cfg.field = "mystery";
        CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("registry"),
                             std::invalid_argument);
        cfg.field = "linear1d";
        cfg.test_function = "tanh";
        CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("registry"),
                             harness::config_error);
    }
    SUBCASE("dimension mismatches") {
        cfg.noise_dim = 2;
        CHECK_THROWS_AS(cfg.validate(), harness::config_error);
        cfg.noise_dim = 1;
        cfg.initial = {1.0, 2.0};
        CHECK_THROWS_AS(cfg.validate(), harness::config_error);
    }
}

TEST_CASE("test function registry") {
    CHECK(harness::apply_test_function("identity", std::vector<double>{2.5, 1.0}) == 2.5);
    CHECK(harness::apply_test_function("cos", std::vector<double>{0.3, 0.4}) ==
          doctest::Approx(std::cos(0.7)).epsilon(1e-15));
    CHECK(harness::apply_test_function("quartic-bump", std::vector<double>{1.0, 1.0}) ==
          doctest::Approx(1.0 / 5.0).epsilon(1e-15));
    CHECK_THROWS_AS(harness::apply_test_function("nope", std::vector<double>{1.0}),
                    harness::config_error);
}

TEST_CASE("rate regression") {
    SUBCASE("exact power law") {
        std::vector<harness::RatePoint> pts;
        for (std::size_t n : {16, 32, 64, 128, 256})
            pts.push_back({n, 3.0 / static_cast<double>(n), 0.01, false});
        const auto fit = harness::regress_rate(pts);
        CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::pow(2.0, fit.intercept) == doctest::Approx(3.0).epsilon(1e-10));
    }
    SUBCASE("constant errors give slope zero") {
        std::vector<harness::RatePoint> pts;
        for (std::size_t n : {16, 32, 64, 128})
            pts.push_back({n, 0.5, 0.01, false});
        CHECK(harness::regress_rate(pts).slope == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("multiplicative noise keeps the slope within 0.05") {
        GaussianStream gs(71, 0, 0);
        std::vector<harness::RatePoint> pts;
        std::size_t i = 0;
        for (std::size_t n : {16, 32, 64, 128, 256, 512, 1024}) {
            // u ~ U(-0.05, 0.05) via the Gaussian cdf trick is overkill; map a
            // deterministic stream value into the interval instead.
            const double u = 0.05 * std::tanh(gs(i++));
            pts.push_back({n, 2.0 * std::pow(n, -0.6) * (1.0 + u), 0.01, false});
        }
        CHECK(std::abs(harness::regress_rate(pts).slope + 0.6) < 0.05);
    }
    SUBCASE("too few points") {
        std::vector<harness::RatePoint> pts = {{16, 0.5, 0.01, false},
                                               {32, 0.25, 0.01, false},
                                               {64, 0.12, 0.01, false}};
        CHECK_THROWS_AS(harness::regress_rate(pts), harness::experiment_error);
        pts.push_back({128, 0.06, 0.01, true}); // excluded does not count
        CHECK_THROWS_AS(harness::regress_rate(pts), harness::experiment_error);
    }
    SUBCASE("non-positive error rejected") {
        std::vector<harness::RatePoint> pts = {{16, 0.5, 0.01, false},
                                               {32, 0.0, 0.01, false},
                                               {64, 0.12, 0.01, false},
                                               {128, 0.06, 0.01, false}};
        CHECK_THROWS_AS(harness::regress_rate(pts), std::domain_error);
    }
    SUBCASE("weighted fit stays close on clean data") {
        std::vector<harness::RatePoint> pts;
        for (std::size_t n : {16, 32, 64, 128, 256})
            pts.push_back({n, std::pow(n, -0.3), 0.001 * std::pow(n, -0.3), false});
        CHECK(harness::regress_rate(pts, true).slope == doctest::Approx(-0.3).epsilon(1e-9));
    }
}

TEST_CASE("strong error experiment smoke") {
    ExperimentConfig cfg;
    cfg.hurst = 0.4;
    cfg.n_grid = {16, 32, 64, 128};
    cfg.replicas = 400;
    cfg.seed = 31;
    const auto rep = harness::strong_error(cfg);
    CHECK(rep.kind == "strong");
    CHECK(rep.points.size() == 4);
    CHECK(rep.fit.slope < -0.1);
    CHECK(rep.fit.slope > -0.6);
    CHECK(rep.divergent_replicas == 0);
    SUBCASE("errors decrease along the grid") {
        for (std::size_t i = 1; i < rep.points.size(); ++i)
            CHECK(rep.points[i].error < rep.points[i - 1].error);
    }
    SUBCASE("self reference agrees with the exact one to first order") {
        cfg.reference = "self";
        cfg.ref_factor = 16;
        const auto self_rep = harness::strong_error(cfg);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(self_rep.points[i].error ==
                  doctest::Approx(rep.points[i].error).epsilon(0.2));
    }
}

TEST_CASE("median strong error decreases along the n grid") {
    const auto& vf = schemes::field_registry("linear1d");
    const HurstParam h(0.4);
    const std::size_t n_fine = 128, reps = 500;
    const UniformGrid fine_grid(1.0, n_fine);
    std::vector<std::vector<double>> errs(4, std::vector<double>(reps));
    for_each_replica(reps, ExecMode::parallel, [&](std::size_t r) {
        const auto fine = fbm::sample_fbm(h, fine_grid, 1, 77, r);
        const double exact = schemes::exact_linear_solution(fine.value(0, n_fine), 1.0);
        std::size_t idx = 0;
        for (std::size_t n : {16, 32, 64, 128}) {
            const auto path = (n == n_fine) ? fine : fbm::refine_subsample(fine, n_fine / n);
            const auto traj = schemes::run_modified_euler(vf, path, std::vector<double>{1.0});
            errs[idx++][r] = std::abs(traj.state(n)[0] - exact);
        }
    });
    double prev = std::numeric_limits<double>::infinity();
    for (auto& e : errs) {
        const double m = median(e);
        CHECK(m < prev);
        prev = m;
    }
}

TEST_CASE("weak error experiment") {
    ExperimentConfig cfg;
    cfg.hurst = 0.4;
    cfg.initial = {2.0};
    cfg.n_grid = {8, 16, 32, 64, 128};
    cfg.replicas = 10000;
    cfg.seed = 32;
    cfg.test_function = "cos";
    const auto rep = harness::weak_error(cfg);
    CHECK(rep.kind == "weak");
    REQUIRE(rep.benchmark.size() == 5);
    SUBCASE("analytic benchmark within four standard errors") {
        for (const auto& b : rep.benchmark) {
            CHECK(b.analytic == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
            CHECK(std::abs(b.mc_mean - b.analytic) <= 4.0 * b.stderror);
        }
    }
    SUBCASE("noise flagging fires for a tiny replica budget") {
        cfg.replicas = 10;
        cfg.n_grid = {64, 128, 256, 512};
        // Every point collapses into noise, so fewer than four survive.
        CHECK_THROWS_AS(harness::weak_error(cfg), harness::experiment_error);
    }
    SUBCASE("partial exclusion keeps the surviving points") {
        cfg.replicas = 3000;
        cfg.n_grid = {16, 32, 64, 128, 256, 512, 1024};
        try {
            const auto r2 = harness::weak_error(cfg);
            bool any_excluded = false;
            for (const auto& pt : r2.points) any_excluded = any_excluded || pt.excluded;
            CHECK(any_excluded);
        } catch (const harness::experiment_error&) {
            // Acceptable outcome when fewer than four points survive.
        }
    }
}

TEST_CASE("coupled estimator beats the uncoupled one on the linear benchmark") {
    const auto& vf = schemes::field_registry("linear1d");
    const HurstParam h(0.4);
    const std::size_t n = 64, reps = 4000;
    const UniformGrid grid(1.0, n);
    std::vector<double> coupled(reps), plain_n(reps), plain_ref(reps);
    for_each_replica(reps, ExecMode::parallel, [&](std::size_t r) {
        const auto path = fbm::sample_fbm(h, grid, 1, 33, r);
        const auto traj = schemes::run_modified_euler(vf, path, std::vector<double>{1.0});
        const double f_n = std::cos(traj.state(n)[0]);
        const double f_ref = std::cos(schemes::exact_linear_solution(path.value(0, n), 1.0));
        coupled[r] = f_n - f_ref;
        plain_n[r] = f_n;
        plain_ref[r] = f_ref;
    });
    const double var_coupled = std::pow(mean_sd(coupled).sd, 2);
    const double var_uncoupled =
        std::pow(mean_sd(plain_n).sd, 2) + std::pow(mean_sd(plain_ref).sd, 2);
    CHECK(var_coupled <= var_uncoupled);
}

TEST_CASE("q scaling experiment smoke") {
    ExperimentConfig cfg;
    cfg.hurst = 0.4;
    cfg.n_grid = {16, 32, 64, 128};
    cfg.replicas = 2000;
    cfg.seed = 34;
    const auto rep = harness::q_scaling(cfg);
    CHECK(rep.kind == "q-scaling");
    CHECK(std::abs(rep.fit.slope + 0.3) < 0.15);

    SUBCASE("interval halving at fixed mesh scales sd by sqrt(1/2)") {
        const HurstParam h(0.4);
        const std::size_t n = 256, reps = 4000;
        const UniformGrid grid(1.0, n);
        std::vector<double> full(reps), half(reps);
        for_each_replica(reps, ExecMode::parallel, [&](std::size_t r) {
            const auto path = fbm::sample_fbm(h, grid, 1, 35, r);
            const auto q =
                roughpath::q_process(roughpath::level2_diagonal(path), h);
            full[r] = q.entry(0, 0, 0, n);
            half[r] = q.entry(0, 0, 0, n / 2);
        });
        const double ratio = mean_sd(half).sd / mean_sd(full).sd;
        CHECK(ratio == doctest::Approx(std::sqrt(0.5)).epsilon(0.08));
    }
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
    ExperimentConfig cfg;
    cfg.hurst = 0.4;
    cfg.initial = {2.0};
    cfg.n_grid = {8, 16, 32, 64, 128};
    cfg.replicas = 10000;
    cfg.seed = 36;

    cfg.mode = ExecMode::serial;
    const auto serial_strong = rates_string(harness::strong_error(cfg));
    const auto serial_weak = rates_string(harness::weak_error(cfg));
    cfg.mode = ExecMode::parallel;
    const auto par_strong = rates_string(harness::strong_error(cfg));
    const auto par_weak = rates_string(harness::weak_error(cfg));
    CHECK(serial_strong == par_strong);
    CHECK(serial_weak == par_weak);

    SUBCASE("thread count does not change results") {
        set_threads(1);
        const auto one = rates_string(harness::strong_error(cfg));
        set_threads(2);
        const auto two = rates_string(harness::strong_error(cfg));
        CHECK(one == two);
        CHECK(one == par_strong);
    }
}

TEST_CASE("cli") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rsde_cli_test";
    fs::remove_all(dir);

    auto run = [](std::vector<std::string> args) {
        std::vector<const char*> argv = {"rsde"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return harness::run_cli(static_cast<int>(argv.size()), argv.data());
    };

    SUBCASE("unknown field exits with the config code") {
        CHECK(run({"strong", "--field", "mystery"}) == 1);
    }
    SUBCASE("strong writes the documented files deterministically") {
        const auto out = (dir / "s1").string();
        CHECK(run({"strong", "--H", "0.4", "--nmin", "16", "--nmax", "128", "--reps", "200",
                   "--seed", "3", "--outdir", out}) == 0);
        CHECK(slurp(dir / "s1" / "strong_rates.csv").rfind("n,error,stderr\n", 0) == 0);
        CHECK(slurp(dir / "s1" / "report.csv").rfind("slope,intercept,r2\n", 0) == 0);
        CHECK(fs::exists(dir / "s1" / "plot_rates.py"));

        const auto out2 = (dir / "s2").string();
        CHECK(run({"strong", "--H", "0.4", "--nmin", "16", "--nmax", "128", "--reps", "200",
                   "--seed", "3", "--outdir", out2}) == 0);
        CHECK(slurp(dir / "s1" / "strong_rates.csv") == slurp(dir / "s2" / "strong_rates.csv"));
    }
    SUBCASE("sample/greedy/sewing subcommands") {
        const auto out = (dir / "g1").string();
        CHECK(run({"sample", "--H", "0.4", "--n", "32", "--seed", "5", "--outdir", out,
                   "--lift", "--q"}) == 0);
        CHECK(fs::exists(dir / "g1" / "path.csv"));
        CHECK(fs::exists(dir / "g1" / "lift.csv"));
        CHECK(fs::exists(dir / "g1" / "q.csv"));
        CHECK(run({"greedy", "--H", "0.4", "--n", "64", "--alpha", "0.4", "--seed", "5",
                   "--outdir", out}) == 0);
        CHECK(slurp(dir / "g1" / "partition.csv").rfind("j,s_j,s_j1,omega,label\n", 0) == 0);
        CHECK(run({"sewing", "--H", "0.4", "--n", "64", "--count", "2", "--seed", "5",
                   "--outdir", out}) == 0);
        CHECK(slurp(dir / "g1" / "sewing_report.csv")
                  .rfind("mu,K_mu,max_ratio,witness_s,witness_t,verdict\n", 0) == 0);
    }
    SUBCASE("config file plus flag override") {
        fs::create_directories(dir);
        const auto cfgpath = (dir / "c.toml").string();
        std::ofstream(cfgpath) << "H = 0.4\nreps = 150\nnmin = 16\nnmax = 128\nseed = 9\n";
        const auto out = (dir / "c1").string();
        CHECK(run({"qscale", "--config", cfgpath, "--reps", "300", "--outdir", out}) == 0);
        CHECK(fs::exists(dir / "c1" / "qscale_rates.csv"));
    }
}
