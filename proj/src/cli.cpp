#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "rsde/experiments.hpp"
#include "rsde/fbm.hpp"
#include "rsde/format.hpp"
#include "rsde/greedy.hpp"
#include "rsde/roughpath.hpp"
#include "rsde/schemes.hpp"
#include "rsde/sewing.hpp"

namespace rsde::harness {

namespace {

namespace fs = std::filesystem;

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plot the rate CSVs produced next to this script (log-log with fitted line)."""
import csv
import math
import os
import sys

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required to draw the plots")

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    path = os.path.join(HERE, name)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return list(csv.DictReader(fh))


def draw(ax, rates, report, title):
    ns = [float(r["n"]) for r in rates]
    es = [float(r["error"]) for r in rates]
    ax.loglog(ns, es, "o", base=2, label="measured")
    if report:
        slope = float(report[0]["slope"])
        icept = float(report[0]["intercept"])
        fit = [2.0 ** (icept + slope * math.log2(n)) for n in ns]
        ax.loglog(ns, fit, "-", base=2, label=f"fit slope {slope:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.legend()


panels = []
for sub in ("", "strong", "weak", "qscale"):
    base = os.path.join(HERE, sub) if sub else HERE
    for kind in ("strong", "weak", "q-scaling"):
        fname = {"strong": "strong_rates.csv", "weak": "weak_rates.csv",
                 "q-scaling": "qscale_rates.csv"}[kind]
        path = os.path.join(base, fname)
        if os.path.exists(path):
            with open(path) as fh:
                rates = list(csv.DictReader(fh))
            rpt = None
            rpath = os.path.join(base, "report.csv")
            if os.path.exists(rpath):
                with open(rpath) as fh:
                    rpt = list(csv.DictReader(fh))
            panels.append((rates, rpt, f"{kind} ({sub or '.'})"))

if not panels:
    sys.exit("no rate CSVs found")
fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4))
if len(panels) == 1:
    axes = [axes]
for ax, (rates, rpt, title) in zip(axes, panels):
    draw(ax, rates, rpt, title)
fig.tight_layout()
out = os.path.join(HERE, "rates.png")
fig.savefig(out, dpi=130)
print(f"wrote {out}")
)PY";

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write '" + path.string() + "'");
    out << content;
}

template <typename WriteFn>
void write_csv_file(const fs::path& path, WriteFn&& fn) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write '" + path.string() + "'");
    fn(out);
}

struct CommonOpts {
    std::string config_path;
    ExperimentConfig cfg;
    // Flag presence tracking so CLI values override file values.
    std::optional<double> hurst, horizon, alpha, p;
    std::optional<std::size_t> dim, reps, ref_factor, nmin, nmax, threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> field, testfn, outdir, reference;
    std::vector<double> initial;
    bool serial = false;

    ExperimentConfig resolve() const {
        ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config_file(config_path);
        if (hurst) c.hurst = *hurst;
        if (horizon) c.horizon = *horizon;
        if (dim) c.noise_dim = *dim;
        if (field) {
            c.field = *field;
            // Keep dimensions consistent with the chosen field unless the user
            // pinned them explicitly.
            const auto& vf = schemes::field_registry(c.field);
            if (!dim) c.noise_dim = vf.noise_dim;
            if (c.initial.size() != vf.state_dim) c.initial.assign(vf.state_dim, 1.0);
        }
        if (testfn) c.test_function = *testfn;
        if (!initial.empty()) c.initial = initial;
        if (reps) c.replicas = *reps;
        if (ref_factor) c.ref_factor = *ref_factor;
        if (seed) c.seed = *seed;
        if (outdir) c.outdir = *outdir;
        if (reference) c.reference = *reference;
        if (alpha) c.greedy_alpha = *alpha;
        if (p) c.variation_p = *p;
        if (nmin || nmax) {
            const std::size_t lo = nmin.value_or(c.n_grid.front());
            const std::size_t hi = nmax.value_or(c.n_grid.back());
            c.n_grid.clear();
            for (std::size_t n = lo; n <= hi; n *= 2) c.n_grid.push_back(n);
        }
        if (serial) c.mode = ExecMode::serial;
        if (threads) set_threads(static_cast<int>(*threads));
        return c;
    }
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "TOML-style key=value config file");
    cmd->add_option("--H", o.hurst, "Hurst parameter in (0, 1/2]");
    cmd->add_option("--T", o.horizon, "time horizon");
    cmd->add_option("--d", o.dim, "noise dimension");
    cmd->add_option("--field", o.field, "vector field registry name");
    cmd->add_option("--f", o.testfn, "test function: cos, identity, quartic-bump");
    cmd->add_option("--a", o.initial, "initial state (repeat for each coordinate)");
    cmd->add_option("--nmin", o.nmin, "smallest step count (power of two)");
    cmd->add_option("--nmax", o.nmax, "largest step count (power of two)");
    cmd->add_option("--reps", o.reps, "Monte Carlo replicas");
    cmd->add_option("--ref-factor", o.ref_factor, "reference grid refinement factor");
    cmd->add_option("--reference", o.reference, "reference solution: auto, exact or self");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--alpha", o.alpha, "greedy threshold");
    cmd->add_option("--p", o.p, "variation exponent (default midpoint of (1/H,3))");
    cmd->add_option("--outdir", o.outdir, "output directory");
    cmd->add_option("--threads", o.threads, "OpenMP thread count");
    cmd->add_flag("--serial", o.serial, "run replicas on the serial reference path");
}

void warn_band(const ExperimentConfig& cfg) {
    HurstParam h(cfg.hurst);
    if (!h.in_target_band())
        std::cerr << "warning: H = " << cfg.hurst
                  << " is outside the target band (1/3, 1/2]; rate guarantees do not apply\n";
}

void emit_rates(const ExperimentConfig& cfg, const RateReport& rep, const std::string& sub) {
    const fs::path dir = sub.empty() ? fs::path(cfg.outdir) : fs::path(cfg.outdir) / sub;
    const std::string base = rep.kind == "q-scaling" ? "qscale" : rep.kind;
    write_csv_file(dir / (base + "_rates.csv"), [&](std::ostream& os) { write_rates_csv(rep, os); });
    write_csv_file(dir / "report.csv", [&](std::ostream& os) { write_report_csv(rep, os); });
    if (!rep.benchmark.empty())
        write_csv_file(dir / "weak_benchmark.csv",
                       [&](std::ostream& os) { write_benchmark_csv(rep, os); });
    std::cout << rep.kind << ": slope " << fmt17(rep.fit.slope) << "  r2 " << fmt17(rep.fit.r2)
              << "  (" << dir.string() << ")\n";
}

int do_sample(const ExperimentConfig& cfg, std::size_t n, std::size_t fine_factor,
              bool with_lift, bool with_q) {
    warn_band(cfg);
    const HurstParam hurst(cfg.hurst);
    const UniformGrid grid(cfg.horizon, n);
    const fs::path dir(cfg.outdir);
    if (fine_factor > 1) {
        const UniformGrid fine_grid(cfg.horizon, n * fine_factor);
        const auto fine = fbm::sample_fbm(hurst, fine_grid, cfg.noise_dim, cfg.seed);
        const auto path = fbm::refine_subsample(fine, fine_factor);
        write_csv_file(dir / "path.csv", [&](std::ostream& os) { fbm::write_csv(path, os); });
        const auto lift = roughpath::level2_fine_approx(fine, fine_factor);
        if (with_lift)
            write_csv_file(dir / "lift.csv",
                           [&](std::ostream& os) { roughpath::write_lift_csv(lift, os); });
        if (with_q) {
            const auto q = roughpath::q_process(lift, hurst);
            write_csv_file(dir / "q.csv",
                           [&](std::ostream& os) { roughpath::write_q_csv(q, os); });
        }
    } else {
        const auto path = fbm::sample_fbm(hurst, grid, cfg.noise_dim, cfg.seed);
        write_csv_file(dir / "path.csv", [&](std::ostream& os) { fbm::write_csv(path, os); });
        const auto lift = roughpath::level2_diagonal(path);
        if (with_lift)
            write_csv_file(dir / "lift.csv",
                           [&](std::ostream& os) { roughpath::write_lift_csv(lift, os); });
        if (with_q) {
            const auto q = roughpath::q_process(lift, hurst);
            write_csv_file(dir / "q.csv",
                           [&](std::ostream& os) { roughpath::write_q_csv(q, os); });
        }
    }
    std::cout << "wrote " << (dir / "path.csv").string() << "\n";
    return 0;
}

int do_greedy(const ExperimentConfig& cfg, std::size_t n, std::size_t fine_factor) {
    warn_band(cfg);
    const HurstParam hurst(cfg.hurst);
    const double p = cfg.resolved_p();
    const auto lift = [&] {
        if (cfg.noise_dim == 1) {
            const UniformGrid grid(cfg.horizon, n);
            return roughpath::level2_diagonal(
                fbm::sample_fbm(hurst, grid, 1, cfg.seed));
        }
        const UniformGrid fine_grid(cfg.horizon, n * fine_factor);
        return roughpath::level2_fine_approx(
            fbm::sample_fbm(hurst, fine_grid, cfg.noise_dim, cfg.seed), fine_factor);
    }();
    const auto q = roughpath::q_process(lift, hurst);
    const auto omega = roughpath::control_omega(lift, q, p);
    const auto part = greedy::greedy_sequence(omega, cfg.greedy_alpha);
    const auto counts = greedy::classify_counts(part);
    const auto prods = greedy::m_products(part, lift, 1.0, hurst);
    write_csv_file(fs::path(cfg.outdir) / "partition.csv",
                   [&](std::ostream& os) { greedy::write_csv(part, lift.grid(), os); });
    std::cout << "greedy: " << part.intervals() << " intervals, |S0|=" << counts[0]
              << " |S1|=" << counts[1] << " |S2|=" << counts[2] << ", M0=" << fmt17(prods.m0)
              << " M1=" << fmt17(prods.m1) << " M2=" << fmt17(prods.m2) << "\n";
    return 0;
}

int do_sewing(const ExperimentConfig& cfg, std::size_t n, std::size_t count) {
    warn_band(cfg);
    const fs::path dir(cfg.outdir);
    fs::create_directories(dir);
    std::ofstream out(dir / "sewing_report.csv", std::ios::binary);
    bool all_pass = true;
    for (std::uint64_t rep = 0; rep < count; ++rep) {
        const auto report = davie_sewing_check(cfg, n, rep);
        const UniformGrid grid(cfg.horizon, n);
        if (rep == 0)
            sewing::write_csv(report, grid, out);
        else {
            // write_csv emits a header; append subsequent rows by hand.
            std::ostringstream ss;
            sewing::write_csv(report, grid, ss);
            const std::string text = ss.str();
            out << text.substr(text.find('\n') + 1);
        }
        all_pass = all_pass && report.verdict == sewing::Verdict::pass;
    }
    std::cout << "sewing: " << count << " instantiation(s), "
              << (all_pass ? "all PASS" : "FAILURES present") << " ("
              << (dir / "sewing_report.csv").string() << ")\n";
    return all_pass ? 0 : 2;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Modified Euler scheme for rough SDEs driven by fBm: simulation, "
                 "rough-path diagnostics and convergence-rate experiments"};
    app.require_subcommand(1);

    CommonOpts opt;
    std::size_t sample_n = 256, fine_factor = 1, greedy_fine = 64, sewing_n = 128,
                sewing_count = 1;
    bool with_lift = false, with_q = false;

    auto* sample = app.add_subcommand("sample", "sample an fBm path to CSV");
    add_common(sample, opt);
    sample->add_option("--n", sample_n, "grid step count");
    sample->add_option("--fine-factor", fine_factor,
                       "refinement for the piecewise-linear lift (1 = diagonal lift)");
    sample->add_flag("--lift", with_lift, "also write the level-2 lift CSV");
    sample->add_flag("--q", with_q, "also write the q-process CSV");

    auto* strong = app.add_subcommand("strong", "strong convergence rate experiment");
    add_common(strong, opt);
    auto* weak = app.add_subcommand("weak", "weak convergence rate experiment");
    add_common(weak, opt);
    auto* qscale = app.add_subcommand("qscale", "q-process scaling experiment");
    add_common(qscale, opt);
    auto* rates_all = app.add_subcommand("rates-all", "strong + weak + qscale in one run");
    add_common(rates_all, opt);

    auto* greedy_cmd = app.add_subcommand("greedy", "greedy partition of a sampled control");
    add_common(greedy_cmd, opt);
    greedy_cmd->add_option("--n", sample_n, "grid step count");
    greedy_cmd->add_option("--fine-factor", greedy_fine, "lift refinement when d >= 2");

    auto* sewing_cmd =
        app.add_subcommand("sewing", "verify the discrete sewing bound on Davie remainders");
    add_common(sewing_cmd, opt);
    sewing_cmd->add_option("--n", sewing_n, "grid step count");
    sewing_cmd->add_option("--count", sewing_count, "number of sampled paths");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const ExperimentConfig cfg = opt.resolve();
        if (sample->parsed()) return do_sample(cfg, sample_n, fine_factor, with_lift, with_q);
        if (greedy_cmd->parsed()) return do_greedy(cfg, sample_n, greedy_fine);
        if (sewing_cmd->parsed()) return do_sewing(cfg, sewing_n, sewing_count);

        warn_band(cfg);
        if (strong->parsed()) {
            emit_rates(cfg, strong_error(cfg), "");
            write_file(fs::path(cfg.outdir) / "plot_rates.py", kPlotScript);
            return 0;
        }
        if (weak->parsed()) {
            emit_rates(cfg, weak_error(cfg), "");
            write_file(fs::path(cfg.outdir) / "plot_rates.py", kPlotScript);
            return 0;
        }
        if (qscale->parsed()) {
            emit_rates(cfg, q_scaling(cfg), "");
            write_file(fs::path(cfg.outdir) / "plot_rates.py", kPlotScript);
            return 0;
        }
        if (rates_all->parsed()) {
            emit_rates(cfg, strong_error(cfg), "strong");
            emit_rates(cfg, weak_error(cfg), "weak");
            emit_rates(cfg, q_scaling(cfg), "qscale");
            write_file(fs::path(cfg.outdir) / "plot_rates.py", kPlotScript);
            return 0;
        }
        return 1;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "experiment error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace rsde::harness
