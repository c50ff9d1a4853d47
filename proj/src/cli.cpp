#include "homog/cli.hpp"

#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "homog/ap_core.hpp"
#include "homog/errors.hpp"
#include "homog/harness.hpp"
#include "textio.hpp"

namespace homog {

namespace {

using textio::g17;

struct CommonOpts {
    std::string config_path;
    std::string out_override;
    std::string seed_override;
    bool quiet = false;
};

struct Resolved {
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    bool quiet = false;
};

Resolved resolve(const Config& cfg, const CommonOpts& c) {
    Resolved r;
    r.out_dir = c.out_override.empty() ? cfg.get_string("run.out_dir", ".") : c.out_override;
    if (c.seed_override.empty()) {
        r.seed = std::uint64_t(cfg.get_int("run.seed", 1));
    } else {
        try {
            r.seed = std::stoull(c.seed_override);
        } catch (const std::exception&) {
            throw ConfigError("--seed needs a nonnegative integer");
        }
    }
    r.quiet = c.quiet;
    return r;
}

Experiment load_experiment(const Config& cfg, const Resolved& r) {
    Experiment ex = build_experiment(cfg);
    ex.out_dir = r.out_dir;
    ex.seed = r.seed;
    return ex;
}

// [function] section: dim, constant, term.N, null.
WStarAPFunction build_function(const Config& cfg) {
    const int dim = int(cfg.get_int("function.dim", 1));
    if (dim != 1 && dim != 2) throw ConfigError("function.dim must be 1 or 2");
    TrigPolynomial ap = build_trig_profile(cfg, "function.", dim);
    NullFunction null = cfg.has("function.null") ? build_null_spec(cfg, "function.null", dim)
                                                 : NullFunction::zero(dim);
    return WStarAPFunction(std::move(ap), std::move(null));
}

ScalarField as_scalar_field(const WStarAPFunction& fn) {
    return [fn](std::span<const double> y) { return fn(y); };
}

std::string matrix_entries(const SymMatrix& m) {
    if (m.dim() == 1) return g17(m(0, 0));
    return g17(m(0, 0)) + " " + g17(m(0, 1)) + " " + g17(m(1, 1));
}

int cmd_meanvalue(const Config& cfg, const Resolved& r) {
    const int dim = int(cfg.get_int("function.dim", 1));
    const WStarAPFunction fn = build_function(cfg);
    const ScalarField field = as_scalar_field(fn);
    const std::vector<double> radii = cfg.get_doubles("meanvalue.radii", {50.0, 100.0, 200.0});
    const long samples = long(cfg.get_int("meanvalue.samples_per_radius", 20000));
    const double tol = cfg.get_double("meanvalue.tol", 1e-2);

    std::vector<double> per_radius(radii.size(), 0.0);
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double sub[3] = {0.25 * radii[i], 0.5 * radii[i], radii[i]};
        per_radius[i] = mean_value_numeric(field, dim, sub, samples,
                                           std::numeric_limits<double>::infinity())
                            .value;
    }
    const MeanValueEstimate est = mean_value_numeric(field, dim, radii, samples, tol);

    std::ofstream out = textio::open_csv(r.out_dir, "meanvalue.csv");
    out << "# mean-value dim=" << dim << " value=" << g17(est.value)
        << " tail_spread=" << g17(est.tail_spread) << "\n";
    out << "radius,average\n";
    for (std::size_t i = 0; i < radii.size(); ++i) {
        out << g17(radii[i]) << "," << g17(per_radius[i]) << "\n";
    }
    if (!r.quiet) {
        std::printf("mean value = %.6f (tail spread %.2e over %zu radii)\n", est.value,
                    est.tail_spread, radii.size());
    }
    return 0;
}

int cmd_seminorm(const Config& cfg, const Resolved& r) {
    const int dim = int(cfg.get_int("function.dim", 1));
    const WStarAPFunction fn = build_function(cfg);
    const ScalarField field = as_scalar_field(fn);
    const double p = cfg.get_double("seminorm.p", 2.0);
    const std::vector<double> lengths = cfg.get_doubles("seminorm.lengths", {25.0, 50.0, 100.0});
    const long samples = long(cfg.get_int("seminorm.samples_per_length", 20000));
    const double tol = cfg.get_double("seminorm.tol", 1e-2);

    std::vector<double> per_length(lengths.size(), 0.0);
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double sub[3] = {0.25 * lengths[i], 0.5 * lengths[i], lengths[i]};
        per_length[i] = besicovitch_seminorm(field, dim, p, sub, samples,
                                             std::numeric_limits<double>::infinity())
                            .value;
    }
    const BesicovitchEstimate est = besicovitch_seminorm(field, dim, p, lengths, samples, tol);

    std::ofstream out = textio::open_csv(r.out_dir, "seminorm.csv");
    out << "# seminorm dim=" << dim << " p=" << g17(p) << " value=" << g17(est.value)
        << " tail_spread=" << g17(est.tail_spread) << "\n";
    out << "length,value\n";
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        out << g17(lengths[i]) << "," << g17(per_length[i]) << "\n";
    }
    if (!r.quiet) {
        std::printf("L%g seminorm = %.6f (tail spread %.2e over %zu lengths)\n", p, est.value,
                    est.tail_spread, lengths.size());
    }
    return 0;
}

int cmd_decompose(const Config& cfg, const Resolved& r) {
    const int dim = int(cfg.get_int("function.dim", 1));
    const WStarAPFunction fn = build_function(cfg);
    const ScalarField field = as_scalar_field(fn);

    std::vector<std::vector<double>> bases;
    for (const std::string& key : cfg.keys_with_prefix("decompose.base")) {
        std::vector<double> base = cfg.get_doubles(key);
        if (base.empty()) throw ConfigError(key + " needs at least one frequency");
        bases.push_back(std::move(base));
    }
    if (bases.empty()) throw ConfigError("decompose needs decompose.base1 (frequency base)");

    ExtractOptions opts;
    if (cfg.has("decompose.schedule")) {
        opts.order_schedule.clear();
        for (const double v : cfg.get_doubles("decompose.schedule")) {
            opts.order_schedule.push_back(int(v));
        }
    }
    opts.lattice_cap = int(cfg.get_int("decompose.lattice_cap", opts.lattice_cap));
    opts.noise_floor = cfg.get_double("decompose.noise_floor", opts.noise_floor);
    opts.mean_radius = cfg.get_double("decompose.mean_radius", opts.mean_radius);
    opts.mean_dx = cfg.get_double("decompose.mean_dx", opts.mean_dx);
    opts.sup_tol = cfg.get_double("decompose.sup_tol", opts.sup_tol);
    opts.sup_half_width = cfg.get_double("decompose.sup_half_width", opts.sup_half_width);
    opts.sup_points = int(cfg.get_int("decompose.sup_points", opts.sup_points));

    const TrigPolynomial ap = extract_ap_component(field, dim, bases, opts);

    std::ofstream out = textio::open_csv(r.out_dir, "decompose.csv");
    out << "# ap-component dim=" << dim << " constant=" << g17(ap.constant())
        << " n_terms=" << ap.terms().size() << "\n";
    out << (dim == 1 ? "freq1,cos,sin\n" : "freq1,freq2,cos,sin\n");
    for (const TrigPolynomial::Term& t : ap.terms()) {
        for (const double f : t.freq) out << g17(f) << ",";
        out << g17(t.cos_coef) << "," << g17(t.sin_coef) << "\n";
    }
    if (!r.quiet) {
        std::printf("almost periodic part: %zu terms, constant %.6f\n", ap.terms().size(),
                    ap.constant());
    }
    return 0;
}

int cmd_birkhoff(const Config& cfg, const Resolved& r) {
    const auto ens = build_ensemble(cfg);
    const std::string channel = cfg.get_string("birkhoff.channel");
    const int n_phases = int(cfg.get_int("birkhoff.n_phases", 5));
    const std::vector<double> radii =
        cfg.get_doubles("birkhoff.radii", {100.0, 300.0, 1000.0});
    const long samples = long(cfg.get_int("birkhoff.samples_per_radius", 20000));
    const double tol = cfg.get_double("birkhoff.tol", 1e-2);

    const BirkhoffReport rep = birkhoff_compare(*ens, channel, n_phases, radii, samples, r.seed, tol);

    std::ofstream out = textio::open_csv(r.out_dir, "birkhoff.csv");
    out << "# birkhoff channel=" << channel << " ensemble_mean=" << g17(rep.ensemble_mean)
        << " max_gap=" << g17(rep.max_gap) << " tol=" << g17(tol) << "\n";
    out << "phase_index,spatial_mean\n";
    for (std::size_t i = 0; i < rep.spatial_means.size(); ++i) {
        out << i << "," << g17(rep.spatial_means[i]) << "\n";
    }
    if (!r.quiet) {
        std::printf("ensemble mean %.6f, max orbit-average gap %.3e over %d phases\n",
                    rep.ensemble_mean, rep.max_gap, n_phases);
    }
    return 0;
}

int cmd_ergodicity(const Config& cfg, const Resolved& r) {
    const auto ens = build_ensemble(cfg);
    const std::string channel = cfg.get_string("ergodicity.channel");
    const std::vector<double> t_schedule = cfg.get_doubles("ergodicity.t_schedule");
    if (t_schedule.empty()) throw ConfigError("ergodicity.t_schedule is empty");
    const TrigPolynomial& f = ens->profile(channel);

    std::ofstream out = textio::open_csv(r.out_dir, "ergodicity.csv");
    out << "# ergodicity channel=" << channel << "\n";
    out << "t,residual\n";
    double last = 0.0;
    for (const double t : t_schedule) {
        const double one[1] = {t};
        last = ergodicity_residual(*ens, f, one);
        out << g17(t) << "," << g17(last) << "\n";
    }
    if (!r.quiet) {
        std::printf("mean-square ball-average residual %.3e at t = %g\n", last,
                    t_schedule.back());
    }
    return 0;
}

int cmd_audit(const Config& cfg, const Resolved& r) {
    const Experiment ex = load_experiment(cfg, r);
    const EllipticOperator& op = ex.require_op();
    const Phase omega = ex.phase();
    const int n_samples = int(cfg.get_int("audit.n_samples", 200));

    const EllipticityMargins margins = ellipticity_audit(op, omega, n_samples, r.seed);
    const double ratio = modulus_audit(op, omega, n_samples, r.seed);

    std::ofstream out = textio::open_csv(r.out_dir, "audit.csv");
    out << "# audit n_samples=" << n_samples << "\n";
    out << "lower_margin,upper_margin,modulus_ratio\n";
    out << g17(margins.lower) << "," << g17(margins.upper) << "," << g17(ratio) << "\n";
    if (!r.quiet) {
        std::printf("ellipticity margins: lower %.3e, upper %.3e; modulus ratio %.3f\n",
                    margins.lower, margins.upper, ratio);
    }
    return 0;
}

int cmd_solve(const Config& cfg, const Resolved& r) {
    const Experiment ex = load_experiment(cfg, r);
    const EllipticOperator& op = ex.require_op();
    const Box& U = ex.require_domain();
    const ScalarField g = ex.require_boundary().as_field();
    if (!(ex.solve_h > 0.0)) throw ConfigError("solve.h must be positive");

    const DiscreteSolution sol = solve_dirichlet(op, ex.phase(), ex.solve_eps, U, g, ex.solve_h,
                                                 ex.solve_tol, ex.solve_max_iter);
    if (!sol.converged) {
        throw NonConvergent("oscillatory solve stopped after " + std::to_string(sol.iterations) +
                            " iterations at residual " + g17(sol.residual_norm));
    }

    std::ofstream out = textio::open_csv(r.out_dir, "solution.csv");
    out << "# solution eps=" << g17(ex.solve_eps) << " h=" << g17(ex.solve_h)
        << " iterations=" << sol.iterations << " residual=" << g17(sol.residual_norm) << "\n";
    out << (U.dim() == 1 ? "x,u\n" : "x,y,u\n");
    const Grid& grid = sol.grid;
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            out << g17(grid.x(0, i));
            if (U.dim() == 2) out << "," << g17(grid.x(1, j));
            out << "," << g17(sol.values[std::size_t(grid.index(i, j))]) << "\n";
        }
    }
    if (!r.quiet) {
        std::printf("solved %lld nodes: %lld iterations, residual %.3e\n",
                    static_cast<long long>(grid.nodes()),
                    static_cast<long long>(sol.iterations), sol.residual_norm);
    }
    return 0;
}

int cmd_effective(const Config& cfg, const Resolved& r) {
    const Experiment ex = load_experiment(cfg, r);
    const EllipticOperator& op = ex.require_op();
    const EffectiveEstimate est = estimate_effective(op, ex.phase(), ex.matrix, ex.effective);

    std::ofstream out = textio::open_csv(r.out_dir, "effective.csv");
    out << "# effective fbar=" << g17(est.fbar) << " residual=" << g17(est.residual)
        << " extrapolation=" << g17(est.extrapolation_residual)
        << " boundary=" << g17(est.boundary_influence)
        << " warning=" << (est.truncation_warning ? 1 : 0) << "\n";
    out << "delta,damped_center\n";
    for (std::size_t i = 0; i < est.deltas.size(); ++i) {
        out << g17(est.deltas[i]) << "," << g17(est.damped_center[i]) << "\n";
    }
    if (!r.quiet) {
        std::printf("Fbar(%s) = %.4f (residual %.1e)\n", matrix_entries(ex.matrix).c_str(),
                    est.fbar, est.residual);
    }
    return 0;
}

int cmd_omega_check(const Config& cfg, const Resolved& r) {
    const Experiment ex = load_experiment(cfg, r);
    const EllipticOperator& op = ex.require_op();
    const int n_phases = int(cfg.get_int("omega_check.n_phases", 5));
    const SpreadReport rep = omega_independence_check(op, ex.matrix, ex.effective, n_phases, r.seed);

    std::ofstream out = textio::open_csv(r.out_dir, "omega_check.csv");
    out << "# omega-check spread=" << g17(rep.spread) << " max_residual=" << g17(rep.max_residual)
        << " n_phases=" << n_phases << "\n";
    out << "phase_index,fbar\n";
    for (std::size_t i = 0; i < rep.values.size(); ++i) {
        out << i << "," << g17(rep.values[i]) << "\n";
    }
    if (!r.quiet) {
        std::printf("Fbar spread %.3e over %d phases (max residual %.3e)\n", rep.spread, n_phases,
                    rep.max_residual);
    }
    return 0;
}

int cmd_study(const Config& cfg, const Resolved& r) {
    const Experiment ex = load_experiment(cfg, r);
    const ConvergenceReport rep = run_convergence_study(ex);
    if (!r.quiet) {
        for (const StudyRow& row : rep.rows) {
            std::printf("eps %-10.6g sup_error %.6e (%lld iterations)\n", row.eps, row.sup_error,
                        static_cast<long long>(row.iterations));
        }
        std::string ratios;
        for (const double q : rep.error_ratios()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%.3f", ratios.empty() ? "" : " ", q);
            ratios += buf;
        }
        std::printf("successive error ratios: %s\n", ratios.c_str());
        std::printf("table residual max %.3e (claimed tolerance %.1e)\n", rep.table_residual_max,
                    rep.claimed_tolerance);
        std::printf("wrote study_report.csv, study_loglog.csv to %s\n", ex.out_dir.c_str());
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"numerical laboratory for quasi-periodic elliptic homogenization"};
    app.require_subcommand(1);

    CommonOpts common;
    std::function<int(const Config&, const Resolved&)> action;

    auto add = [&](const std::string& name, const std::string& help,
                   int (*fn)(const Config&, const Resolved&)) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", common.config_path, "experiment description file")
            ->required();
        sub->add_option("--out", common.out_override, "output directory (overrides run.out_dir)");
        sub->add_option("--seed", common.seed_override, "RNG seed (overrides run.seed)");
        sub->add_flag("--quiet", common.quiet, "suppress the stdout summary");
        sub->callback([&action, fn] { action = fn; });
        return sub;
    };

    add("meanvalue", "ball averages of a declared function over a radius schedule", cmd_meanvalue);
    add("seminorm", "Besicovitch p-seminorm of a declared function", cmd_seminorm);
    add("decompose", "extract the almost periodic component on a declared frequency base",
        cmd_decompose);
    add("birkhoff", "compare ensemble means with per-phase orbit averages", cmd_birkhoff);
    add("ergodicity", "mean-square ball-average residual of an ensemble channel", cmd_ergodicity);
    add("audit", "sampled ellipticity and continuity-modulus checks of an operator", cmd_audit);
    add("solve", "solve the oscillatory Dirichlet problem at fixed epsilon", cmd_solve);
    add("effective", "estimate the effective operator at one Hessian matrix", cmd_effective);
    add("omega-check", "spread of the effective value across sampled phases", cmd_omega_check);
    add("study", "epsilon-convergence study against the homogenized solution", cmd_study);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const Config cfg = Config::parse_file(common.config_path);
        return action(cfg, resolve(cfg, common));
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n(run with --help for usage)\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("homog");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(storage.size());
    for (const std::string& s : storage) argv.push_back(s.c_str());
    return run_cli(int(argv.size()), argv.data());
}

}  // namespace homog
