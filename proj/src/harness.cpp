#include "homog/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "homog/errors.hpp"
#include "textio.hpp"

namespace homog {

namespace {

using textio::g17;

// Re-throw module errors with the pipeline stage named, preserving the
// validation/numerical split the CLI exit codes depend on.
template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("stage ") + name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("stage ") + name + ": " + e.what());
    }
}

std::string form_tag_of(EllipticOperator::Form form) {
    switch (form) {
        case EllipticOperator::Form::LinearNonDiv: return "linear";
        case EllipticOperator::Form::PucciPlus: return "pucci_plus";
        case EllipticOperator::Form::PucciMinus: return "pucci_minus";
        case EllipticOperator::Form::BellmanMin: return "bellman_min";
    }
    throw ValidationError("unmapped operator form");
}

}  // namespace

// ---------------------------------------------------------------------------
// BoundaryData
// ---------------------------------------------------------------------------

BoundaryData BoundaryData::affine(int dim, double c0, std::vector<double> grad) {
    if (dim != 1 && dim != 2) throw ValidationError("boundary data supports dimensions 1 and 2");
    if (grad.size() != std::size_t(dim)) {
        throw ValidationError("boundary gradient needs one entry per axis");
    }
    BoundaryData b;
    b.tag_ = "affine";
    b.dim_ = dim;
    b.c0_ = c0;
    b.grad_ = std::move(grad);
    b.hess_ = SymMatrix(dim);
    return b;
}

BoundaryData BoundaryData::quadratic(int dim, double c0, std::vector<double> grad,
                                     SymMatrix hess) {
    BoundaryData b = affine(dim, c0, std::move(grad));
    if (hess.dim() != dim) throw ValidationError("boundary Hessian dimension mismatch");
    b.tag_ = "quadratic";
    b.hess_ = hess;
    b.has_hess_ = true;
    return b;
}

double BoundaryData::operator()(std::span<const double> x) const {
    if (x.size() != std::size_t(dim_)) throw ValidationError("boundary point dimension mismatch");
    double v = c0_;
    for (int i = 0; i < dim_; ++i) v += grad_[std::size_t(i)] * x[std::size_t(i)];
    if (has_hess_) {
        for (int i = 0; i < dim_; ++i) {
            for (int j = 0; j < dim_; ++j) {
                v += 0.5 * hess_(i, j) * x[std::size_t(i)] * x[std::size_t(j)];
            }
        }
    }
    return v;
}

double BoundaryData::operator()(double x) const { return (*this)(std::span<const double>(&x, 1)); }

ScalarField BoundaryData::as_field() const {
    return [copy = *this](std::span<const double> x) { return copy(x); };
}

// ---------------------------------------------------------------------------
// Experiment accessors
// ---------------------------------------------------------------------------

const EllipticOperator& Experiment::require_op() const {
    if (!op) throw ConfigError("this command needs an [operator] section");
    return *op;
}

const Box& Experiment::require_domain() const {
    if (!domain) throw ConfigError("this command needs a [domain] section");
    return *domain;
}

const BoundaryData& Experiment::require_boundary() const {
    if (!boundary) throw ConfigError("this command needs a [boundary] section");
    return *boundary;
}

Phase Experiment::phase() const {
    if (pinned_phase) return *pinned_phase;
    if (ensemble) return ensemble->sample_phase(seed);
    return Phase{};
}

// ---------------------------------------------------------------------------
// Config -> library objects
// ---------------------------------------------------------------------------

TrigPolynomial build_trig_profile(const Config& cfg, const std::string& base, int dim) {
    TrigPolynomial profile(dim, cfg.get_double(base + "constant", 0.0));
    for (const std::string& key : cfg.keys_with_prefix(base + "term.")) {
        const std::vector<double> row = cfg.get_doubles(key);
        if (row.size() != std::size_t(dim) + 2) {
            throw ConfigError(key + " needs " + std::to_string(dim) +
                              " frequency entries plus cos and sin");
        }
        profile.add_term(std::span<const double>(row.data(), std::size_t(dim)),
                         row[row.size() - 2], row[row.size() - 1]);
    }
    return profile;
}

NullFunction build_null_spec(const Config& cfg, const std::string& key, int dim) {
    const std::vector<std::string> toks = cfg.get_strings(key);
    const std::string kind = toks[0];
    if (kind == "none") return NullFunction::zero(dim);
    if (kind == "bumps") {
        const std::size_t stride = std::size_t(dim) + 2;  // amp, center..., sigma
        if (toks.size() < 1 + stride || (toks.size() - 1) % stride != 0) {
            throw ConfigError(key + " bumps need amp, " + std::to_string(dim) +
                              " center entries, sigma per bump");
        }
        std::vector<NullFunction::Bump> bumps;
        for (std::size_t at = 1; at < toks.size(); at += stride) {
            NullFunction::Bump bump;
            try {
                bump.amplitude = std::stod(toks[at]);
                for (int a = 0; a < dim; ++a) {
                    bump.center.push_back(std::stod(toks[at + 1 + std::size_t(a)]));
                }
                bump.sigma = std::stod(toks[at + stride - 1]);
            } catch (const std::exception&) {
                throw ConfigError(key + " has a non-numeric bump entry");
            }
            bumps.push_back(std::move(bump));
        }
        return NullFunction::gaussian_bumps(dim, std::move(bumps));
    }
    if (kind == "exp") {
        if (toks.size() != 3) throw ConfigError(key + " exp needs amplitude and rate");
        try {
            return NullFunction::exponential_envelope(dim, std::stod(toks[1]), std::stod(toks[2]));
        } catch (const std::exception&) {
            throw ConfigError(key + " exp has non-numeric entries");
        }
    }
    throw ConfigError(key + " kind must be none, bumps, or exp");
}

std::shared_ptr<const QuasiPeriodicEnsemble> build_ensemble(const Config& cfg) {
    const int k = int(cfg.get_int("ensemble.torus_dim"));
    const int d = int(cfg.get_int("ensemble.space_dim"));
    const std::vector<double> lam = cfg.get_doubles("ensemble.freq_matrix");
    if (lam.size() != std::size_t(k) * std::size_t(d)) {
        throw ConfigError("ensemble.freq_matrix needs torus_dim * space_dim entries");
    }
    const int m_max = int(cfg.get_int("ensemble.m_max", 8));
    auto ens = std::make_shared<QuasiPeriodicEnsemble>(k, d, lam, m_max);

    std::set<std::string> names;
    for (const std::string& key : cfg.keys_with_prefix("channel.")) {
        const std::string rest = key.substr(8);
        const auto dot = rest.find('.');
        if (dot == std::string::npos) {
            throw ConfigError("channel keys look like channel.<name>.<field>: " + key);
        }
        names.insert(rest.substr(0, dot));
    }
    for (const std::string& name : names) {
        const std::string base = "channel." + name + ".";
        ens->add_channel(name, build_trig_profile(cfg, base, k));
        if (cfg.has(base + "null")) {
            ens->add_null_profile(name, build_null_spec(cfg, base + "null", d));
        }
    }
    return ens;
}

EllipticOperator build_operator(const Config& cfg,
                                std::shared_ptr<const QuasiPeriodicEnsemble> ens) {
    const std::string form = cfg.get_string("operator.form");
    const double lambda = cfg.get_double("operator.lambda");
    const double Lambda = cfg.get_double("operator.Lambda");
    ModulusSpec mod;
    mod.scale = cfg.get_double("operator.modulus_scale", mod.scale);
    mod.power = cfg.get_double("operator.modulus_power", mod.power);
    mod.gamma = cfg.get_double("operator.modulus_gamma", mod.gamma);

    auto need_ens = [&]() {
        if (!ens) throw ConfigError("operator form " + form + " needs an [ensemble] section");
        return ens;
    };

    if (form == "pucci_plus" || form == "pucci_minus") {
        const int dim = int(cfg.get_int("operator.dim", ens ? ens->space_dim() : 0));
        if (dim != 1 && dim != 2) throw ConfigError("operator.dim must be 1 or 2");
        return form == "pucci_plus" ? EllipticOperator::pucci_plus(dim, lambda, Lambda)
                                    : EllipticOperator::pucci_minus(dim, lambda, Lambda);
    }
    if (form == "linear_constant") {
        const std::vector<double> c = cfg.get_doubles("operator.coeff");
        SymMatrix a{1};
        if (c.size() == 1) {
            a = SymMatrix::of_1d(c[0]);
        } else if (c.size() == 3) {
            a = SymMatrix::of_2d(c[0], c[1], c[2]);
        } else {
            throw ConfigError("operator.coeff needs 1 entry (1-D) or 3 entries (2-D)");
        }
        return EllipticOperator::linear_constant(a, lambda, Lambda);
    }
    if (form == "linear_scalar") {
        return EllipticOperator::linear_scalar(need_ens(), cfg.get_string("operator.channel"),
                                               lambda, Lambda, mod);
    }
    if (form == "linear_matrix") {
        const std::vector<std::string> ch = cfg.get_strings("operator.channels");
        if (ch.size() != 3) throw ConfigError("operator.channels needs 3 names (a11 a12 a22)");
        return EllipticOperator::linear_matrix(need_ens(), {ch[0], ch[1], ch[2]}, lambda, Lambda,
                                               mod);
    }
    if (form == "bellman_min") {
        std::vector<EllipticOperator::BellmanBranch> branches;
        for (const std::string& key : cfg.keys_with_prefix("operator.branch.")) {
            const std::vector<std::string> toks = cfg.get_strings(key);
            if (toks.size() != 3 || (toks[1] != "const" && toks[1] != "channel")) {
                throw ConfigError(key + " looks like '<coeff_channel> const <value>' or "
                                        "'<coeff_channel> channel <name>'");
            }
            EllipticOperator::BellmanBranch br;
            br.coeff_channel = toks[0];
            if (toks[1] == "const") {
                try {
                    br.forcing_const = std::stod(toks[2]);
                } catch (const std::exception&) {
                    throw ConfigError(key + " has a non-numeric forcing constant");
                }
            } else {
                br.forcing_channel = toks[2];
            }
            branches.push_back(std::move(br));
        }
        if (branches.empty()) throw ConfigError("bellman_min needs operator.branch.* entries");
        return EllipticOperator::bellman_min(need_ens(), std::move(branches), lambda, Lambda, mod);
    }
    throw ConfigError("unknown operator form: " + form);
}

Box build_domain(const Config& cfg) {
    const std::vector<double> lo = cfg.get_doubles("domain.lo");
    const std::vector<double> hi = cfg.get_doubles("domain.hi");
    if (lo.size() != hi.size() || lo.empty() || lo.size() > 2) {
        throw ConfigError("domain.lo and domain.hi need matching 1 or 2 entries");
    }
    for (std::size_t a = 0; a < lo.size(); ++a) {
        if (!(hi[a] > lo[a])) throw ConfigError("domain must have positive extent on every axis");
    }
    return Box{lo, hi};
}

BoundaryData build_boundary(const Config& cfg, int dim) {
    const std::string kind = cfg.get_string("boundary.kind", "affine");
    const double c0 = cfg.get_double("boundary.value", 0.0);
    std::vector<double> grad(std::size_t(dim), 0.0);
    if (cfg.has("boundary.grad")) {
        grad = cfg.get_doubles("boundary.grad");
        if (grad.size() != std::size_t(dim)) {
            throw ConfigError("boundary.grad needs one entry per axis");
        }
    }
    if (kind == "affine") return BoundaryData::affine(dim, c0, std::move(grad));
    if (kind == "quadratic") {
        const std::vector<double> hv = cfg.get_doubles("boundary.hess");
        SymMatrix hess{1};
        if (dim == 1 && hv.size() == 1) {
            hess = SymMatrix::of_1d(hv[0]);
        } else if (dim == 2 && hv.size() == 3) {
            hess = SymMatrix::of_2d(hv[0], hv[1], hv[2]);
        } else {
            throw ConfigError("boundary.hess needs 1 entry (1-D) or 3 entries (2-D)");
        }
        return BoundaryData::quadratic(dim, c0, std::move(grad), hess);
    }
    throw ConfigError("boundary.kind must be affine or quadratic");
}

EffectiveOptions build_effective_options(const Config& cfg) {
    EffectiveOptions opts;
    opts.delta_schedule = cfg.get_doubles("effective.delta_schedule", opts.delta_schedule);
    opts.h = cfg.get_double("effective.h", opts.h);
    opts.tol = cfg.get_double("effective.tol", opts.tol);
    opts.max_iter = cfg.get_int("effective.max_iter", opts.max_iter);
    opts.contraction_factor = cfg.get_double("effective.contraction", opts.contraction_factor);
    opts.domain.c = cfg.get_double("effective.domain_c", opts.domain.c);
    if (cfg.has("effective.domain_L")) {
        opts.domain.fixed_half_width = cfg.get_double("effective.domain_L");
    }
    return opts;
}

SymMatrix build_matrix(const Config& cfg, int dim) {
    if (!cfg.has("effective.matrix")) return SymMatrix::identity(dim);
    const std::vector<double> m = cfg.get_doubles("effective.matrix");
    if (dim == 1 && m.size() == 1) return SymMatrix::of_1d(m[0]);
    if (dim == 2 && m.size() == 3) return SymMatrix::of_2d(m[0], m[1], m[2]);
    throw ConfigError("effective.matrix needs 1 entry (1-D) or 3 entries (m11 m12 m22, 2-D)");
}

std::vector<std::vector<double>> build_table_axes(const Config& cfg, int dim) {
    if (!cfg.has("table.axis1")) return {};
    const int n_axes = dim == 1 ? 1 : 3;
    std::vector<std::vector<double>> axes;
    for (int a = 1; a <= n_axes; ++a) {
        const std::string key = "table.axis" + std::to_string(a);
        std::vector<double> axis = cfg.get_doubles(key);
        if (axis.size() < 2 || !std::is_sorted(axis.begin(), axis.end()) ||
            std::adjacent_find(axis.begin(), axis.end()) != axis.end()) {
            throw ConfigError(key + " needs at least 2 strictly increasing values");
        }
        axes.push_back(std::move(axis));
    }
    return axes;
}

Experiment build_experiment(const Config& cfg) {
    Experiment ex;
    if (cfg.has("ensemble.torus_dim")) ex.ensemble = build_ensemble(cfg);
    if (cfg.has("operator.form")) ex.op = build_operator(cfg, ex.ensemble);
    if (cfg.has("domain.lo")) ex.domain = build_domain(cfg);

    const int dim = ex.op ? ex.op->dim() : (ex.domain ? ex.domain->dim() : 1);
    if (ex.op && ex.domain && ex.domain->dim() != dim) {
        throw ConfigError("domain and operator dimensions disagree");
    }
    if (cfg.has("boundary.kind") || cfg.has("boundary.value") || cfg.has("boundary.grad")) {
        ex.boundary = build_boundary(cfg, dim);
    }
    ex.effective = build_effective_options(cfg);
    ex.matrix = build_matrix(cfg, dim);
    ex.table_axes = build_table_axes(cfg, dim);

    if (cfg.has("run.phase")) {
        Phase ph{cfg.get_doubles("run.phase")};
        if (ex.ensemble && ph.angles.size() != std::size_t(ex.ensemble->torus_dim())) {
            throw ConfigError("run.phase needs one angle per torus dimension");
        }
        ex.pinned_phase = std::move(ph);
    }
    ex.seed = std::uint64_t(cfg.get_int("run.seed", 1));
    ex.out_dir = cfg.get_string("run.out_dir", ".");

    if (cfg.has("study.eps_schedule")) ex.eps_schedule = cfg.get_doubles("study.eps_schedule");
    ex.base_cells = long(cfg.get_int("study.base_cells", ex.base_cells));
    if (ex.base_cells < 2) throw ConfigError("study.base_cells must be at least 2");
    ex.study_benchmark = cfg.get_string("study.benchmark", ex.study_benchmark);
    if (ex.study_benchmark != "operator" && ex.study_benchmark != "flux") {
        throw ConfigError("study.benchmark must be operator or flux");
    }
    ex.claimed_tolerance = cfg.get_double("study.claimed_tolerance", ex.claimed_tolerance);
    ex.study_tol = cfg.get_double("study.tol", ex.study_tol);
    ex.study_max_iter = long(cfg.get_int("study.max_iter", ex.study_max_iter));

    ex.solve_eps = cfg.get_double("solve.eps", ex.solve_eps);
    ex.solve_h = cfg.get_double("solve.h", ex.solve_h);
    ex.solve_tol = cfg.get_double("solve.tol", ex.solve_tol);
    ex.solve_max_iter = long(cfg.get_int("solve.max_iter", ex.solve_max_iter));
    return ex;
}

// ---------------------------------------------------------------------------
// Homogenized solve
// ---------------------------------------------------------------------------

namespace {

// Root of the piecewise-linear interpolant of the tabulated 1-D operator;
// uniqueness follows from uniform ellipticity (values strictly increase).
double table_root_1d(const EffectiveTable& table) {
    const std::vector<double>& axis = table.axes()[0];
    std::vector<double> f(axis.size());
    for (std::size_t i = 0; i < axis.size(); ++i) f[i] = table.at({i}).fbar;
    for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
        if (f[i] == 0.0) return axis[i];
        const bool crosses = (f[i] < 0.0 && f[i + 1] >= 0.0) || (f[i] > 0.0 && f[i + 1] <= 0.0);
        if (!crosses) continue;
        return axis[i] + (axis[i + 1] - axis[i]) * (0.0 - f[i]) / (f[i + 1] - f[i]);
    }
    if (f.back() == 0.0) return axis.back();
    throw TableRangeExceeded(
        "tabulated operator has no sign change over the axis; widen the table");
}

void fill_boundary_band(const Grid& grid, const ScalarField& g, std::vector<double>& values,
                        std::vector<double>& trace) {
    std::vector<double> x(std::size_t(grid.dim), 0.0);
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            if (grid.interior(i, j)) continue;
            x[0] = grid.x(0, i);
            if (grid.dim == 2) x[1] = grid.x(1, j);
            const double gv = g(x);
            values[std::size_t(grid.index(i, j))] = gv;
            trace[std::size_t(grid.index(i, j))] = gv;
        }
    }
}

DiscreteSolution solve_hom_1d(const EffectiveTable& table, const Box& U, const ScalarField& g,
                              double h) {
    const double m0 = table_root_1d(table);
    Grid grid = Grid::make(U, h, Stencil::standard(1));
    DiscreteSolution sol;
    sol.grid = grid;
    sol.values.assign(std::size_t(grid.nodes()), 0.0);
    sol.boundary_trace.assign(std::size_t(grid.nodes()), 0.0);
    fill_boundary_band(grid, g, sol.values, sol.boundary_trace);

    // Thomas solve of (u_{i-1} - 2 u_i + u_{i+1}) / h^2 = m0 on the interior.
    const std::int64_t n = grid.n[0];
    const std::int64_t ni = n - 2;
    if (ni > 0) {
        std::vector<double> c(std::size_t(ni), 0.0), d(std::size_t(ni), 0.0);
        const double rhs_const = h * h * m0;
        double diag = -2.0;
        c[0] = 1.0 / diag;
        d[0] = (rhs_const - sol.values[0]) / diag;
        for (std::int64_t i = 1; i < ni; ++i) {
            const double den = diag - c[std::size_t(i - 1)];
            c[std::size_t(i)] = 1.0 / den;
            double rhs = rhs_const;
            if (i == ni - 1) rhs -= sol.values[std::size_t(n - 1)];
            d[std::size_t(i)] = (rhs - d[std::size_t(i - 1)]) / den;
        }
        sol.values[std::size_t(ni)] = d[std::size_t(ni - 1)];
        for (std::int64_t i = ni - 2; i >= 0; --i) {
            sol.values[std::size_t(i + 1)] =
                d[std::size_t(i)] - c[std::size_t(i)] * sol.values[std::size_t(i + 2)];
        }
    }

    double resid = 0.0;
    for (std::int64_t i = 1; i + 1 < n; ++i) {
        const std::vector<double> d2 = discrete_hessian(grid, sol.values, i, 0);
        resid = std::max(resid, std::abs(d2[0] - m0));
    }
    sol.residual_norm = resid;
    sol.iterations = 1;
    sol.converged = true;
    return sol;
}

// Table query at the frame-reconstructed Hessian of node (i, j).
double scheme_query(const EffectiveTable& table, const Grid& grid,
                    const std::vector<double>& values, std::int64_t i, std::int64_t j,
                    bool take_max) {
    const std::vector<double> d2 = discrete_hessian(grid, values, i, j);
    const auto& dirs = grid.stencil.directions();
    double best = take_max ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
    for (const Stencil::Frame& fr : grid.stencil.frames()) {
        const auto& vi = dirs[std::size_t(fr.i)];
        const auto& vj = dirs[std::size_t(fr.j)];
        const double li = std::hypot(double(vi[0]), double(vi[1]));
        const double lj = std::hypot(double(vj[0]), double(vj[1]));
        const double uix = vi[0] / li, uiy = vi[1] / li;
        const double ujx = vj[0] / lj, ujy = vj[1] / lj;
        const double ti = d2[std::size_t(fr.i)];
        const double tj = d2[std::size_t(fr.j)];
        const SymMatrix Mf = SymMatrix::of_2d(ti * uix * uix + tj * ujx * ujx,
                                              ti * uix * uiy + tj * ujx * ujy,
                                              ti * uiy * uiy + tj * ujy * ujy);
        const double val = table.interpolate(Mf);
        best = take_max ? std::max(best, val) : std::min(best, val);
    }
    return best;
}

DiscreteSolution solve_hom_2d_extremal(const EffectiveTable& table, const Box& U,
                                       const ScalarField& g, double h, double tol, long max_iter,
                                       bool take_max) {
    Grid grid = Grid::make(U, h, Stencil::standard(2));
    DiscreteSolution sol;
    sol.grid = grid;
    sol.values.assign(std::size_t(grid.nodes()), 0.0);
    sol.boundary_trace.assign(std::size_t(grid.nodes()), 0.0);
    fill_boundary_band(grid, g, sol.values, sol.boundary_trace);

    // Transfinite (Coons) blend of the boundary data as the initial guess.
    const double ax = U.lo[0], bx = U.hi[0], ay = U.lo[1], by = U.hi[1];
    auto gv = [&](double x, double y) {
        const double p[2] = {x, y};
        return g(std::span<const double>(p, 2));
    };
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            if (!grid.interior(i, j)) continue;
            const double x = grid.x(0, i), y = grid.x(1, j);
            const double s = (x - ax) / (bx - ax), t = (y - ay) / (by - ay);
            const double blend = (1 - s) * gv(ax, y) + s * gv(bx, y) + (1 - t) * gv(x, ay) +
                                 t * gv(x, by) -
                                 ((1 - s) * (1 - t) * gv(ax, ay) + s * (1 - t) * gv(bx, ay) +
                                  (1 - s) * t * gv(ax, by) + s * t * gv(bx, by));
            sol.values[std::size_t(grid.index(i, j))] = blend;
        }
    }

    const double Lambda = table.lambda_max();
    const double n_dirs = double(grid.stencil.size());
    const double tau = h * h / (2.0 * 2.0 * Lambda * n_dirs);
    std::vector<double> resid(std::size_t(grid.nodes()), 0.0);
    long it = 0;
    double sup = 0.0;
    for (; it < max_iter; ++it) {
        sup = 0.0;
        for (std::int64_t j = 0; j < grid.n[1]; ++j) {
            for (std::int64_t i = 0; i < grid.n[0]; ++i) {
                if (!grid.interior(i, j)) continue;
                const double r = scheme_query(table, grid, sol.values, i, j, take_max);
                resid[std::size_t(grid.index(i, j))] = r;
                sup = std::max(sup, std::abs(r));
            }
        }
        if (sup <= tol) break;
        for (std::int64_t j = 0; j < grid.n[1]; ++j) {
            for (std::int64_t i = 0; i < grid.n[0]; ++i) {
                if (!grid.interior(i, j)) continue;
                sol.values[std::size_t(grid.index(i, j))] += tau * resid[std::size_t(grid.index(i, j))];
            }
        }
    }
    sol.residual_norm = sup;
    sol.iterations = it + 1;
    sol.converged = sup <= tol;
    return sol;
}

DiscreteSolution solve_hom_2d_linear(const EffectiveTable& table, const Box& U,
                                     const ScalarField& g, double h, double tol, long max_iter) {
    // Reconstruct the constant coefficient matrix from table queries:
    // Fbar(M) = tr(abar M) + c00 with c00 = Fbar(0).
    auto probe = [&](double m11, double m12, double m22) {
        return table.interpolate(SymMatrix::of_2d(m11, m12, m22));
    };
    std::array<double, 3> step{};
    for (int a = 0; a < 3; ++a) {
        const auto& axis = table.axes()[std::size_t(a)];
        const double reach = std::min(axis.back(), -axis.front());
        if (!(reach > 0.0)) {
            throw TableRangeExceeded("linear-table reconstruction needs axes straddling 0");
        }
        step[std::size_t(a)] = 0.5 * reach;
    }
    const double c00 = probe(0, 0, 0);
    const double a11 = (probe(step[0], 0, 0) - probe(-step[0], 0, 0)) / (2 * step[0]);
    const double a22 = (probe(0, 0, step[2]) - probe(0, 0, -step[2])) / (2 * step[2]);
    const double a12 = (probe(0, step[1], 0) - probe(0, -step[1], 0)) / (4 * step[1]);
    const SymMatrix abar = SymMatrix::of_2d(a11, a12, a22);

    // Particular quadratic q soaks up the constant part: tr(abar D^2 q) = -c00.
    const double alpha = -c00 / (a11 + a22);
    auto q = [&](std::span<const double> x) {
        return 0.5 * alpha * (x[0] * x[0] + x[1] * x[1]);
    };
    ScalarField g_shift = [&g, q](std::span<const double> x) { return g(x) - q(x); };

    const EllipticOperator op =
        EllipticOperator::linear_constant(abar, table.lambda_min(), table.lambda_max());
    DiscreteSolution sol =
        solve_dirichlet(op, Phase{}, 1.0, U, g_shift, h, tol, max_iter, SchemeMode::Auto);
    std::vector<double> x(2, 0.0);
    for (std::int64_t j = 0; j < sol.grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < sol.grid.n[0]; ++i) {
            x[0] = sol.grid.x(0, i);
            x[1] = sol.grid.x(1, j);
            const double qv = q(x);
            sol.values[std::size_t(sol.grid.index(i, j))] += qv;
            if (!sol.grid.interior(i, j)) {
                sol.boundary_trace[std::size_t(sol.grid.index(i, j))] += qv;
            }
        }
    }
    return sol;
}

}  // namespace

DiscreteSolution solve_homogenized(const EffectiveTable& table, const Box& U,
                                   const ScalarField& g, double h, double tol, long max_iter) {
    if (U.dim() != table.dim()) {
        throw ValidationError("domain dimension does not match the table");
    }
    if (table.dim() == 1) return solve_hom_1d(table, U, g, h);
    const std::string& tag = table.form_tag();
    if (tag == "linear") return solve_hom_2d_linear(table, U, g, h, tol, max_iter);
    if (tag == "pucci_plus") return solve_hom_2d_extremal(table, U, g, h, tol, max_iter, true);
    if (tag == "pucci_minus" || tag == "bellman_min") {
        return solve_hom_2d_extremal(table, U, g, h, tol, max_iter, false);
    }
    throw ValidationError("table form tag " + tag + " has no homogenized scheme");
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

std::vector<double> ConvergenceReport::error_ratios() const {
    std::vector<double> r;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        r.push_back(rows[i].sup_error / rows[i + 1].sup_error);
    }
    return r;
}

namespace {

// Oscillatory flux profile (1-D scalar-coefficient benchmark): the classical
// effective-medium solution u(x) = g(a) + (g(b) - g(a)) G(x)/G(b) with
// G(x) = int_a^x dt / a(t/eps), whose effective coefficient is the same
// harmonic mean the corrector pipeline tabulates.  Quadrature runs on a
// 32-fold refinement of the study grid.
DiscreteSolution flux_profile_1d(const EllipticOperator::Realized& R, double eps, const Box& U,
                                 const ScalarField& g, double h) {
    Grid grid = Grid::make(U, h, Stencil::standard(1));
    const int refine = 32;
    const std::int64_t cells = grid.n[0] - 1;
    const std::int64_t nf = cells * refine;
    const double dxf = (U.hi[0] - U.lo[0]) / double(nf);
    std::vector<double> G(std::size_t(nf) + 1, 0.0);
    double prev = 0.0;
    for (std::int64_t k = 0; k <= nf; ++k) {
        const double y = (U.lo[0] + dxf * double(k)) / eps;
        const double w = 1.0 / R.coeff(std::span<const double>(&y, 1))(0, 0);
        if (k > 0) G[std::size_t(k)] = G[std::size_t(k - 1)] + 0.5 * dxf * (prev + w);
        prev = w;
    }
    const double ga = g(std::span<const double>(&U.lo[0], 1));
    const double gb = g(std::span<const double>(&U.hi[0], 1));
    DiscreteSolution sol;
    sol.grid = grid;
    sol.values.assign(std::size_t(grid.nodes()), 0.0);
    sol.boundary_trace.assign(std::size_t(grid.nodes()), 0.0);
    for (std::int64_t i = 0; i < grid.n[0]; ++i) {
        sol.values[std::size_t(i)] = ga + (gb - ga) * G[std::size_t(i * refine)] / G.back();
    }
    sol.boundary_trace[0] = ga;
    sol.boundary_trace[std::size_t(grid.n[0] - 1)] = gb;
    sol.iterations = 0;
    sol.residual_norm = 0.0;
    return sol;
}

}  // namespace

ConvergenceReport run_convergence_study(const Experiment& ex) {
    const EllipticOperator& op = ex.require_op();
    const Box& U = ex.require_domain();
    const ScalarField g = ex.require_boundary().as_field();

    stage("validate", [&] {
        if (ex.eps_schedule.empty()) throw ValidationError("study.eps_schedule is empty");
        for (std::size_t i = 0; i < ex.eps_schedule.size(); ++i) {
            if (!(ex.eps_schedule[i] > 0.0)) throw ValidationError("eps values must be positive");
            if (i > 0 && !(ex.eps_schedule[i] < ex.eps_schedule[i - 1])) {
                throw ValidationError("eps_schedule must be strictly decreasing");
            }
        }
        if (ex.table_axes.empty()) throw ValidationError("study needs a [table] section");
        if (ex.study_benchmark == "flux" &&
            (op.dim() != 1 || op.form() != EllipticOperator::Form::LinearNonDiv)) {
            throw ValidationError("the flux benchmark needs a 1-D scalar-coefficient operator");
        }
        return 0;
    });

    const Phase omega = ex.phase();
    const std::string tag = form_tag_of(op.form());

    EffectiveTable table = stage("table-build", [&] {
        return EffectiveTable::lazy(make_corrector_estimator(op, omega, ex.effective), op.dim(),
                                    ex.table_axes, tag, op.lambda_min(), op.lambda_max(),
                                    ex.effective.delta_schedule.back());
    });

    // Homogenized solution, solved once on the finest study grid.
    const double extent = U.hi[0] - U.lo[0];
    auto cells_for = [&](double eps) {
        return ex.base_cells * std::max<long>(1, std::lround(extent / eps));
    };
    const double h_fine = extent / double(cells_for(ex.eps_schedule.back()));
    const DiscreteSolution u_hom = stage("homogenized-solve", [&] {
        return solve_homogenized(table, U, g, h_fine, ex.study_tol, ex.study_max_iter);
    });

    // Closed-form comparison field for d = 1: the parabola through the
    // boundary values with the tabulated root curvature (the discrete solve
    // above reproduces it to machine precision).
    ScalarField u_hom_field;
    if (op.dim() == 1) {
        const double m0 = table_root_1d(table);
        const double a = U.lo[0], b = U.hi[0];
        const double ga = g(std::span<const double>(&a, 1));
        const double gb = g(std::span<const double>(&b, 1));
        u_hom_field = [=](std::span<const double> x) {
            return ga + (gb - ga) * (x[0] - a) / (b - a) + 0.5 * m0 * (x[0] - a) * (x[0] - b);
        };
    }

    ConvergenceReport report;
    report.benchmark = ex.study_benchmark;
    report.form_tag = tag;
    report.claimed_tolerance = ex.claimed_tolerance;

    const EllipticOperator::Realized realized = op.realize(omega);
    for (const double eps : ex.eps_schedule) {
        const auto t0 = std::chrono::steady_clock::now();
        const double h_eps = extent / double(cells_for(eps));
        StudyRow row;
        row.eps = eps;
        DiscreteSolution u_eps = stage("oscillatory-solve", [&] {
            if (ex.study_benchmark == "flux") return flux_profile_1d(realized, eps, U, g, h_eps);
            return solve_dirichlet(op, omega, eps, U, g, h_eps, ex.study_tol, ex.study_max_iter);
        });
        row.iterations = u_eps.iterations;
        row.sup_error = stage("error-evaluation", [&] {
            if (op.dim() == 1) return sup_distance(u_eps, u_hom_field);
            const DiscreteSolution u_hom_eps = solve_homogenized(
                table, U, g, h_eps, ex.study_tol, ex.study_max_iter);
            return sup_distance(u_eps, u_hom_eps);
        });
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                t0)
                          .count();
        report.rows.push_back(row);
    }
    (void)u_hom;

    report.table_residual_max = table.max_residual();
    stage("provenance", [&] {
        if (report.table_residual_max > ex.claimed_tolerance) {
            throw ValidationError("table residual " + g17(report.table_residual_max) +
                                  " exceeds the claimed tolerance " + g17(ex.claimed_tolerance));
        }
        return 0;
    });

    write_study_csv(report, ex.out_dir);
    return report;
}

void write_study_csv(const ConvergenceReport& report, const std::string& dir) {
    std::ofstream out = textio::open_csv(dir, "study_report.csv");
    out << "# convergence-study benchmark=" << report.benchmark << " form=" << report.form_tag
        << " claimed_tolerance=" << g17(report.claimed_tolerance)
        << " table_residual_max=" << g17(report.table_residual_max) << "\n";
    out << "eps,sup_error,iterations\n";
    for (const StudyRow& row : report.rows) {
        out << g17(row.eps) << "," << g17(row.sup_error) << "," << row.iterations << "\n";
    }

    std::ofstream log = textio::open_csv(dir, "study_loglog.csv");
    log << "log10_eps,log10_sup_error\n";
    for (const StudyRow& row : report.rows) {
        log << g17(std::log10(row.eps)) << ","
            << g17(std::log10(std::max(row.sup_error, 1e-300))) << "\n";
    }
}

}  // namespace homog
