#include "homog/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "homog/errors.hpp"
#include "homog/rng.hpp"

namespace homog {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> matrix_coords(const SymMatrix& M) {
    if (M.dim() == 1) return {M(0, 0)};
    return {M(0, 0), M(0, 1), M(1, 1)};
}

SymMatrix coords_matrix(int dim, const std::vector<double>& c) {
    if (dim == 1) return SymMatrix::of_1d(c.at(0));
    return SymMatrix::of_2d(c.at(0), c.at(1), c.at(2));
}

// Four-point Lagrange interpolation on the uniform grid (tensor product in
// d = 2); the target must lie inside the grid hull.
double interp_cubic(const DiscreteSolution& s, std::span<const double> x) {
    const Grid& g = s.grid;
    std::array<std::int64_t, 2> base = {0, 0};
    std::array<std::array<double, 4>, 2> w{};
    for (int a = 0; a < g.dim; ++a) {
        const double u = (x[std::size_t(a)] - g.box.lo[a]) / g.h;
        if (u < -1e-9 || u > double(g.n[a] - 1) + 1e-9) {
            throw ValidationError("interpolation target outside the grid");
        }
        if (g.n[a] < 4) throw ValidationError("grid too small for cubic interpolation");
        base[a] = std::clamp<std::int64_t>(std::int64_t(std::floor(u)) - 1, 0, g.n[a] - 4);
        const double t = u - double(base[a]);
        for (int k = 0; k < 4; ++k) {
            double acc = 1.0;
            for (int l = 0; l < 4; ++l) {
                if (l == k) continue;
                acc *= (t - double(l)) / double(k - l);
            }
            w[std::size_t(a)][std::size_t(k)] = acc;
        }
    }
    if (g.dim == 1) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
            acc += w[0][std::size_t(k)] * s.values[std::size_t(base[0] + k)];
        }
        return acc;
    }
    double acc = 0.0;
    for (int ky = 0; ky < 4; ++ky) {
        for (int kx = 0; kx < 4; ++kx) {
            acc += w[1][std::size_t(ky)] * w[0][std::size_t(kx)] *
                   s.values[std::size_t(g.index(base[0] + kx, base[1] + ky))];
        }
    }
    return acc;
}

}  // namespace

double DomainRule::operator()(double Lambda, double delta, double tol) const {
    if (fixed_half_width) {
        if (!(*fixed_half_width > 0.0)) throw ValidationError("fixed half width must be positive");
        return *fixed_half_width;
    }
    if (!(delta > 0.0)) throw ValidationError("damping parameter must be positive");
    if (!(tol > 0.0 && tol < 1.0)) throw ValidationError("tolerance must lie in (0, 1)");
    if (!(c > 0.0)) throw ValidationError("domain rule constant must be positive");
    return std::max(1.0, c * std::sqrt(Lambda / delta) * std::log(1.0 / tol));
}

CorrectorRun solve_delta_corrector(const EllipticOperator& op, const Phase& omega,
                                   const SymMatrix& M, double delta, double L, double h,
                                   double tol, std::int64_t max_iter,
                                   const std::vector<double>* warm_start) {
    if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("damping must lie in (0, 1]");
    if (!(L >= 1.0)) throw ValidationError("domain half width must be at least 1");
    CorrectorRun run;
    run.M = M;
    run.delta = delta;
    run.h = h;
    run.solution =
        solve_damped(op, omega, M, delta, L, h, tol, max_iter, SchemeMode::Auto, warm_start);
    const Grid& grid = run.solution.grid;
    run.L = grid.box.hi[0];
    const std::int64_t ci = (grid.n[0] - 1) / 2;
    const std::int64_t cj = grid.dim == 2 ? (grid.n[1] - 1) / 2 : 0;
    run.center_value = run.solution.values[std::size_t(grid.index(ci, cj))];

    // truncation diagnostic: shell deviation from the inner-box median,
    // attenuated by the damping length scale
    std::vector<double> inner;
    double shell_dev_max = 0.0;
    std::vector<double> tmp;
    const double Ls = run.L;
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            const double xi = std::abs(grid.x(0, i));
            const double xj = grid.dim == 2 ? std::abs(grid.x(1, j)) : 0.0;
            const double r = std::max(xi, xj);
            if (r <= 0.5 * Ls) inner.push_back(run.solution.values[std::size_t(grid.index(i, j))]);
        }
    }
    if (inner.empty()) throw NumericalError("no interior nodes for the truncation diagnostic");
    std::nth_element(inner.begin(), inner.begin() + std::ptrdiff_t(inner.size() / 2), inner.end());
    const double median = inner[inner.size() / 2];
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            const double xi = std::abs(grid.x(0, i));
            const double xj = grid.dim == 2 ? std::abs(grid.x(1, j)) : 0.0;
            if (std::max(xi, xj) < 0.9 * Ls) continue;
            shell_dev_max = std::max(
                shell_dev_max, std::abs(run.solution.values[std::size_t(grid.index(i, j))] - median));
        }
    }
    const double ell = std::sqrt(op.lambda_max() / delta);
    run.boundary_influence = delta * shell_dev_max * std::exp(-0.9 * Ls / ell);
    run.truncation_warning = run.boundary_influence > 10.0 * tol;
    return run;
}

EffectiveEstimate estimate_effective(const EllipticOperator& op, const Phase& omega,
                                     const SymMatrix& M, const EffectiveOptions& opts) {
    const auto& ds = opts.delta_schedule;
    if (ds.size() < 3) throw ValidationError("damping schedule needs at least 3 entries");
    for (std::size_t k = 0; k < ds.size(); ++k) {
        if (!(ds[k] > 0.0)) throw ValidationError("damping schedule must be positive");
        if (k > 0 && !(ds[k] < ds[k - 1])) {
            throw ValidationError("damping schedule must be strictly decreasing");
        }
    }
    // Extremal forms are rotation-invariant, and the wide-stencil frame
    // extremum is exact only on eigenframe-aligned curvatures; solving the
    // cell problem in the eigenframe of M removes the directional-resolution
    // bias without giving up monotonicity.
    SymMatrix Mc = M;
    if (M.dim() == 2 && (op.form() == EllipticOperator::Form::PucciPlus ||
                         op.form() == EllipticOperator::Form::PucciMinus)) {
        const auto ev = M.eigenvalues();
        Mc = SymMatrix::of_2d(ev[0], 0.0, ev[1]);
    }

    EffectiveEstimate est;
    est.deltas = ds;
    for (double delta : ds) {
        const double L = opts.domain(op.lambda_max(), delta, opts.tol);
        CorrectorRun run =
            solve_delta_corrector(op, omega, Mc, delta, L, opts.h, opts.tol, opts.max_iter);
        if (!run.solution.converged) {
            throw NonConvergent("damped corrector solve hit the iteration cap at delta=" +
                                g17(delta));
        }
        est.damped_center.push_back(delta * run.center_value);
        est.boundary_influence = std::max(est.boundary_influence, run.boundary_influence);
        est.truncation_warning = est.truncation_warning || run.truncation_warning;
    }
    const auto& x = est.damped_center;
    const std::size_t n = x.size();
    const double floor_gap = 50.0 * opts.tol * (1.0 + std::abs(x.back()));
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double d_prev = std::abs(x[k] - x[k - 1]);
        const double d_next = std::abs(x[k + 1] - x[k]);
        if (d_next > floor_gap && d_next > d_prev / opts.contraction_factor) {
            throw NonConvergent("damped center readouts stopped contracting: |gap| " +
                                g17(d_prev) + " -> " + g17(d_next));
        }
    }
    // first-order model x(delta) = x* + c delta, least squares on the last 3
    double dbar = 0.0, xbar = 0.0;
    for (std::size_t k = n - 3; k < n; ++k) {
        dbar += ds[k];
        xbar += x[k];
    }
    dbar /= 3.0;
    xbar /= 3.0;
    double num = 0.0, den = 0.0;
    for (std::size_t k = n - 3; k < n; ++k) {
        num += (ds[k] - dbar) * (x[k] - xbar);
        den += (ds[k] - dbar) * (ds[k] - dbar);
    }
    const double slope = num / den;
    const double xstar = xbar - slope * dbar;
    est.extrapolation_residual = std::abs(x.back() - xstar);
    est.fbar = -xstar;
    est.residual =
        std::max({est.extrapolation_residual, est.boundary_influence, opts.tol});
    return est;
}

double shift_covariance_check(const EllipticOperator& op, const Phase& omega, const SymMatrix& M,
                              double delta, const std::vector<double>& y0, double L, double h,
                              double tol, double window_half) {
    const int dim = op.dim();
    if (int(y0.size()) != dim) throw ValidationError("shift vector dimension mismatch");
    double y0_inf = 0.0;
    for (double v : y0) y0_inf = std::max(y0_inf, std::abs(v));
    if (y0_inf > L / 4.0 + 1e-12) throw ValidationError("shift must satisfy |y0| <= L/4");

    const CorrectorRun base = solve_delta_corrector(op, omega, M, delta, L, h, tol);
    const Phase shifted = op.ensemble()
                              ? op.ensemble()->shift(omega, std::span<const double>(y0))
                              : omega;
    const CorrectorRun moved = solve_delta_corrector(op, shifted, M, delta, L, h, tol);

    const Grid& grid = moved.solution.grid;
    const double window = window_half > 0.0 ? window_half : base.L / 8.0;
    if (window > base.L / 2.0) throw ValidationError("comparison window exceeds half the domain");
    double gap = 0.0;
    std::vector<double> target(std::size_t(dim), 0.0);
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            const double yi = grid.x(0, i);
            const double yj = grid.dim == 2 ? grid.x(1, j) : 0.0;
            if (std::abs(yi) > window || (grid.dim == 2 && std::abs(yj) > window)) continue;
            target[0] = yi + y0[0];
            if (dim == 2) target[1] = yj + y0[1];
            const double translated = interp_cubic(base.solution, target);
            const double direct = moved.solution.values[std::size_t(grid.index(i, j))];
            gap = std::max(gap, std::abs(translated - direct));
        }
    }
    return gap;
}

SpreadReport omega_independence_check(const EllipticOperator& op, const SymMatrix& M,
                                      const EffectiveOptions& opts, int n_phases,
                                      std::uint64_t seed) {
    if (n_phases < 2) throw ValidationError("phase-independence check needs n_phases >= 2");
    SpreadReport rep;
    for (int p = 0; p < n_phases; ++p) {
        const Phase omega = op.ensemble() ? op.ensemble()->sample_phase(seed + std::uint64_t(p))
                                          : Phase{};
        const EffectiveEstimate est = estimate_effective(op, omega, M, opts);
        rep.values.push_back(est.fbar);
        rep.max_residual = std::max(rep.max_residual, est.residual);
    }
    const auto [lo, hi] = std::minmax_element(rep.values.begin(), rep.values.end());
    rep.spread = *hi - *lo;
    return rep;
}

EffectiveEstimator make_corrector_estimator(const EllipticOperator& op, const Phase& omega,
                                            const EffectiveOptions& opts) {
    auto memo = std::make_shared<std::map<std::string, EffectiveEstimate>>();
    return [op, omega, opts, memo](const SymMatrix& M) -> EffectiveEstimate {
        std::string key;
        for (double c : matrix_coords(M)) key += g17(c) + ",";
        auto it = memo->find(key);
        if (it != memo->end()) return it->second;
        EffectiveEstimate est = estimate_effective(op, omega, M, opts);
        memo->emplace(std::move(key), est);
        return est;
    };
}

// ---------------------------------------------------------------------------
// EffectiveTable
// ---------------------------------------------------------------------------

namespace {

void check_axes(int dim, const std::vector<std::vector<double>>& axes) {
    const std::size_t want = dim == 1 ? 1 : 3;
    if (axes.size() != want) throw ValidationError("table needs one axis per Hessian coordinate");
    for (const auto& axis : axes) {
        if (axis.size() < 2) throw ValidationError("table axes need at least 2 values");
        for (std::size_t k = 1; k < axis.size(); ++k) {
            if (!(axis[k] > axis[k - 1])) {
                throw ValidationError("table axes must be strictly increasing");
            }
        }
    }
}

}  // namespace

EffectiveTable EffectiveTable::lazy(EffectiveEstimator estimator, int dim,
                                    std::vector<std::vector<double>> axes, std::string form_tag,
                                    double lambda, double Lambda, double delta_min) {
    if (dim != 1 && dim != 2) throw ValidationError("table dimension must be 1 or 2");
    check_axes(dim, axes);
    if (!estimator) throw ValidationError("lazy table needs an estimator");
    EffectiveTable t;
    t.dim_ = dim;
    t.axes_ = std::move(axes);
    t.form_tag_ = std::move(form_tag);
    t.lambda_ = lambda;
    t.Lambda_ = Lambda;
    t.delta_min_ = delta_min;
    t.estimator_ = std::move(estimator);
    std::size_t total = 1;
    for (const auto& axis : t.axes_) total *= axis.size();
    t.entries_.resize(total);
    return t;
}

EffectiveTable EffectiveTable::build(const EffectiveEstimator& estimator, int dim,
                                     std::vector<std::vector<double>> axes, std::string form_tag,
                                     double lambda, double Lambda, double delta_min) {
    EffectiveTable t =
        lazy(estimator, dim, std::move(axes), std::move(form_tag), lambda, Lambda, delta_min);
    t.fill_all();
    return t;
}

std::size_t EffectiveTable::flat_index(const std::vector<std::size_t>& node) const {
    if (node.size() != axes_.size()) throw ValidationError("lattice node arity mismatch");
    std::size_t flat = 0;
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        if (node[a] >= axes_[a].size()) throw ValidationError("lattice node out of range");
        flat = flat * axes_[a].size() + node[a];
    }
    return flat;
}

const EffectiveTable::Entry& EffectiveTable::ensure(std::size_t flat) const {
    if (entries_[flat]) return *entries_[flat];
    if (!estimator_) {
        throw ValidationError("table entry missing and no estimator is attached");
    }
    // unflatten
    std::vector<double> coords(axes_.size(), 0.0);
    std::size_t rem = flat;
    for (std::size_t a = axes_.size(); a-- > 0;) {
        coords[a] = axes_[a][rem % axes_[a].size()];
        rem /= axes_[a].size();
    }
    const EffectiveEstimate est = estimator_(coords_matrix(dim_, coords));
    Entry e;
    e.m = coords;
    e.fbar = est.fbar;
    e.delta_min = est.deltas.empty() ? delta_min_ : est.deltas.back();
    e.residual = est.residual;
    entries_[flat] = std::move(e);
    return *entries_[flat];
}

void EffectiveTable::fill_all() const {
    for (std::size_t f = 0; f < entries_.size(); ++f) ensure(f);
}

const EffectiveTable::Entry& EffectiveTable::at(const std::vector<std::size_t>& node) const {
    return ensure(flat_index(node));
}

std::size_t EffectiveTable::size() const { return entries_.size(); }

std::size_t EffectiveTable::computed() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.has_value() ? 1 : 0;
    return n;
}

double EffectiveTable::max_residual() const {
    double r = 0.0;
    for (const auto& e : entries_) {
        if (e) r = std::max(r, e->residual);
    }
    return r;
}

std::vector<std::size_t> EffectiveTable::shape() const {
    std::vector<std::size_t> s;
    for (const auto& axis : axes_) s.push_back(axis.size());
    return s;
}

double EffectiveTable::interpolate(const SymMatrix& M) const {
    if (M.dim() != dim_) throw ValidationError("query dimension does not match the table");
    const std::vector<double> c = matrix_coords(M);
    const std::size_t na = axes_.size();
    std::vector<std::size_t> cell(na, 0);
    std::vector<double> t(na, 0.0);
    for (std::size_t a = 0; a < na; ++a) {
        const auto& axis = axes_[a];
        const double span = axis.back() - axis.front();
        const double slack = 1e-9 * (1.0 + std::abs(axis.front()) + std::abs(axis.back()));
        if (c[a] < axis.front() - slack || c[a] > axis.back() + slack) {
            throw TableRangeExceeded("Hessian coordinate " + g17(c[a]) +
                                     " outside table axis [" + g17(axis.front()) + ", " +
                                     g17(axis.back()) + "]");
        }
        const double v = std::clamp(c[a], axis.front(), axis.back());
        auto it = std::upper_bound(axis.begin(), axis.end(), v);
        std::size_t i = it == axis.begin() ? 0 : std::size_t(it - axis.begin() - 1);
        i = std::min(i, axis.size() - 2);
        cell[a] = i;
        t[a] = (v - axis[i]) / (axis[i + 1] - axis[i]);
        (void)span;
    }
    double acc = 0.0;
    const std::size_t corners = std::size_t(1) << na;
    std::vector<std::size_t> node(na, 0);
    for (std::size_t mask = 0; mask < corners; ++mask) {
        double w = 1.0;
        for (std::size_t a = 0; a < na; ++a) {
            const bool hi = (mask >> a) & 1u;
            node[a] = cell[a] + (hi ? 1 : 0);
            w *= hi ? t[a] : 1.0 - t[a];
        }
        if (w == 0.0) continue;
        acc += w * ensure(flat_index(node)).fbar;
    }
    return acc;
}

void EffectiveTable::save_csv(const std::string& path) const {
    fill_all();
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open table file for writing: " + path);
    out << "# effective-table dim=" << dim_ << " form=" << form_tag_ << " lambda=" << g17(lambda_)
        << " Lambda=" << g17(Lambda_) << " delta_min=" << g17(delta_min_) << "\n";
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        out << "# axis" << a << " =";
        for (double v : axes_[a]) out << " " << g17(v);
        out << "\n";
    }
    if (dim_ == 1) {
        out << "m,fbar,delta_min,residual\n";
    } else {
        out << "m11,m12,m22,fbar,delta_min,residual\n";
    }
    for (std::size_t f = 0; f < entries_.size(); ++f) {
        const Entry& e = *entries_[f];
        for (double v : e.m) out << g17(v) << ",";
        out << g17(e.fbar) << "," << g17(e.delta_min) << "," << g17(e.residual) << "\n";
    }
    if (!out) throw ValidationError("failed writing table file: " + path);
}

EffectiveTable EffectiveTable::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open table file: " + path);
    EffectiveTable t;
    t.dim_ = 0;
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            ss >> tok;
            if (tok == "effective-table") {
                std::string kv;
                while (ss >> kv) {
                    const auto eq = kv.find('=');
                    if (eq == std::string::npos) continue;
                    const std::string key = kv.substr(0, eq);
                    const std::string val = kv.substr(eq + 1);
                    if (key == "dim") t.dim_ = std::stoi(val);
                    if (key == "form") t.form_tag_ = val;
                    if (key == "lambda") t.lambda_ = std::stod(val);
                    if (key == "Lambda") t.Lambda_ = std::stod(val);
                    if (key == "delta_min") t.delta_min_ = std::stod(val);
                }
            } else if (tok.rfind("axis", 0) == 0) {
                std::string eq;
                ss >> eq;  // '='
                std::vector<double> axis;
                double v;
                while (ss >> v) axis.push_back(v);
                t.axes_.push_back(std::move(axis));
            }
            continue;
        }
        if (line.find_first_of("0123456789+-.") != 0) continue;  // header row
        std::istringstream ss(line);
        std::vector<double> row;
        std::string cellv;
        while (std::getline(ss, cellv, ',')) row.push_back(std::stod(cellv));
        rows.push_back(std::move(row));
    }
    if (t.dim_ != 1 && t.dim_ != 2) throw ValidationError("table file lacks a valid dimension");
    check_axes(t.dim_, t.axes_);
    std::size_t total = 1;
    for (const auto& axis : t.axes_) total *= axis.size();
    t.entries_.resize(total);
    const std::size_t nc = t.axes_.size();
    for (const auto& row : rows) {
        if (row.size() != nc + 3) throw ValidationError("table row has the wrong arity");
        std::vector<std::size_t> node(nc, 0);
        for (std::size_t a = 0; a < nc; ++a) {
            const auto& axis = t.axes_[a];
            const double target = row[a];
            std::size_t best = 0;
            double best_gap = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < axis.size(); ++k) {
                const double gapk = std::abs(axis[k] - target);
                if (gapk < best_gap) {
                    best_gap = gapk;
                    best = k;
                }
            }
            if (best_gap > 1e-9 * (1.0 + std::abs(target))) {
                throw ValidationError("table row coordinate off the declared lattice");
            }
            node[a] = best;
        }
        Entry e;
        e.m.assign(row.begin(), row.begin() + std::ptrdiff_t(nc));
        e.fbar = row[nc];
        e.delta_min = row[nc + 1];
        e.residual = row[nc + 2];
        t.entries_[t.flat_index(node)] = std::move(e);
    }
    for (const auto& e : t.entries_) {
        if (!e) throw ValidationError("table file does not cover the full lattice");
    }
    return t;
}

// ---------------------------------------------------------------------------
// Effective ellipticity transfer
// ---------------------------------------------------------------------------

namespace {

SymMatrix random_sym(Rng& rng, int dim) {
    if (dim == 1) return SymMatrix::of_1d(rng.normal());
    return SymMatrix::of_2d(rng.normal(), rng.normal(), rng.normal());
}

SymMatrix random_psd(Rng& rng, int dim) {
    if (dim == 1) return SymMatrix::of_1d(std::abs(rng.normal()));
    const double b11 = rng.normal(), b12 = rng.normal(), b21 = rng.normal(), b22 = rng.normal();
    return SymMatrix::of_2d(b11 * b11 + b21 * b21, b11 * b12 + b21 * b22,
                            b12 * b12 + b22 * b22);
}

void enforce_margins(const EllipticityMargins& m, double slack) {
    if (m.lower < -slack || m.upper < -slack) {
        throw EllipticityViolation("effective operator breaks the ellipticity band: lower " +
                                   g17(m.lower) + ", upper " + g17(m.upper) + ", slack " +
                                   g17(slack));
    }
}

}  // namespace

EllipticityMargins effective_ellipticity_check(const EffectiveEstimator& estimator, int dim,
                                               double lambda, double Lambda, int n_samples,
                                               std::uint64_t seed) {
    if (!estimator) throw ValidationError("ellipticity check needs an estimator");
    if (n_samples < 1) throw ValidationError("need at least one sample");
    Rng rng(seed, 303);
    EllipticityMargins m;
    m.lower = std::numeric_limits<double>::infinity();
    m.upper = std::numeric_limits<double>::infinity();
    double max_res = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const SymMatrix M = random_sym(rng, dim);
        const SymMatrix N = random_psd(rng, dim);
        const EffectiveEstimate a = estimator(M);
        const EffectiveEstimate b = estimator(M + N);
        const double diff = b.fbar - a.fbar;
        const double trn = N.trace();
        m.lower = std::min(m.lower, diff - lambda * trn);
        m.upper = std::min(m.upper, Lambda * trn - diff);
        max_res = std::max({max_res, a.residual, b.residual});
    }
    enforce_margins(m, 3.0 * max_res);
    return m;
}

EllipticityMargins effective_ellipticity_check(const EffectiveTable& table, double lambda,
                                               double Lambda, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ValidationError("need at least one sample");
    Rng rng(seed, 304);
    EllipticityMargins m;
    m.lower = std::numeric_limits<double>::infinity();
    m.upper = std::numeric_limits<double>::infinity();
    double max_res = 0.0;
    const std::size_t total = table.size();
    const std::vector<std::size_t> shape = table.shape();
    auto unflatten = [&](std::size_t flat) {
        std::vector<std::size_t> node(shape.size(), 0);
        for (std::size_t a = shape.size(); a-- > 0;) {
            node[a] = flat % shape[a];
            flat /= shape[a];
        }
        return node;
    };
    int accepted = 0;
    std::int64_t attempts = 0;
    const std::int64_t cap = 400LL * n_samples;
    while (accepted < n_samples) {
        if (++attempts > cap) {
            throw ValidationError("table lattice admits too few ordered matrix pairs");
        }
        const auto fa = std::size_t(rng.uniform() * double(total));
        const auto fb = std::size_t(rng.uniform() * double(total));
        const EffectiveTable::Entry& ea = table.at(unflatten(std::min(fa, total - 1)));
        const EffectiveTable::Entry& eb = table.at(unflatten(std::min(fb, total - 1)));
        const SymMatrix Ma = coords_matrix(table.dim(), ea.m);
        const SymMatrix Mb = coords_matrix(table.dim(), eb.m);
        const SymMatrix N = Mb - Ma;
        const auto ev = N.eigenvalues();
        if (ev[0] < -1e-12 || (table.dim() == 2 && ev[1] < -1e-12)) continue;
        ++accepted;
        const double diff = eb.fbar - ea.fbar;
        const double trn = N.trace();
        m.lower = std::min(m.lower, diff - lambda * trn);
        m.upper = std::min(m.upper, Lambda * trn - diff);
        max_res = std::max({max_res, ea.residual, eb.residual});
    }
    enforce_margins(m, 3.0 * max_res);
    return m;
}

}  // namespace homog
