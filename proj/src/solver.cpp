#include "homog/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "homog/errors.hpp"

namespace homog {

namespace {

constexpr double kTieTol = 1e-12;

int check_dim(int dim) {
    if (dim != 1 && dim != 2) throw ValidationError("spatial dimension must be 1 or 2");
    return dim;
}

double trace_dot(const SymMatrix& a, const SymMatrix& m) {
    if (a.dim() == 1) return a(0, 0) * m(0, 0);
    return a(0, 0) * m(0, 0) + 2.0 * a(0, 1) * m(0, 1) + a(1, 1) * m(1, 1);
}

// Unit frame (v_hat, r_hat = rot90(v_hat)) attached to a stencil frame.
struct FrameBasis {
    double vx, vy;  // unit v
    double rx, ry;  // unit rot90(v)
};

FrameBasis frame_basis(const Stencil& st, const Stencil::Frame& f) {
    const auto& v = st.directions()[f.i];
    const double len = std::hypot(double(v[0]), double(v[1]));
    FrameBasis b{};
    b.vx = v[0] / len;
    b.vy = v[1] / len;
    b.rx = -b.vy;
    b.ry = b.vx;
    return b;
}

// Coefficients of a symmetric matrix in frame coordinates.
struct FrameCoeffs {
    double alpha;  // v.a v
    double beta;   // r.a r
    double gamma;  // v.a r
};

FrameCoeffs frame_coeffs(const SymMatrix& a, const FrameBasis& b) {
    const double a00 = a(0, 0), a01 = a(0, 1), a11 = a(1, 1);
    FrameCoeffs c{};
    c.alpha = b.vx * (a00 * b.vx + a01 * b.vy) + b.vy * (a01 * b.vx + a11 * b.vy);
    c.beta = b.rx * (a00 * b.rx + a01 * b.ry) + b.ry * (a01 * b.rx + a11 * b.ry);
    c.gamma = b.vx * (a00 * b.rx + a01 * b.ry) + b.vy * (a01 * b.rx + a11 * b.ry);
    return c;
}

std::array<int, 2> primitive_canonical(int a, int b) {
    int g = std::gcd(std::abs(a), std::abs(b));
    if (g == 0) throw ValidationError("zero direction has no primitive representative");
    a /= g;
    b /= g;
    if (a < 0 || (a == 0 && b < 0)) {
        a = -a;
        b = -b;
    }
    return {a, b};
}

}  // namespace

// ---------------------------------------------------------------------------
// Box
// ---------------------------------------------------------------------------

Box Box::interval(double a, double b) {
    if (!(b > a)) throw ValidationError("interval needs b > a");
    return Box{{a}, {b}};
}

Box Box::rectangle(double ax, double bx, double ay, double by) {
    if (!(bx > ax) || !(by > ay)) throw ValidationError("rectangle needs positive extents");
    return Box{{ax, ay}, {bx, by}};
}

Box Box::centered_cube(int dim, double half_width) {
    check_dim(dim);
    if (!(half_width > 0.0)) throw ValidationError("half width must be positive");
    if (dim == 1) return interval(-half_width, half_width);
    return rectangle(-half_width, half_width, -half_width, half_width);
}

// ---------------------------------------------------------------------------
// Stencil
// ---------------------------------------------------------------------------

double Stencil::sq_len(std::size_t k) const {
    const auto& v = dirs_[k];
    return double(v[0]) * v[0] + double(v[1]) * v[1];
}

Stencil Stencil::standard(int dim) {
    return lattice(dim, 1);
}

Stencil Stencil::lattice(int dim, int width) {
    check_dim(dim);
    if (width < 1) throw ValidationError("stencil width must be >= 1");
    Stencil st;
    st.dim_ = dim;
    st.width_ = dim == 1 ? 1 : width;
    if (dim == 1) {
        st.dirs_.push_back({1, 0});
        return st;
    }
    for (int a = 0; a <= width; ++a) {
        for (int b = -width; b <= width; ++b) {
            if (a == 0 && b <= 0) continue;  // canonical half: a > 0, or a == 0 and b > 0
            if (std::gcd(a, std::abs(b)) != 1) continue;
            st.dirs_.push_back({a, b});
        }
    }
    std::sort(st.dirs_.begin(), st.dirs_.end());
    st.build_frames();
    return st;
}

void Stencil::build_frames() {
    auto find = [&](std::array<int, 2> d) -> int {
        auto it = std::lower_bound(dirs_.begin(), dirs_.end(), d);
        if (it == dirs_.end() || *it != d) return -1;
        return int(it - dirs_.begin());
    };
    frames_.clear();
    for (int i = 0; i < int(dirs_.size()); ++i) {
        const int vx = dirs_[i][0], vy = dirs_[i][1];
        const int rx = -vy, ry = vx;  // rot90(v)
        const int j = find(primitive_canonical(rx, ry));
        if (j < 0 || j <= i) continue;  // partner outside stencil, or frame already listed
        Frame f;
        f.i = i;
        f.j = j;
        if (vx + rx != 0 || vy + ry != 0) f.plus = find(primitive_canonical(vx + rx, vy + ry));
        if (vx - rx != 0 || vy - ry != 0) f.minus = find(primitive_canonical(vx - rx, vy - ry));
        frames_.push_back(f);
    }
    if (frames_.empty()) throw ValidationError("stencil admits no orthogonal frame");
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

Grid Grid::make(const Box& box, double h, Stencil stencil) {
    if (!(h > 0.0)) throw ValidationError("grid spacing must be positive");
    if (box.dim() != stencil.dim()) throw ValidationError("box and stencil dimension mismatch");
    Grid g;
    g.box = box;
    g.h = h;
    g.dim = box.dim();
    g.stencil = std::move(stencil);
    for (int axis = 0; axis < g.dim; ++axis) {
        const double len = box.hi[axis] - box.lo[axis];
        const double cells_real = len / h;
        const auto cells = std::int64_t(std::llround(cells_real));
        if (std::abs(double(cells) * h - len) > 1e-8 * std::max(1.0, len)) {
            throw ValidationError("box extent must be an integer multiple of h");
        }
        if (cells + 1 < 2 * g.margin() + 3) {
            throw ValidationError("grid too coarse for the stencil width");
        }
        g.n[axis] = cells + 1;
    }
    if (g.dim == 1) g.n[1] = 1;
    if (g.nodes() > 40'000'000) throw ValidationError("grid exceeds the node budget");
    return g;
}

bool Grid::interior(std::int64_t i, std::int64_t j) const {
    const int m = margin();
    if (i < m || i >= n[0] - m) return false;
    if (dim == 2 && (j < m || j >= n[1] - m)) return false;
    return true;
}

bool Grid::same_layout(const Grid& other) const {
    if (dim != other.dim || n != other.n) return false;
    if (std::abs(h - other.h) > 1e-12 * std::max(1.0, h)) return false;
    for (int axis = 0; axis < dim; ++axis) {
        const double scale = std::max(1.0, std::abs(box.lo[axis]) + std::abs(box.hi[axis]));
        if (std::abs(box.lo[axis] - other.box.lo[axis]) > 1e-10 * scale) return false;
        if (std::abs(box.hi[axis] - other.box.hi[axis]) > 1e-10 * scale) return false;
    }
    return true;
}

std::vector<double> discrete_hessian(const Grid& grid, const std::vector<double>& values,
                                     std::int64_t i, std::int64_t j) {
    if (values.size() != std::size_t(grid.nodes())) throw GridMismatch("value array does not match grid");
    if (!grid.interior(i, j)) throw ValidationError("directional differences need an interior node");
    const auto& dirs = grid.stencil.directions();
    std::vector<double> dd(dirs.size());
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    const std::int64_t idx = grid.index(i, j);
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        const std::int64_t off = grid.index(dirs[k][0], grid.dim == 2 ? dirs[k][1] : 0) -
                                 grid.index(0, 0);
        const double c = inv_h2 / grid.stencil.sq_len(k);
        dd[k] = (values[idx + off] - 2.0 * values[idx] + values[idx - off]) * c;
    }
    return dd;
}

// ---------------------------------------------------------------------------
// Monotone decomposition
// ---------------------------------------------------------------------------

Decomposition decompose(const SymMatrix& a, const Stencil& stencil) {
    if (a.dim() != stencil.dim()) throw ValidationError("matrix and stencil dimension mismatch");
    Decomposition dec;
    dec.weights.assign(stencil.size(), 0.0);
    if (stencil.dim() == 1) {
        const double w = a(0, 0);
        if (w < -kTieTol) throw NonMonotoneDecomposition("negative 1-d coefficient");
        dec.weights[0] = std::max(w, 0.0);
        return dec;
    }
    const double scale = 1.0 + std::abs(a(0, 0)) + std::abs(a(1, 1));
    const double tol = 1e-12 * scale;
    int best = -1;
    double best_margin = -std::numeric_limits<double>::infinity();
    FrameCoeffs best_c{};
    for (int fi = 0; fi < int(stencil.frames().size()); ++fi) {
        const auto& f = stencil.frames()[fi];
        if (f.plus < 0 || f.minus < 0) continue;  // companions missing: cannot carry gamma
        const FrameCoeffs c = frame_coeffs(a, frame_basis(stencil, f));
        const double margin = std::min(c.alpha, c.beta) - std::abs(c.gamma);
        if (margin > best_margin + kTieTol * scale) {
            best = fi;
            best_margin = margin;
            best_c = c;
        }
    }
    if (best < 0 || best_margin < -tol) {
        throw NonMonotoneDecomposition(
            "no stencil frame admits nonnegative weights; widen the stencil");
    }
    const auto& f = stencil.frames()[best];
    const double g = best_c.gamma;
    dec.frame = best;
    dec.weights[f.i] = std::max(best_c.alpha - std::abs(g), 0.0);
    dec.weights[f.j] = std::max(best_c.beta - std::abs(g), 0.0);
    if (g > 0.0) dec.weights[f.plus] += 2.0 * g;
    if (g < 0.0) dec.weights[f.minus] += -2.0 * g;
    return dec;
}

// ---------------------------------------------------------------------------
// Scheme core shared by apply_scheme, the Howard solver and pseudo-time.
// ---------------------------------------------------------------------------

namespace {

struct SchemeContext {
    const EllipticOperator::Realized* R = nullptr;
    const Grid* grid = nullptr;
    bool damped = false;      // damped: delta v + F(y, M - D^2 v); else F(y/..., D^2 u)
    double eps = 1.0;         // coefficient argument scaling on the plain path
    double delta = 0.0;       // zeroth-order damping
    SymMatrix M{1};           // frozen curvature offset on the damped path
    std::vector<double> mdir;  // v_hat . M v_hat per canonical direction

    double lam() const { return R->lambda_min(); }
    double Lam() const { return R->lambda_max(); }
};

SchemeContext make_context(const EllipticOperator::Realized& R, const Grid& grid) {
    SchemeContext ctx;
    ctx.R = &R;
    ctx.grid = &grid;
    const auto& st = grid.stencil;
    ctx.mdir.assign(st.size(), 0.0);
    return ctx;
}

void fill_mdir(SchemeContext& ctx) {
    const auto& st = ctx.grid->stencil;
    for (std::size_t k = 0; k < st.size(); ++k) {
        const auto& v = st.directions()[k];
        const double len2 = st.sq_len(k);
        if (ctx.grid->dim == 1) {
            ctx.mdir[k] = ctx.M(0, 0);
        } else {
            const double q = v[0] * (ctx.M(0, 0) * v[0] + ctx.M(0, 1) * v[1]) +
                             v[1] * (ctx.M(0, 1) * v[0] + ctx.M(1, 1) * v[1]);
            ctx.mdir[k] = q / len2;
        }
    }
}

double slope_plus(double lam, double Lam, double t) { return t >= 0.0 ? Lam : lam; }
double slope_minus(double lam, double Lam, double t) { return t >= 0.0 ? lam : Lam; }

// Extremal scheme value over orthogonal frames for per-direction curvatures t.
double pucci_scheme(const SchemeContext& ctx, bool plus, const std::vector<double>& t) {
    const auto& st = ctx.grid->stencil;
    const double lam = ctx.lam(), Lam = ctx.Lam();
    auto sigma = [&](double x) {
        return plus ? slope_plus(lam, Lam, x) * x : slope_minus(lam, Lam, x) * x;
    };
    if (ctx.grid->dim == 1) return sigma(t[0]);
    double best = plus ? -std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::infinity();
    for (const auto& f : st.frames()) {
        const double val = sigma(t[f.i]) + sigma(t[f.j]);
        if (plus ? (val > best) : (val < best)) best = val;
    }
    return best;
}

// Residual of the discrete equation at an interior node.
double node_residual(const SchemeContext& ctx, const std::vector<double>& values,
                     std::int64_t i, std::int64_t j, std::vector<double>& dd_buf) {
    const Grid& grid = *ctx.grid;
    const auto& st = grid.stencil;
    const std::int64_t idx = grid.index(i, j);
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    dd_buf.resize(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) {
        const auto& v = st.directions()[k];
        const std::int64_t off = grid.dim == 2 ? v[1] * grid.n[0] + v[0] : v[0];
        dd_buf[k] = (values[idx + off] - 2.0 * values[idx] + values[idx - off]) * inv_h2 /
                    st.sq_len(k);
    }
    double y[2] = {grid.x(0, i), grid.dim == 2 ? grid.x(1, j) : 0.0};
    if (!ctx.damped) {
        y[0] /= ctx.eps;
        y[1] /= ctx.eps;
    }
    const std::span<const double> ys(y, std::size_t(grid.dim));
    const double vc = values[idx];
    using Form = EllipticOperator::Form;
    switch (ctx.R->form()) {
        case Form::LinearNonDiv: {
            const SymMatrix a = ctx.R->coeff(ys);
            const Decomposition dec = decompose(a, st);
            double s = 0.0;
            for (std::size_t k = 0; k < st.size(); ++k) s += dec.weights[k] * dd_buf[k];
            if (!ctx.damped) return s;
            return ctx.delta * vc + trace_dot(a, ctx.M) - s;
        }
        case Form::PucciPlus:
        case Form::PucciMinus: {
            const bool plus = ctx.R->form() == Form::PucciPlus;
            if (!ctx.damped) return pucci_scheme(ctx, plus, dd_buf);
            std::vector<double> t(st.size());
            for (std::size_t k = 0; k < st.size(); ++k) t[k] = ctx.mdir[k] - dd_buf[k];
            return ctx.delta * vc + pucci_scheme(ctx, plus, t);
        }
        case Form::BellmanMin: {
            double best = std::numeric_limits<double>::infinity();
            for (int b = 0; b < ctx.R->n_branches(); ++b) {
                const SymMatrix a = ctx.R->branch_coeff(b, ys);
                const Decomposition dec = decompose(a, st);
                double s = 0.0;
                for (std::size_t k = 0; k < st.size(); ++k) s += dec.weights[k] * dd_buf[k];
                const double f = ctx.R->branch_forcing(b, ys);
                const double val = ctx.damped ? trace_dot(a, ctx.M) - s - f : s - f;
                best = std::min(best, val);
            }
            return ctx.damped ? ctx.delta * vc + best : best;
        }
    }
    throw ValidationError("unknown operator form");
}

double residual_sup(const SchemeContext& ctx, const std::vector<double>& values) {
    const Grid& grid = *ctx.grid;
    std::vector<double> dd;
    double sup = 0.0;
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            if (!grid.interior(i, j)) continue;
            sup = std::max(sup, std::abs(node_residual(ctx, values, i, j, dd)));
        }
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Policy-linear systems:   c0 u - sum_k W_k Delta^2_k u = rhs   (interior),
// u = boundary data on the band.  W_k >= 0 keeps rows M-matrix shaped.
// ---------------------------------------------------------------------------

struct LinearProblem {
    const Grid* grid = nullptr;
    double c0 = 0.0;
    std::vector<double> w;    // stencil.size() * nodes, entry k * nodes + idx
    std::vector<double> rhs;  // interior entries; boundary entries = data
};

// Policy code per node: packs the argmax frame / slopes / branch choice so
// stale policies can be detected cheaply.
using PolicyCode = std::int32_t;

struct AssembledPolicy {
    LinearProblem lp;
    std::vector<PolicyCode> code;
};

AssembledPolicy assemble_policy(const SchemeContext& ctx, const std::vector<double>& values) {
    const Grid& grid = *ctx.grid;
    const auto& st = grid.stencil;
    const std::int64_t nodes = grid.nodes();
    AssembledPolicy ap;
    ap.lp.grid = &grid;
    ap.lp.c0 = ctx.damped ? ctx.delta : 0.0;
    ap.lp.w.assign(st.size() * std::size_t(nodes), 0.0);
    ap.lp.rhs = values;  // boundary rows keep their data values
    ap.code.assign(std::size_t(nodes), -1);
    const double lam = ctx.lam(), Lam = ctx.Lam();
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    std::vector<double> dd(st.size()), t(st.size());
    using Form = EllipticOperator::Form;
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            if (!grid.interior(i, j)) continue;
            const std::int64_t idx = grid.index(i, j);
            for (std::size_t k = 0; k < st.size(); ++k) {
                const auto& v = st.directions()[k];
                const std::int64_t off = grid.dim == 2 ? v[1] * grid.n[0] + v[0] : v[0];
                dd[k] = (values[idx + off] - 2.0 * values[idx] + values[idx - off]) * inv_h2 /
                        st.sq_len(k);
            }
            double y[2] = {grid.x(0, i), grid.dim == 2 ? grid.x(1, j) : 0.0};
            if (!ctx.damped) {
                y[0] /= ctx.eps;
                y[1] /= ctx.eps;
            }
            const std::span<const double> ys(y, std::size_t(grid.dim));
            auto wk = [&](std::size_t k) -> double& { return ap.lp.w[k * nodes + idx]; };
            switch (ctx.R->form()) {
                case Form::LinearNonDiv: {
                    const SymMatrix a = ctx.R->coeff(ys);
                    const Decomposition dec = decompose(a, st);
                    for (std::size_t k = 0; k < st.size(); ++k) wk(k) = dec.weights[k];
                    ap.lp.rhs[idx] = ctx.damped ? -trace_dot(a, ctx.M) : 0.0;
                    ap.code[idx] = 0;
                    break;
                }
                case Form::PucciPlus:
                case Form::PucciMinus: {
                    const bool plus = ctx.R->form() == Form::PucciPlus;
                    auto slope = [&](double x) {
                        return plus ? slope_plus(lam, Lam, x) : slope_minus(lam, Lam, x);
                    };
                    if (ctx.damped) {
                        for (std::size_t k = 0; k < st.size(); ++k) t[k] = ctx.mdir[k] - dd[k];
                    } else {
                        t = dd;
                    }
                    if (grid.dim == 1) {
                        const double s = slope(t[0]);
                        wk(0) = s;
                        ap.lp.rhs[idx] = ctx.damped ? -s * ctx.mdir[0] : 0.0;
                        ap.code[idx] = t[0] >= 0.0 ? 1 : 0;
                        break;
                    }
                    int bestf = 0;
                    double best = plus ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity();
                    auto sigma = [&](double x) { return slope(x) * x; };
                    for (int fi = 0; fi < int(st.frames().size()); ++fi) {
                        const auto& f = st.frames()[fi];
                        const double val = sigma(t[f.i]) + sigma(t[f.j]);
                        if (plus ? (val > best) : (val < best)) {
                            best = val;
                            bestf = fi;
                        }
                    }
                    const auto& f = st.frames()[bestf];
                    const double si = slope(t[f.i]);
                    const double sj = slope(t[f.j]);
                    wk(std::size_t(f.i)) = si;
                    wk(std::size_t(f.j)) = sj;
                    ap.lp.rhs[idx] =
                        ctx.damped ? -(si * ctx.mdir[f.i] + sj * ctx.mdir[f.j]) : 0.0;
                    ap.code[idx] = PolicyCode(bestf * 4 + (t[f.i] >= 0.0 ? 2 : 0) +
                                              (t[f.j] >= 0.0 ? 1 : 0));
                    break;
                }
                case Form::BellmanMin: {
                    int bestb = 0;
                    double best = std::numeric_limits<double>::infinity();
                    for (int b = 0; b < ctx.R->n_branches(); ++b) {
                        const SymMatrix a = ctx.R->branch_coeff(b, ys);
                        const Decomposition dec = decompose(a, st);
                        double s = 0.0;
                        for (std::size_t k = 0; k < st.size(); ++k) s += dec.weights[k] * dd[k];
                        const double f = ctx.R->branch_forcing(b, ys);
                        const double val = ctx.damped ? trace_dot(a, ctx.M) - s - f : s - f;
                        if (val < best) {
                            best = val;
                            bestb = b;
                        }
                    }
                    const SymMatrix a = ctx.R->branch_coeff(bestb, ys);
                    const Decomposition dec = decompose(a, st);
                    for (std::size_t k = 0; k < st.size(); ++k) wk(k) = dec.weights[k];
                    const double f = ctx.R->branch_forcing(bestb, ys);
                    ap.lp.rhs[idx] = ctx.damped ? f - trace_dot(a, ctx.M) : -f;
                    ap.code[idx] = bestb;
                    break;
                }
            }
        }
    }
    return ap;
}

// Tridiagonal elimination for d = 1 problems (margin 1).
void solve_tridiagonal(const LinearProblem& lp, std::vector<double>& u) {
    const Grid& grid = *lp.grid;
    const std::int64_t n = grid.n[0];
    const std::int64_t m = n - 2;  // interior unknowns
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    std::vector<double> diag(m), sub(m), sup(m), rhs(m);
    for (std::int64_t i = 1; i <= m; ++i) {
        const double w = lp.w[std::size_t(i)] * inv_h2;
        diag[i - 1] = lp.c0 + 2.0 * w;
        sub[i - 1] = -w;
        sup[i - 1] = -w;
        rhs[i - 1] = lp.rhs[std::size_t(i)];
    }
    rhs[0] -= sub[0] * u[0];
    rhs[m - 1] -= sup[m - 1] * u[std::size_t(n - 1)];
    for (std::int64_t i = 1; i < m; ++i) {
        const double f = sub[i] / diag[i - 1];
        diag[i] -= f * sup[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    u[std::size_t(m)] = rhs[m - 1] / diag[m - 1];
    for (std::int64_t i = m - 1; i >= 1; --i) {
        u[std::size_t(i)] = (rhs[i - 1] - sup[i - 1] * u[std::size_t(i + 1)]) / diag[i - 1];
    }
}

// Matrix-free application of the policy system (identity on the band).
void apply_matrix(const LinearProblem& lp, const std::vector<double>& x, std::vector<double>& out) {
    const Grid& grid = *lp.grid;
    const auto& st = grid.stencil;
    const std::int64_t nodes = grid.nodes();
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    out.assign(std::size_t(nodes), 0.0);
    std::vector<std::int64_t> off(st.size());
    std::vector<double> cdir(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) {
        const auto& v = st.directions()[k];
        off[k] = grid.dim == 2 ? v[1] * grid.n[0] + v[0] : v[0];
        cdir[k] = inv_h2 / st.sq_len(k);
    }
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            const std::int64_t idx = grid.index(i, j);
            if (!grid.interior(i, j)) {
                out[idx] = x[idx];
                continue;
            }
            double acc = lp.c0 * x[idx];
            for (std::size_t k = 0; k < st.size(); ++k) {
                const double w = lp.w[k * nodes + idx];
                if (w == 0.0) continue;
                acc -= w * cdir[k] * (x[idx + off[k]] - 2.0 * x[idx] + x[idx - off[k]]);
            }
            out[idx] = acc;
        }
    }
}

std::vector<double> jacobi_diagonal(const LinearProblem& lp) {
    const Grid& grid = *lp.grid;
    const auto& st = grid.stencil;
    const std::int64_t nodes = grid.nodes();
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    std::vector<double> diag(std::size_t(nodes), 1.0);
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            if (!grid.interior(i, j)) continue;
            const std::int64_t idx = grid.index(i, j);
            double d = lp.c0;
            for (std::size_t k = 0; k < st.size(); ++k) {
                d += 2.0 * lp.w[k * nodes + idx] * inv_h2 / st.sq_len(k);
            }
            diag[idx] = d > 0.0 ? d : 1.0;
        }
    }
    return diag;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Stabilized biconjugate gradients with diagonal (Jacobi) scaling.  The
// initial iterate must carry the exact boundary data, so that the band rows
// (identity) start with zero residual and every Krylov vector vanishes there.
// Returns the iteration count, or -1 when the tolerance was not reached.
std::int64_t bicgstab(const LinearProblem& lp, std::vector<double>& x, double rtol,
                      std::int64_t max_iter) {
    const std::vector<double> diag = jacobi_diagonal(lp);
    const std::size_t n = x.size();
    auto scaled_apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        apply_matrix(lp, v, out);
        for (std::size_t i = 0; i < n; ++i) out[i] /= diag[i];
    };
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = lp.rhs[i] / diag[i];
    std::vector<double> r(n), r0(n), p(n), v(n), s(n), t(n), tmp(n);
    scaled_apply(x, tmp);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - tmp[i];
    const double bnorm = std::max(norm2(b), 1e-300);
    if (norm2(r) <= rtol * bnorm) return 0;
    r0 = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    std::fill(p.begin(), p.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    int restarts = 0;
    for (std::int64_t it = 1; it <= max_iter; ++it) {
        const double rho_new = dot(r0, r);
        if (std::abs(rho_new) < 1e-290 || std::abs(omega) < 1e-290) {
            if (++restarts > 4) return -1;
            scaled_apply(x, tmp);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - tmp[i];
            if (norm2(r) <= rtol * bnorm) return it;
            r0 = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            continue;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        scaled_apply(p, v);
        alpha = rho / dot(r0, v);
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) <= rtol * bnorm) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            return it;
        }
        scaled_apply(s, t);
        const double tt = dot(t, t);
        if (tt < 1e-290) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            if (++restarts > 4) return -1;
            scaled_apply(x, tmp);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - tmp[i];
            if (norm2(r) <= rtol * bnorm) return it;
            r0 = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            continue;
        }
        omega = dot(t, s) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if (norm2(r) <= rtol * bnorm) return it;
    }
    return -1;
}

// Direct banded LU (no pivoting; the policy rows are weakly chained
// diagonally dominant M-matrix rows plus identity rows on the band, for
// which elimination without pivoting is stable and fill-in stays in band).
bool banded_lu(const LinearProblem& lp, std::vector<double>& u, std::int64_t bw) {
    const Grid& grid = *lp.grid;
    const auto& st = grid.stencil;
    const std::int64_t nodes = grid.nodes();
    const std::int64_t stride = 2 * bw + 1;
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    std::vector<double> band(std::size_t(nodes * stride), 0.0);
    std::vector<double> rhs(std::size_t(nodes), 0.0);
    auto at = [&](std::int64_t r, std::int64_t c) -> double& {
        return band[std::size_t(r * stride + (c - r) + bw)];
    };
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            const std::int64_t idx = grid.index(i, j);
            rhs[std::size_t(idx)] = lp.rhs[std::size_t(idx)];
            if (!grid.interior(i, j)) {
                at(idx, idx) = 1.0;
                continue;
            }
            double diag = lp.c0;
            for (std::size_t k = 0; k < st.size(); ++k) {
                const double w = lp.w[k * std::size_t(nodes) + std::size_t(idx)];
                const auto& v = st.directions()[k];
                const std::int64_t off = grid.dim == 2 ? v[1] * grid.n[0] + v[0] : v[0];
                const double c = w * inv_h2 / st.sq_len(k);
                diag += 2.0 * c;
                at(idx, idx + off) -= c;
                at(idx, idx - off) -= c;
            }
            at(idx, idx) += diag;
        }
    }
    for (std::int64_t r = 0; r < nodes; ++r) {
        const double piv = at(r, r);
        if (std::abs(piv) < 1e-300) return false;
        const std::int64_t last = std::min(nodes - 1, r + bw);
        for (std::int64_t i = r + 1; i <= last; ++i) {
            double& a = at(i, r);
            if (a == 0.0) continue;
            const double m = a / piv;
            a = m;
            for (std::int64_t c = r + 1; c <= last; ++c) at(i, c) -= m * at(r, c);
        }
    }
    for (std::int64_t r = 0; r < nodes; ++r) {
        double acc = rhs[std::size_t(r)];
        for (std::int64_t c = std::max<std::int64_t>(0, r - bw); c < r; ++c) {
            acc -= at(r, c) * rhs[std::size_t(c)];
        }
        rhs[std::size_t(r)] = acc;
    }
    for (std::int64_t r = nodes - 1; r >= 0; --r) {
        double acc = rhs[std::size_t(r)];
        const std::int64_t last = std::min(nodes - 1, r + bw);
        for (std::int64_t c = r + 1; c <= last; ++c) acc -= at(r, c) * rhs[std::size_t(c)];
        rhs[std::size_t(r)] = acc / at(r, r);
    }
    u = std::move(rhs);
    return true;
}

// Solve one policy system in place; `u` enters with boundary data set.
// Returns false when the solver stalled (caller flags non-convergence).
bool solve_policy_system(const LinearProblem& lp, std::vector<double>& u, double rtol) {
    const Grid& grid = *lp.grid;
    if (grid.dim == 1) {
        solve_tridiagonal(lp, u);
        return true;
    }
    std::int64_t bw = 0;
    for (std::size_t k = 0; k < grid.stencil.size(); ++k) {
        const auto& v = grid.stencil.directions()[k];
        bw = std::max<std::int64_t>(bw, std::abs(v[1] * grid.n[0] + v[0]));
    }
    if (grid.nodes() <= 12000 && bw <= 200) return banded_lu(lp, u, bw);
    const std::int64_t cap = std::max<std::int64_t>(4000, 40 * grid.n[0] + 40 * grid.n[1]);
    return bicgstab(lp, u, rtol, cap) >= 0;
}

DiscreteSolution finish_solution(const SchemeContext& ctx, Grid grid, std::vector<double> values,
                                 std::vector<double> bdata, std::int64_t iterations,
                                 bool converged) {
    DiscreteSolution sol;
    sol.residual_norm = residual_sup(ctx, values);
    sol.grid = std::move(grid);
    sol.values = std::move(values);
    sol.boundary_trace = std::move(bdata);
    sol.iterations = iterations;
    sol.converged = converged;
    return sol;
}

// Howard policy iteration (exact linear solve per policy, warm-started).
DiscreteSolution howard_solve(SchemeContext& ctx, std::vector<double> values,
                              std::vector<double> bdata, double tol, std::int64_t max_iter) {
    const Grid& grid = *ctx.grid;
    const bool linear = ctx.R->form() == EllipticOperator::Form::LinearNonDiv;
    double rtol = std::clamp(tol * 1e-4, 1e-14, 1e-10);
    std::vector<PolicyCode> prev;
    std::int64_t it = 0;
    bool converged = false;
    const std::int64_t cap = linear ? 4 : std::min<std::int64_t>(max_iter, 80);
    int tightenings = 0;
    while (it < cap) {
        ++it;
        AssembledPolicy ap = assemble_policy(ctx, values);
        if (!solve_policy_system(ap.lp, values, rtol)) break;  // stalled: flag below
        const double res = residual_sup(ctx, values);
        if (res < tol) {
            converged = true;
            break;
        }
        if (linear || (!prev.empty() && prev == ap.code)) {
            // fixed policy but residual above tolerance: the inner solve is
            // the only slack left, so tighten it
            rtol = std::max(rtol * 1e-3, 5e-16);
            if (++tightenings > 3) break;
        }
        prev = std::move(ap.code);
    }
    // the assembled-once linear path counts as a single solver pass
    return finish_solution(ctx, grid, std::move(values), std::move(bdata), linear ? 1 : it,
                           converged);
}

// Damped explicit pseudo-time iteration with a nonexpansiveness monitor.
DiscreteSolution pseudo_time_solve(SchemeContext& ctx, std::vector<double> values,
                                   std::vector<double> bdata, double tol,
                                   std::int64_t max_iter) {
    const Grid& grid = *ctx.grid;
    const double c_stencil = double(grid.stencil.size());
    const double tau = grid.h * grid.h / (2.0 * grid.dim * ctx.Lam() * c_stencil);
    std::vector<double> dd, resid(values.size(), 0.0);
    double prev_step = std::numeric_limits<double>::infinity();
    std::int64_t it = 0;
    bool converged = false;
    while (it < max_iter) {
        ++it;
        double sup_res = 0.0;
        for (std::int64_t j = 0; j < grid.n[1]; ++j) {
            for (std::int64_t i = 0; i < grid.n[0]; ++i) {
                const std::int64_t idx = grid.index(i, j);
                if (!grid.interior(i, j)) {
                    resid[idx] = 0.0;
                    continue;
                }
                resid[idx] = node_residual(ctx, values, i, j, dd);
                sup_res = std::max(sup_res, std::abs(resid[idx]));
            }
        }
        if (sup_res < tol) {
            converged = true;
            break;
        }
        const double sign = ctx.damped ? -1.0 : 1.0;
        for (std::size_t k = 0; k < values.size(); ++k) values[k] += sign * tau * resid[k];
        const double step = tau * sup_res;
        double scale = 0.0;
        for (double v : values) scale = std::max(scale, std::abs(v));
        if (it > 2 && step > prev_step * (1.0 + 1e-9) + 1e-13 * (1.0 + scale)) {
            throw NonConvergent("pseudo-time update sequence expanded");
        }
        prev_step = step;
    }
    return finish_solution(ctx, grid, std::move(values), std::move(bdata), it, converged);
}

void check_solver_inputs(const EllipticOperator& op, double tol) {
    if (!(tol > 0.0)) throw ValidationError("solver tolerance must be positive");
    check_dim(op.dim());
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

std::vector<double> apply_scheme(const EllipticOperator& op, const Phase& omega, double eps,
                                 const Grid& grid, const std::vector<double>& values) {
    if (op.dim() != grid.dim) throw ValidationError("operator and grid dimension mismatch");
    if (values.size() != std::size_t(grid.nodes())) {
        throw GridMismatch("value array does not match grid");
    }
    if (!(eps > 0.0)) throw ValidationError("scale parameter must be positive");
    const EllipticOperator::Realized R = op.realize(omega);
    SchemeContext ctx = make_context(R, grid);
    ctx.eps = eps;
    std::vector<double> out(values.size(), 0.0);
    std::vector<double> dd;
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            if (!grid.interior(i, j)) continue;
            out[grid.index(i, j)] = node_residual(ctx, values, i, j, dd);
        }
    }
    return out;
}

DiscreteSolution solve_dirichlet(const EllipticOperator& op, const Phase& omega, double eps,
                                 const Box& domain, const ScalarField& g, double h, double tol,
                                 std::int64_t max_iter, SchemeMode mode) {
    check_solver_inputs(op, tol);
    if (!(eps > 0.0)) throw ValidationError("scale parameter must be positive");
    Grid grid = Grid::make(domain, h, Stencil::standard(op.dim()));
    const std::int64_t nodes = grid.nodes();
    std::vector<double> values(std::size_t(nodes), 0.0);
    std::vector<double> bdata(std::size_t(nodes), 0.0);
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            if (grid.interior(i, j)) continue;
            double x[2] = {grid.x(0, i), grid.dim == 2 ? grid.x(1, j) : 0.0};
            const double gv = g(std::span<const double>(x, std::size_t(grid.dim)));
            const std::int64_t idx = grid.index(i, j);
            values[idx] = gv;
            bdata[idx] = gv;
        }
    }
    const EllipticOperator::Realized R = op.realize(omega);
    SchemeContext ctx = make_context(R, grid);
    ctx.eps = eps;
    if (mode == SchemeMode::Iterative) {
        return pseudo_time_solve(ctx, std::move(values), std::move(bdata), tol, max_iter);
    }
    return howard_solve(ctx, std::move(values), std::move(bdata), tol, max_iter);
}

DiscreteSolution solve_damped(const EllipticOperator& op, const Phase& omega, const SymMatrix& M,
                              double delta, double L, double h, double tol, std::int64_t max_iter,
                              SchemeMode mode, const std::vector<double>* warm_start) {
    check_solver_inputs(op, tol);
    if (M.dim() != op.dim()) throw ValidationError("curvature matrix dimension mismatch");
    if (!(delta > 0.0)) throw ValidationError("damping parameter must be positive");
    if (!(L > 0.0) || !(h > 0.0)) throw ValidationError("domain half width and h must be positive");
    const auto half_cells = std::int64_t(std::ceil(L / h - 1e-12));
    const double Ls = double(half_cells) * h;
    Grid grid = Grid::make(Box::centered_cube(op.dim(), Ls), h, Stencil::standard(op.dim()));
    const std::int64_t nodes = grid.nodes();
    std::vector<double> values(std::size_t(nodes), 0.0);
    if (warm_start != nullptr) {
        if (warm_start->size() != std::size_t(nodes)) {
            throw GridMismatch("warm start does not match the damped-solve grid");
        }
        values = *warm_start;
        for (std::int64_t j = 0; j < grid.n[1]; ++j) {
            for (std::int64_t i = 0; i < grid.n[0]; ++i) {
                if (!grid.interior(i, j)) values[grid.index(i, j)] = 0.0;
            }
        }
    }
    std::vector<double> bdata(std::size_t(nodes), 0.0);
    const EllipticOperator::Realized R = op.realize(omega);
    SchemeContext ctx = make_context(R, grid);
    ctx.damped = true;
    ctx.delta = delta;
    ctx.M = M;
    fill_mdir(ctx);
    if (mode == SchemeMode::Iterative) {
        return pseudo_time_solve(ctx, std::move(values), std::move(bdata), tol, max_iter);
    }
    return howard_solve(ctx, std::move(values), std::move(bdata), tol, max_iter);
}

double sup_distance(const DiscreteSolution& a, const DiscreteSolution& b) {
    if (!a.grid.same_layout(b.grid)) throw GridMismatch("solutions live on different grids");
    double sup = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        sup = std::max(sup, std::abs(a.values[k] - b.values[k]));
    }
    return sup;
}

double sup_distance(const DiscreteSolution& a, const ScalarField& exact) {
    const Grid& grid = a.grid;
    double sup = 0.0;
    for (std::int64_t j = 0; j < grid.n[1]; ++j) {
        for (std::int64_t i = 0; i < grid.n[0]; ++i) {
            double x[2] = {grid.x(0, i), grid.dim == 2 ? grid.x(1, j) : 0.0};
            const double ev = exact(std::span<const double>(x, std::size_t(grid.dim)));
            sup = std::max(sup, std::abs(a.values[grid.index(i, j)] - ev));
        }
    }
    return sup;
}

}  // namespace homog
