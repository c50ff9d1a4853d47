#include "homog/ap_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "homog/errors.hpp"

namespace homog {

namespace {

void check_schedule(std::span<const double> xs, const char* what) {
    if (xs.size() < 3) throw ValidationError(std::string(what) + ": need at least 3 entries");
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        if (!(xs[i] < xs[i + 1]) || xs[i] <= 0.0)
            throw ValidationError(std::string(what) + ": entries must be positive and strictly increasing");
}

double spread_of_last3(const std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t k = n < 3 ? n : 3;
    double lo = v[n - k], hi = v[n - k];
    for (std::size_t i = n - k; i < n; ++i) {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    return hi - lo;
}

// Deterministic Kronecker (irrational rotation) sequence in [0,1)^d.
std::vector<double> kronecker_alphas(int dim) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    std::vector<double> a(dim);
    for (int i = 0; i < dim; ++i) {
        const double s = std::sqrt(double(primes[i % 8] + 8 * (i / 8)));
        a[i] = s - std::floor(s);
    }
    return a;
}

double ball_average(const ScalarField& f, int dim, double R, long samples) {
    if (dim == 1) {
        const long n = std::max<long>(samples, 8);
        const double h = 2.0 * R / double(n);
        double acc = 0.0;
        for (long i = 0; i < n; ++i) {
            const double x = -R + (double(i) + 0.5) * h;
            acc += f(std::span<const double>(&x, 1));
        }
        return acc / double(n);
    }
    if (dim == 2) {
        const long m = std::max<long>(long(std::sqrt(double(samples))), 8);
        const double h = 2.0 * R / double(m);
        double acc = 0.0;
        long kept = 0;
        std::array<double, 2> p{};
        for (long i = 0; i < m; ++i) {
            p[0] = -R + (double(i) + 0.5) * h;
            for (long j = 0; j < m; ++j) {
                p[1] = -R + (double(j) + 0.5) * h;
                if (p[0] * p[0] + p[1] * p[1] > R * R) continue;
                acc += f(p);
                ++kept;
            }
        }
        return acc / double(kept);
    }
    // d > 2: rejection from the cube along a Kronecker sequence
    const auto alpha = kronecker_alphas(dim);
    std::vector<double> p(dim);
    double acc = 0.0;
    long kept = 0;
    for (long j = 1; kept < samples && j < 64 * samples; ++j) {
        double r2 = 0.0;
        for (int i = 0; i < dim; ++i) {
            double u = double(j) * alpha[i] + 0.5;
            u -= std::floor(u);
            p[i] = (2.0 * u - 1.0) * R;
            r2 += p[i] * p[i];
        }
        if (r2 > R * R) continue;
        acc += f(p);
        ++kept;
    }
    return acc / double(kept);
}

double cube_average_abs_pow(const ScalarField& f, int dim, double L, double p, long samples) {
    if (dim == 1) {
        const long n = std::max<long>(samples, 8);
        const double h = 2.0 * L / double(n);
        double acc = 0.0;
        for (long i = 0; i < n; ++i) {
            const double x = -L + (double(i) + 0.5) * h;
            acc += std::pow(std::abs(f(std::span<const double>(&x, 1))), p);
        }
        return acc / double(n);
    }
    if (dim == 2) {
        const long m = std::max<long>(long(std::sqrt(double(samples))), 8);
        const double h = 2.0 * L / double(m);
        double acc = 0.0;
        std::array<double, 2> q{};
        for (long i = 0; i < m; ++i) {
            q[0] = -L + (double(i) + 0.5) * h;
            for (long j = 0; j < m; ++j) {
                q[1] = -L + (double(j) + 0.5) * h;
                acc += std::pow(std::abs(f(q)), p);
            }
        }
        return acc / double(m * m);
    }
    const auto alpha = kronecker_alphas(dim);
    std::vector<double> q(dim);
    double acc = 0.0;
    for (long j = 1; j <= samples; ++j) {
        for (int i = 0; i < dim; ++i) {
            double u = double(j) * alpha[i] + 0.5;
            u -= std::floor(u);
            q[i] = (2.0 * u - 1.0) * L;
        }
        acc += std::pow(std::abs(f(q)), p);
    }
    return acc / double(samples);
}

// Canonical form of a frequency vector: flips the sign so the first nonzero
// component is positive.  Returns 0 for zero, else +/-1.
int canonical_sign(std::span<const double> xi) {
    for (double c : xi) {
        if (c > 0.0) return 1;
        if (c < 0.0) return -1;
    }
    return 0;
}

struct LatticePoint {
    std::vector<int> k;       // multi-index over all base entries
    std::vector<double> xi;   // canonicalized frequency vector in R^d
    int sign = 1;             // canonicalization sign applied to xi
};

// Enumerates the canonical half of the integer lattice spanned by the base
// frequencies, |k_b| <= cap, excluding k = 0.  Fails fast on frequency
// collisions (rational dependence of the declared base).
std::vector<LatticePoint> half_lattice(const std::vector<std::vector<double>>& base,
                                       int dim, int cap) {
    if (int(base.size()) != dim)
        throw ValidationError("frequency base: need one list per axis");
    std::size_t nb = 0;
    for (const auto& axis : base) {
        for (double lam : axis)
            if (lam == 0.0) throw ValidationError("frequency base: zero base frequency");
        nb += axis.size();
    }
    if (nb == 0) throw ValidationError("frequency base: empty");
    const double width = 2.0 * cap + 1.0;
    if (std::pow(width, double(nb)) > 4e7)
        throw ValidationError("frequency lattice too large; lower the order or the base count");

    std::vector<LatticePoint> pts;
    std::vector<int> k(nb, -cap);
    for (;;) {
        // canonical half: first nonzero k entry positive
        int ks = 0;
        for (int v : k) {
            if (v > 0) { ks = 1; break; }
            if (v < 0) { ks = -1; break; }
        }
        if (ks == 1) {
            LatticePoint pt;
            pt.k = k;
            pt.xi.assign(dim, 0.0);
            std::size_t b = 0;
            for (int i = 0; i < dim; ++i)
                for (double lam : base[i]) pt.xi[i] += double(k[b++]) * lam;
            pt.sign = canonical_sign(pt.xi);
            if (pt.sign == 0)
                throw ValidationError("frequency base is rationally dependent (lattice frequency collapsed to zero)");
            if (pt.sign < 0)
                for (double& c : pt.xi) c = -c;
            pts.push_back(std::move(pt));
        }
        // odometer
        std::size_t i = 0;
        while (i < nb && k[i] == cap) k[i++] = -cap;
        if (i == nb) break;
        ++k[i];
    }
    std::sort(pts.begin(), pts.end(),
              [](const LatticePoint& l, const LatticePoint& r) { return l.xi < r.xi; });
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        if (pts[i].xi == pts[i + 1].xi)
            throw ValidationError("frequency base is rationally dependent (two lattice points share a frequency)");
    return pts;
}

double fejer_weight(const std::vector<int>& k, int order) {
    double w = 1.0;
    for (int v : k) {
        const double t = 1.0 - std::abs(double(v)) / double(order + 1);
        if (t <= 0.0) return 0.0;
        w *= t;
    }
    return w;
}

}  // namespace

ScalarField field_1d(std::function<double(double)> f) {
    return [g = std::move(f)](std::span<const double> y) { return g(y[0]); };
}

WStarAPFunction::WStarAPFunction(TrigPolynomial ap, NullFunction null)
    : ap_(std::move(ap)), null_(std::move(null)) {
    if (ap_.dim() != null_.dim())
        throw ValidationError("WStarAPFunction: dimension mismatch between parts");
}

double WStarAPFunction::operator()(std::span<const double> y) const {
    return ap_(y) + null_(y);
}

double WStarAPFunction::operator()(double y) const {
    return (*this)(std::span<const double>(&y, 1));
}

double mean_value_exact(const TrigPolynomial& f) { return f.constant(); }

MeanValueEstimate mean_value_numeric(const ScalarField& f, int dim,
                                     std::span<const double> radii,
                                     long samples_per_radius, double tol) {
    check_schedule(radii, "mean_value_numeric radii");
    MeanValueEstimate est;
    std::vector<double> values;
    for (double R : radii) {
        values.push_back(ball_average(f, dim, R, samples_per_radius));
        est.radii_used.push_back(R);
    }
    est.value = values.back();
    est.tail_spread = spread_of_last3(values);
    if (est.tail_spread > tol)
        throw NonConvergent("mean value did not stabilize: tail spread " +
                            std::to_string(est.tail_spread) + " exceeds tolerance");
    return est;
}

BesicovitchEstimate besicovitch_seminorm(const ScalarField& f, int dim, double p,
                                         std::span<const double> lengths,
                                         long samples_per_length, double tol) {
    if (p < 1.0) throw ValidationError("besicovitch_seminorm: p must be >= 1");
    check_schedule(lengths, "besicovitch_seminorm lengths");
    BesicovitchEstimate est;
    std::vector<double> values;
    for (double L : lengths) {
        values.push_back(std::pow(cube_average_abs_pow(f, dim, L, p, samples_per_length), 1.0 / p));
        est.lengths_used.push_back(L);
    }
    est.value = values.back();
    est.tail_spread = spread_of_last3(values);
    if (est.tail_spread > tol)
        throw NonConvergent("Besicovitch seminorm did not stabilize: tail spread " +
                            std::to_string(est.tail_spread) + " exceeds tolerance");
    return est;
}

TrigPolynomial bochner_fejer_kernel(const std::vector<std::vector<double>>& base_frequencies,
                                    int order) {
    if (order < 1) throw ValidationError("bochner_fejer_kernel: order must be >= 1");
    const int dim = int(base_frequencies.size());
    const auto pts = half_lattice(base_frequencies, dim, order);
    TrigPolynomial phi(dim, 1.0);  // k = 0 carries weight 1
    for (const auto& pt : pts) {
        const double w = fejer_weight(pt.k, order);
        if (w == 0.0) continue;
        phi.add_term(pt.xi, 2.0 * w, 0.0);  // the -k twin doubles the cosine
    }
    return phi;
}

TrigPolynomial ap_convolve(const TrigPolynomial& phi, const TrigPolynomial& f) {
    if (phi.dim() != f.dim()) throw ValidationError("ap_convolve: dimension mismatch");
    TrigPolynomial out(f.dim(), phi.constant() * f.constant());
    // both term lists are sorted on canonical frequencies: merge walk
    const auto& pt = phi.terms();
    const auto& ft = f.terms();
    std::size_t i = 0, j = 0;
    while (i < pt.size() && j < ft.size()) {
        if (pt[i].freq < ft[j].freq) { ++i; continue; }
        if (ft[j].freq < pt[i].freq) { ++j; continue; }
        const double p = pt[i].cos_coef, q = pt[i].sin_coef;
        const double a = ft[j].cos_coef, b = ft[j].sin_coef;
        // M_z[(p cos + q sin)(lam z) * f-term(lam (y-z))]
        out.add_term(ft[j].freq, 0.5 * (a * p - b * q), 0.5 * (b * p + a * q));
        ++i, ++j;
    }
    return out;
}

TrigPolynomial ap_convolve(const TrigPolynomial& phi, const WStarAPFunction& f) {
    return ap_convolve(phi, f.ap_part());  // the null part has mean-zero modulus: annihilated
}

TrigPolynomial extract_ap_component(const ScalarField& f, int dim,
                                    const std::vector<std::vector<double>>& base_frequencies,
                                    const ExtractOptions& opts) {
    if (dim < 1 || dim > 2)
        throw ValidationError("extract_ap_component: only d = 1, 2 supported");
    if (opts.order_schedule.empty())
        throw ValidationError("extract_ap_component: empty order schedule");
    for (std::size_t i = 0; i + 1 < opts.order_schedule.size(); ++i)
        if (opts.order_schedule[i] >= opts.order_schedule[i + 1])
            throw ValidationError("extract_ap_component: order schedule must increase");

    const auto pts = half_lattice(base_frequencies, dim, opts.lattice_cap);

    // Bohr coefficients by cube-average quadrature, one pass over the grid.
    const double R = opts.mean_radius, dx = opts.mean_dx;
    const long n1 = long(std::floor(2.0 * R / dx));
    std::vector<double> ca(pts.size(), 0.0), sa(pts.size(), 0.0);
    double c0 = 0.0;
    long total = 0;
    std::vector<double> y(dim);
    const long n2 = dim == 2 ? n1 : 1;
    for (long i = 0; i < n1; ++i) {
        y[0] = -R + (double(i) + 0.5) * dx;
        for (long j = 0; j < n2; ++j) {
            if (dim == 2) y[1] = -R + (double(j) + 0.5) * dx;
            const double fy = f(y);
            c0 += fy;
            for (std::size_t t = 0; t < pts.size(); ++t) {
                double ph = 0.0;
                for (int a = 0; a < dim; ++a) ph += pts[t].xi[a] * y[a];
                ca[t] += fy * std::cos(ph);
                sa[t] += fy * std::sin(ph);
            }
            ++total;
        }
    }
    c0 /= double(total);
    struct Coef { const LatticePoint* pt; double a, b; };
    std::vector<Coef> kept;
    for (std::size_t t = 0; t < pts.size(); ++t) {
        const double a = 2.0 * ca[t] / double(total);
        const double b = 2.0 * sa[t] / double(total);
        if (std::max(std::abs(a), std::abs(b)) > opts.noise_floor)
            kept.push_back({&pts[t], a, b});
    }

    // Fejer-tapered approximants along the order schedule.
    auto approximant = [&](int order) {
        TrigPolynomial g(dim, c0);
        for (const auto& c : kept) {
            const double w = fejer_weight(c.pt->k, order);
            if (w != 0.0) g.add_term(c.pt->xi, w * c.a, w * c.b);
        }
        return g;
    };
    std::vector<TrigPolynomial> gs;
    gs.reserve(opts.order_schedule.size());
    for (int n : opts.order_schedule) gs.push_back(approximant(n));
    if (gs.size() == 1) return gs[0];

    const int np = dim == 1 ? opts.sup_points : std::min(opts.sup_points, 201);
    auto sup_gap = [&](const TrigPolynomial& g1, const TrigPolynomial& g2) {
        double gap = 0.0;
        std::vector<double> x(dim);
        const double w = opts.sup_half_width;
        const long m2 = dim == 2 ? np : 1;
        for (long i = 0; i < np; ++i) {
            x[0] = -w + 2.0 * w * double(i) / double(np - 1);
            for (long j = 0; j < m2; ++j) {
                if (dim == 2) x[1] = -w + 2.0 * w * double(j) / double(np - 1);
                gap = std::max(gap, std::abs(g1(x) - g2(x)));
            }
        }
        return gap;
    };
    for (std::size_t j = gs.size() - 1; j >= 1; --j) {
        if (sup_gap(gs[j], gs[j - 1]) < opts.sup_tol) return gs[j];
    }
    throw NoConvergence("extract_ap_component: sup-grid deviations never fell below tolerance; "
                        "the declared frequency base likely misses part of the spectrum");
}

WStarAPFunction fs_synthesize(const std::vector<std::pair<double, double>>& atoms,
                              double density_x0, double density_dx,
                              std::vector<double> density) {
    TrigPolynomial ap(1, 0.0);
    for (const auto& [freq, weight] : atoms) {
        if (freq == 0.0) ap.set_constant(ap.constant() + weight);
        else ap.add_term(freq, weight, 0.0);
    }
    bool trivial = true;
    for (double v : density)
        if (v != 0.0) { trivial = false; break; }
    NullFunction null = trivial ? NullFunction::zero(1)
                                : NullFunction::fs_density_part(density_x0, density_dx,
                                                                std::move(density));
    return WStarAPFunction(std::move(ap), std::move(null));
}

}  // namespace homog
