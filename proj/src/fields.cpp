#include "homog/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "homog/errors.hpp"
#include "homog/rng.hpp"

namespace homog {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
    double r = std::fmod(a, two_pi);
    if (r < 0.0) r += two_pi;
    return r;
}

// average of cos(xi . x) over the ball B(0,t), as a function of s = |xi| t
double radial_factor(int dim, double s) {
    if (s == 0.0) return 1.0;
    if (dim == 1) return std::sin(s) / s;
    if (dim == 2) return 2.0 * std::cyl_bessel_j(1, s) / s;
    throw ValidationError("ergodicity_residual: only d = 1, 2 supported");
}

}  // namespace

Realization::Realization(TrigPolynomial trig, NullFunction null)
    : trig_(std::move(trig)), null_(std::move(null)) {
    if (trig_.dim() != null_.dim())
        throw ValidationError("Realization: dimension mismatch");
}

double Realization::operator()(std::span<const double> y) const { return trig_(y) + null_(y); }

double Realization::operator()(double y) const {
    return (*this)(std::span<const double>(&y, 1));
}

ScalarField Realization::as_field() const {
    return [r = *this](std::span<const double> y) { return r(y); };
}

QuasiPeriodicEnsemble::QuasiPeriodicEnsemble(int torus_dim, int space_dim,
                                             std::vector<double> freq_matrix_row_major,
                                             int m_max)
    : k_(torus_dim), d_(space_dim), m_max_(m_max), lam_(std::move(freq_matrix_row_major)) {
    if (k_ < 1 || d_ < 1) throw ValidationError("ensemble: dimensions must be positive");
    if (int(lam_.size()) != k_ * d_)
        throw ValidationError("ensemble: frequency matrix must be torus_dim x space_dim");
    if (m_max_ < 0) throw ValidationError("ensemble: m_max must be >= 0");
    if (m_max_ == 0) return;  // certificate disabled (resonant diagnostics)

    // m^T Lambda != 0 for all 0 < |m|_inf <= m_max; enumerate half the cube.
    std::vector<int> m(k_, -m_max_);
    std::vector<double> mf(k_);
    for (;;) {
        int sign = 0;
        for (int v : m) {
            if (v > 0) { sign = 1; break; }
            if (v < 0) { sign = -1; break; }
        }
        if (sign == 1) {
            for (int i = 0; i < k_; ++i) mf[i] = double(m[i]);
            certify_nonresonant(mf, "ergodicity certificate");
        }
        std::size_t i = 0;
        while (i < std::size_t(k_) && m[i] == m_max_) m[i++] = -m_max_;
        if (i == std::size_t(k_)) break;
        ++m[i];
    }
}

void QuasiPeriodicEnsemble::certify_nonresonant(std::span<const double> m_freq,
                                                const std::string& where) const {
    double worst = 0.0;
    for (int j = 0; j < d_; ++j) {
        double v = 0.0;
        for (int i = 0; i < k_; ++i) v += m_freq[i] * lam_[std::size_t(i) * d_ + j];
        worst = std::max(worst, std::abs(v));
    }
    if (worst <= 1e-10) {
        std::string ms;
        for (double v : m_freq) ms += (ms.empty() ? "" : " ") + std::to_string(v);
        throw ErgodicityViolation(where + ": integer vector (" + ms +
                                  ") annihilates the frequency matrix (resonance)");
    }
}

void QuasiPeriodicEnsemble::add_channel(const std::string& name, TrigPolynomial profile) {
    if (profile.dim() != k_)
        throw ValidationError("channel '" + name + "': profile must live on the torus (dim = torus_dim)");
    for (const auto& term : profile.terms()) {
        for (double v : term.freq)
            if (v != std::floor(v) || std::abs(v) > 1e6)
                throw ValidationError("channel '" + name +
                                      "': torus profile frequencies must be integers (2pi-periodicity)");
        if (m_max_ > 0) certify_nonresonant(term.freq, "channel '" + name + "'");
    }
    channels_.insert_or_assign(name, std::move(profile));
}

void QuasiPeriodicEnsemble::add_null_profile(const std::string& name, NullFunction null) {
    if (null.dim() != d_)
        throw ValidationError("null profile '" + name + "': dimension must match the space");
    nulls_.insert_or_assign(name, std::move(null));
}

bool QuasiPeriodicEnsemble::has_channel(const std::string& name) const {
    return channels_.count(name) != 0;
}

const TrigPolynomial& QuasiPeriodicEnsemble::profile(const std::string& name) const {
    auto it = channels_.find(name);
    if (it == channels_.end()) throw ValidationError("unknown channel '" + name + "'");
    return it->second;
}

const NullFunction& QuasiPeriodicEnsemble::null_profile(const std::string& name) const {
    auto it = nulls_.find(name);
    if (it != nulls_.end()) return it->second;
    static const NullFunction z1 = NullFunction::zero(1), z2 = NullFunction::zero(2);
    return d_ == 1 ? z1 : z2;
}

std::vector<std::string> QuasiPeriodicEnsemble::channel_names() const {
    std::vector<std::string> names;
    names.reserve(channels_.size());
    for (const auto& [name, _] : channels_) names.push_back(name);
    return names;
}

Phase QuasiPeriodicEnsemble::sample_phase(std::uint64_t seed) const {
    Rng rng(seed);
    Phase w;
    w.angles.resize(k_);
    for (int i = 0; i < k_; ++i) w.angles[i] = rng.uniform(0.0, two_pi);
    return w;
}

std::vector<double> QuasiPeriodicEnsemble::lambda_times(std::span<const double> y) const {
    std::vector<double> out(k_, 0.0);
    for (int i = 0; i < k_; ++i)
        for (int j = 0; j < d_; ++j) out[i] += lam_[std::size_t(i) * d_ + j] * y[j];
    return out;
}

Phase QuasiPeriodicEnsemble::shift(const Phase& omega, std::span<const double> y) const {
    if (int(omega.angles.size()) != k_ || int(y.size()) != d_)
        throw ValidationError("shift: dimension mismatch");
    const auto dy = lambda_times(y);
    Phase out;
    out.angles.resize(k_);
    for (int i = 0; i < k_; ++i) out.angles[i] = wrap_angle(omega.angles[i] + dy[i]);
    return out;
}

Phase QuasiPeriodicEnsemble::shift(const Phase& omega, double y) const {
    return shift(omega, std::span<const double>(&y, 1));
}

Realization QuasiPeriodicEnsemble::realization(const Phase& omega,
                                               const std::string& channel) const {
    if (int(omega.angles.size()) != k_) throw ValidationError("realization: phase dimension mismatch");
    const TrigPolynomial& prof = profile(channel);
    TrigPolynomial out(d_, prof.constant());
    std::vector<double> xi(d_);
    for (const auto& term : prof.terms()) {
        double alpha = 0.0;
        for (int i = 0; i < k_; ++i) alpha += term.freq[i] * omega.angles[i];
        const double ca = std::cos(alpha), sa = std::sin(alpha);
        // a cos(alpha + xi.y) + b sin(alpha + xi.y), rotated into y-coefficients
        const double a = term.cos_coef * ca + term.sin_coef * sa;
        const double b = term.sin_coef * ca - term.cos_coef * sa;
        bool zero = true;
        for (int j = 0; j < d_; ++j) {
            xi[j] = 0.0;
            for (int i = 0; i < k_; ++i) xi[j] += lam_[std::size_t(i) * d_ + j] * term.freq[i];
            if (xi[j] != 0.0) zero = false;
        }
        if (zero) out.set_constant(out.constant() + a);  // resonant term froze to a constant
        else out.add_term(xi, a, b);
    }
    auto it = nulls_.find(channel);
    return Realization(std::move(out), it == nulls_.end() ? NullFunction::zero(d_) : it->second);
}

double QuasiPeriodicEnsemble::ensemble_mean(const std::string& channel) const {
    const TrigPolynomial& prof = profile(channel);
    long maxf = 0;
    for (const auto& term : prof.terms())
        for (double v : term.freq) maxf = std::max(maxf, long(std::llround(std::abs(v))));
    const long n = 4 * maxf + 5;  // midpoint rule, exact for these frequencies
    double total = 1.0;
    for (int i = 0; i < k_; ++i) total *= double(n);
    if (total > 5e7) throw ValidationError("ensemble_mean: quadrature grid too large");

    std::vector<long> idx(k_, 0);
    std::vector<double> theta(k_);
    double acc = 0.0;
    for (;;) {
        for (int i = 0; i < k_; ++i) theta[i] = (double(idx[i]) + 0.5) * two_pi / double(n);
        acc += prof(theta);
        std::size_t i = 0;
        while (i < std::size_t(k_) && idx[i] == n - 1) idx[i++] = 0;
        if (i == std::size_t(k_)) break;
        ++idx[i];
    }
    return acc / total;
}

BirkhoffReport birkhoff_compare(const QuasiPeriodicEnsemble& ens, const std::string& channel,
                                int n_phases, std::span<const double> radii,
                                long samples_per_radius, std::uint64_t seed, double tol) {
    if (n_phases < 1) throw ValidationError("birkhoff_compare: need at least one phase");
    BirkhoffReport rep;
    rep.ensemble_mean = ens.ensemble_mean(channel);
    for (int p = 0; p < n_phases; ++p) {
        const Phase omega = ens.sample_phase(seed + std::uint64_t(p));
        const Realization real = ens.realization(omega, channel);
        // collect the averages without an inner stabilization gate; the
        // ergodicity gate below is the contract here
        const auto est = mean_value_numeric(real.as_field(), ens.space_dim(), radii,
                                            samples_per_radius,
                                            std::numeric_limits<double>::infinity());
        rep.spatial_means.push_back(est.value);
        rep.max_gap = std::max(rep.max_gap, std::abs(est.value - rep.ensemble_mean));
    }
    if (rep.max_gap > tol)
        throw ErgodicityViolation("orbit averages disagree with the ensemble mean (gap " +
                                  std::to_string(rep.max_gap) + " at the largest radius)");
    return rep;
}

double ergodicity_residual(const QuasiPeriodicEnsemble& ens, const TrigPolynomial& f_on_torus,
                           std::span<const double> t_schedule) {
    if (f_on_torus.dim() != ens.torus_dim())
        throw ValidationError("ergodicity_residual: profile must live on the torus");
    if (t_schedule.empty()) throw ValidationError("ergodicity_residual: empty t schedule");
    for (std::size_t i = 0; i + 1 < t_schedule.size(); ++i)
        if (!(t_schedule[i] < t_schedule[i + 1]))
            throw ValidationError("ergodicity_residual: t schedule must increase");

    const int d = ens.space_dim();
    const auto& lam = ens.freq_matrix();
    const int k = ens.torus_dim();
    double residual = 0.0;
    for (double t : t_schedule) {
        if (t <= 0.0) throw ValidationError("ergodicity_residual: t must be positive");
        double acc = 0.0;
        for (const auto& term : f_on_torus.terms()) {
            double norm2 = 0.0;
            for (int j = 0; j < d; ++j) {
                double xi = 0.0;
                for (int i = 0; i < k; ++i) xi += lam[std::size_t(i) * d + j] * term.freq[i];
                norm2 += xi * xi;
            }
            const double w = radial_factor(d, std::sqrt(norm2) * t);
            acc += 0.5 * w * w *
                   (term.cos_coef * term.cos_coef + term.sin_coef * term.sin_coef);
        }
        residual = acc;
    }
    return residual;
}

}  // namespace homog
