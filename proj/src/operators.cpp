#include "homog/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "homog/errors.hpp"
#include "homog/rng.hpp"

namespace homog {

SymMatrix::SymMatrix(int dim) : dim_(dim) {
    if (dim_ < 1 || dim_ > 2) throw ValidationError("SymMatrix: dim must be 1 or 2");
}

SymMatrix SymMatrix::of_1d(double m) {
    SymMatrix s(1);
    s.e_[0] = m;
    return s;
}

SymMatrix SymMatrix::of_2d(double xx, double xy, double yy) {
    SymMatrix s(2);
    s.e_ = {xx, xy, yy};
    return s;
}

SymMatrix SymMatrix::identity(int dim) {
    return dim == 1 ? of_1d(1.0) : of_2d(1.0, 0.0, 1.0);
}

double SymMatrix::operator()(int i, int j) const {
    if (i < 0 || j < 0 || i >= dim_ || j >= dim_) throw ValidationError("SymMatrix: index");
    return e_[std::size_t(i + j)];  // (0,0)->0, (0,1)/(1,0)->1, (1,1)->2
}

void SymMatrix::set(int i, int j, double v) {
    if (i < 0 || j < 0 || i >= dim_ || j >= dim_) throw ValidationError("SymMatrix: index");
    e_[std::size_t(i + j)] = v;
}

double SymMatrix::trace() const { return dim_ == 1 ? e_[0] : e_[0] + e_[2]; }

std::array<double, 2> SymMatrix::eigenvalues() const {
    if (dim_ == 1) return {e_[0], 0.0};
    const double mean = 0.5 * (e_[0] + e_[2]);
    const double rad = std::hypot(0.5 * (e_[0] - e_[2]), e_[1]);
    return {mean - rad, mean + rad};
}

double SymMatrix::norm_spectral() const {
    const auto ev = eigenvalues();
    return dim_ == 1 ? std::abs(ev[0]) : std::max(std::abs(ev[0]), std::abs(ev[1]));
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& rhs) {
    if (dim_ != rhs.dim_) throw ValidationError("SymMatrix: dimension mismatch");
    for (int i = 0; i < 3; ++i) e_[std::size_t(i)] += rhs.e_[std::size_t(i)];
    return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& rhs) {
    if (dim_ != rhs.dim_) throw ValidationError("SymMatrix: dimension mismatch");
    for (int i = 0; i < 3; ++i) e_[std::size_t(i)] -= rhs.e_[std::size_t(i)];
    return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
    for (double& v : e_) v *= s;
    return *this;
}

double pucci(PucciKind kind, double lambda, double Lambda, const SymMatrix& M) {
    if (!(lambda > 0.0) || lambda > Lambda)
        throw ValidationError("pucci: need 0 < lambda <= Lambda");
    const auto ev = M.eigenvalues();
    double pos = 0.0, neg = 0.0;
    for (int i = 0; i < M.dim(); ++i) {
        pos += std::max(ev[std::size_t(i)], 0.0);
        neg += std::max(-ev[std::size_t(i)], 0.0);
    }
    return kind == PucciKind::Plus ? Lambda * pos - lambda * neg
                                   : lambda * pos - Lambda * neg;
}

namespace {

double trace_product(const SymMatrix& a, const SymMatrix& M) {
    if (a.dim() == 1) return a(0, 0) * M(0, 0);
    return a(0, 0) * M(0, 0) + 2.0 * a(0, 1) * M(0, 1) + a(1, 1) * M(1, 1);
}

void check_constants(double lambda, double Lambda) {
    if (!(lambda > 0.0) || lambda > Lambda)
        throw ValidationError("elliptic operator: need 0 < lambda <= Lambda");
}

}  // namespace

EllipticOperator EllipticOperator::pucci_plus(int dim, double lambda, double Lambda) {
    check_constants(lambda, Lambda);
    EllipticOperator op;
    op.form_ = Form::PucciPlus;
    op.dim_ = dim;
    op.lambda_ = lambda;
    op.Lambda_ = Lambda;
    return op;
}

EllipticOperator EllipticOperator::pucci_minus(int dim, double lambda, double Lambda) {
    EllipticOperator op = pucci_plus(dim, lambda, Lambda);
    op.form_ = Form::PucciMinus;
    return op;
}

EllipticOperator EllipticOperator::linear_scalar(std::shared_ptr<const QuasiPeriodicEnsemble> ens,
                                                 std::string channel, double lambda,
                                                 double Lambda, ModulusSpec modulus) {
    check_constants(lambda, Lambda);
    if (!ens) throw ValidationError("linear operator: ensemble required");
    if (!ens->has_channel(channel))
        throw ValidationError("linear operator: unknown channel '" + channel + "'");
    EllipticOperator op;
    op.form_ = Form::LinearNonDiv;
    op.dim_ = ens->space_dim();
    op.lambda_ = lambda;
    op.Lambda_ = Lambda;
    op.modulus_ = modulus;
    op.ens_ = std::move(ens);
    op.coeff_channels_ = {std::move(channel)};
    return op;
}

EllipticOperator EllipticOperator::linear_matrix(std::shared_ptr<const QuasiPeriodicEnsemble> ens,
                                                 std::array<std::string, 3> channels,
                                                 double lambda, double Lambda,
                                                 ModulusSpec modulus) {
    check_constants(lambda, Lambda);
    if (!ens) throw ValidationError("linear operator: ensemble required");
    if (ens->space_dim() != 2)
        throw ValidationError("matrix-valued coefficient needs a 2-D field");
    for (const auto& c : channels)
        if (!ens->has_channel(c))
            throw ValidationError("linear operator: unknown channel '" + c + "'");
    EllipticOperator op;
    op.form_ = Form::LinearNonDiv;
    op.dim_ = 2;
    op.lambda_ = lambda;
    op.Lambda_ = Lambda;
    op.modulus_ = modulus;
    op.ens_ = std::move(ens);
    op.coeff_channels_ = {channels[0], channels[1], channels[2]};
    return op;
}

EllipticOperator EllipticOperator::linear_constant(const SymMatrix& a, double lambda,
                                                   double Lambda) {
    check_constants(lambda, Lambda);
    EllipticOperator op;
    op.form_ = Form::LinearNonDiv;
    op.dim_ = a.dim();
    op.lambda_ = lambda;
    op.Lambda_ = Lambda;
    op.const_coeff_ = a;
    return op;
}

EllipticOperator EllipticOperator::bellman_min(std::shared_ptr<const QuasiPeriodicEnsemble> ens,
                                               std::vector<BellmanBranch> branches,
                                               double lambda, double Lambda,
                                               ModulusSpec modulus) {
    check_constants(lambda, Lambda);
    if (!ens) throw ValidationError("bellman operator: ensemble required");
    if (branches.empty()) throw ValidationError("bellman operator: needs at least one branch");
    for (const auto& b : branches) {
        if (!ens->has_channel(b.coeff_channel))
            throw ValidationError("bellman operator: unknown channel '" + b.coeff_channel + "'");
        if (!b.forcing_channel.empty() && !ens->has_channel(b.forcing_channel))
            throw ValidationError("bellman operator: unknown channel '" + b.forcing_channel + "'");
    }
    EllipticOperator op;
    op.form_ = Form::BellmanMin;
    op.dim_ = ens->space_dim();
    op.lambda_ = lambda;
    op.Lambda_ = Lambda;
    op.modulus_ = modulus;
    op.ens_ = std::move(ens);
    op.branches_ = std::move(branches);
    return op;
}

EllipticOperator::Realized EllipticOperator::realize(const Phase& omega) const {
    Realized r;
    r.form_ = form_;
    r.dim_ = dim_;
    r.lambda_ = lambda_;
    r.Lambda_ = Lambda_;
    r.const_coeff_ = const_coeff_;
    for (const auto& c : coeff_channels_) r.coeff_parts_.push_back(ens_->realization(omega, c));
    for (const auto& b : branches_) {
        r.branch_coeffs_.push_back({ens_->realization(omega, b.coeff_channel)});
        if (b.forcing_channel.empty())
            r.branch_forcings_.emplace_back(std::nullopt);
        else
            r.branch_forcings_.emplace_back(ens_->realization(omega, b.forcing_channel));
        r.branch_forcing_consts_.push_back(b.forcing_const);
    }
    return r;
}

SymMatrix EllipticOperator::Realized::coeff(std::span<const double> y) const {
    if (form_ != Form::LinearNonDiv)
        throw ValidationError("coefficient query on a non-linear operator form");
    if (const_coeff_) return *const_coeff_;
    if (coeff_parts_.size() == 1) {
        const double a = coeff_parts_[0](y);
        return dim_ == 1 ? SymMatrix::of_1d(a) : SymMatrix::of_2d(a, 0.0, a);
    }
    return SymMatrix::of_2d(coeff_parts_[0](y), coeff_parts_[1](y), coeff_parts_[2](y));
}

SymMatrix EllipticOperator::Realized::branch_coeff(int i, std::span<const double> y) const {
    const double a = branch_coeffs_[std::size_t(i)][0](y);
    return dim_ == 1 ? SymMatrix::of_1d(a) : SymMatrix::of_2d(a, 0.0, a);
}

double EllipticOperator::Realized::branch_forcing(int i, std::span<const double> y) const {
    const auto& f = branch_forcings_[std::size_t(i)];
    return f ? (*f)(y) : branch_forcing_consts_[std::size_t(i)];
}

double EllipticOperator::Realized::eval(std::span<const double> y, const SymMatrix& M) const {
    switch (form_) {
    case Form::LinearNonDiv:
        return trace_product(coeff(y), M);
    case Form::PucciPlus:
        return pucci(PucciKind::Plus, lambda_, Lambda_, M);
    case Form::PucciMinus:
        return pucci(PucciKind::Minus, lambda_, Lambda_, M);
    case Form::BellmanMin: {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_branches(); ++i)
            best = std::min(best, trace_product(branch_coeff(i, y), M) - branch_forcing(i, y));
        return best;
    }
    }
    return 0.0;
}

double EllipticOperator::eval(const Phase& omega, std::span<const double> y,
                              const SymMatrix& M) const {
    if (M.dim() != dim_) throw ValidationError("eval: matrix dimension mismatch");
    switch (form_) {
    case Form::PucciPlus:
        return pucci(PucciKind::Plus, lambda_, Lambda_, M);
    case Form::PucciMinus:
        return pucci(PucciKind::Minus, lambda_, Lambda_, M);
    default:
        return realize(omega).eval(y, M);
    }
}

namespace {

SymMatrix random_sym(Rng& rng, int dim, double scale) {
    if (dim == 1) return SymMatrix::of_1d(scale * rng.normal());
    return SymMatrix::of_2d(scale * rng.normal(), scale * rng.normal(), scale * rng.normal());
}

SymMatrix random_psd(Rng& rng, int dim, double scale) {
    if (dim == 1) {
        const double b = scale * rng.normal();
        return SymMatrix::of_1d(b * b);
    }
    // B^T B for a random 2x2 B
    const double b11 = scale * rng.normal(), b12 = scale * rng.normal();
    const double b21 = scale * rng.normal(), b22 = scale * rng.normal();
    return SymMatrix::of_2d(b11 * b11 + b21 * b21, b11 * b12 + b21 * b22,
                            b12 * b12 + b22 * b22);
}

}  // namespace

EllipticityMargins ellipticity_audit(const EllipticOperator& op, const Phase& omega,
                                     int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ValidationError("ellipticity_audit: n_samples must be >= 1");
    Rng rng(seed, 101);
    const auto real = op.realize(omega);
    const int d = op.dim();
    const double lam = op.lambda_min(), Lam = op.lambda_max();
    EllipticityMargins m{std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity()};
    std::vector<double> y(d);
    for (int s = 0; s < n_samples; ++s) {
        for (int i = 0; i < d; ++i) y[std::size_t(i)] = rng.uniform(-50.0, 50.0);
        const SymMatrix M = random_sym(rng, d, 1.0);
        const SymMatrix N = random_psd(rng, d, 1.0);
        const double diff = real.eval(y, M + N) - real.eval(y, M);
        const double tn = N.trace();
        m.lower = std::min(m.lower, diff - lam * tn);
        m.upper = std::min(m.upper, Lam * tn - diff);
        if (op.form() == EllipticOperator::Form::LinearNonDiv) {
            const auto ev = real.coeff(y).eigenvalues();
            const double lo = ev[0], hi = d == 1 ? ev[0] : ev[1];
            if (lo < lam - 1e-9 || hi > Lam + 1e-9)
                throw EllipticityViolation(
                    "coefficient eigenvalues escape the declared band at a sampled point: [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
    }
    if (m.lower < -1e-9 || m.upper < -1e-9)
        throw EllipticityViolation("uniform ellipticity margins negative: lower " +
                                   std::to_string(m.lower) + ", upper " +
                                   std::to_string(m.upper));
    return m;
}

double modulus_audit(const EllipticOperator& op, const Phase& omega, int n_samples,
                     std::uint64_t seed) {
    Rng rng(seed, 202);
    const auto real = op.realize(omega);
    const int d = op.dim();
    const ModulusSpec& rho = op.modulus();
    double worst = 0.0;
    std::vector<double> y(d), z(d);
    // near pairs across separation decades: |y - z| in [1e-3, 1]
    for (int s = 0; s < n_samples; ++s) {
        const double r = std::pow(10.0, rng.uniform(-3.0, 0.0));
        double dir2 = 0.0;
        std::vector<double> dir(d);
        for (int i = 0; i < d; ++i) {
            dir[std::size_t(i)] = rng.normal();
            dir2 += dir[std::size_t(i)] * dir[std::size_t(i)];
        }
        const double dn = std::sqrt(dir2);
        for (int i = 0; i < d; ++i) {
            y[std::size_t(i)] = rng.uniform(-50.0, 50.0);
            z[std::size_t(i)] = y[std::size_t(i)] + r * dir[std::size_t(i)] / dn;
        }
        const SymMatrix M = random_sym(rng, d, 1.0);
        const double num = std::abs(real.eval(y, M) - real.eval(z, M));
        const double den = rho((1.0 + M.norm_spectral()) * std::pow(r, rho.gamma));
        if (den > 0.0) worst = std::max(worst, num / den);
        else if (num > 0.0)
            throw ModulusViolation("modulus vanished on a pair with a nonzero increment");
    }
    if (worst > 1.0 + 1e-6)
        throw ModulusViolation("declared modulus violated: worst ratio " + std::to_string(worst));
    return worst;
}

}  // namespace homog
