#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "homog/errors.hpp"
#include "homog/operators.hpp"
#include "homog/rng.hpp"
#include "oracles.hpp"

using namespace homog;

namespace {

SymMatrix random_sym(Rng& rng, int dim, double scale) {
    if (dim == 1) return SymMatrix::of_1d(rng.uniform(-scale, scale));
    return SymMatrix::of_2d(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                            rng.uniform(-scale, scale));
}

SymMatrix random_psd(Rng& rng, int dim, double scale) {
    if (dim == 1) return SymMatrix::of_1d(rng.uniform(0.0, scale));
    const double u = rng.uniform(0.0, scale), w = rng.uniform(0.0, scale);
    const double s = rng.uniform(-1.0, 1.0);
    return SymMatrix::of_2d(u * u, u * w * s, w * w);
}

// constant-in-phase scalar channel
std::shared_ptr<QuasiPeriodicEnsemble> constant_channels() {
    auto ens = std::make_shared<QuasiPeriodicEnsemble>(1, 1, std::vector<double>{1.0});
    ens->add_channel("lo", TrigPolynomial(1, 1.0));
    ens->add_channel("hi", TrigPolynomial(1, 2.0));
    ens->add_channel("force", TrigPolynomial(1, 1.5));
    return ens;
}

double eval1(const EllipticOperator& op, const Phase& w, double y, const SymMatrix& M) {
    return op.eval(w, std::span<const double>(&y, 1), M);
}

}  // namespace

TEST_CASE("extremal operators take their closed-form values") {
    CHECK(pucci(PucciKind::Plus, 1.0, 3.0, SymMatrix::of_1d(0.0)) == 0.0);
    CHECK(pucci(PucciKind::Minus, 1.0, 3.0, SymMatrix::of_2d(0.0, 0.0, 0.0)) == 0.0);

    CHECK(pucci(PucciKind::Plus, 1.0, 3.0, SymMatrix::of_1d(-3.0)) == doctest::Approx(-3.0));
    CHECK(pucci(PucciKind::Plus, 1.0, 3.0, SymMatrix::of_1d(5.0)) == doctest::Approx(15.0));
    CHECK(pucci(PucciKind::Minus, 1.0, 3.0, SymMatrix::of_1d(-3.0)) == doctest::Approx(-9.0));
    CHECK(pucci(PucciKind::Minus, 1.0, 3.0, SymMatrix::of_1d(5.0)) == doctest::Approx(5.0));

    const auto split = SymMatrix::of_2d(1.0, 0.0, -1.0);
    CHECK(pucci(PucciKind::Plus, 1.0, 2.0, split) == doctest::Approx(1.0));
    CHECK(pucci(PucciKind::Minus, 1.0, 2.0, split) == doctest::Approx(-1.0));

    const auto offdiag = SymMatrix::of_2d(0.0, 1.0, 0.0);  // eigenvalues +/- 1
    CHECK(pucci(PucciKind::Plus, 1.0, 2.0, offdiag) == doctest::Approx(1.0));
    CHECK(pucci(PucciKind::Minus, 1.0, 2.0, offdiag) == doctest::Approx(-1.0));

    CHECK(pucci(PucciKind::Plus, 1.0, 2.0, SymMatrix::identity(2)) == doctest::Approx(4.0));
    CHECK(pucci(PucciKind::Minus, 1.0, 2.0, SymMatrix::identity(2)) == doctest::Approx(2.0));
}

TEST_CASE("extremal operators are positively homogeneous") {
    Rng rng(21, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto M = random_sym(rng, 2, 3.0);
        for (double t : {2.0, 10.0}) {
            for (auto kind : {PucciKind::Plus, PucciKind::Minus}) {
                const double lhs = pucci(kind, 1.0, 2.5, M * t);
                const double rhs = t * pucci(kind, 1.0, 2.5, M);
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("extremal increments respect the ellipticity envelope") {
    Rng rng(22, 0);
    const double lam = 1.0, Lam = 2.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const auto M = random_sym(rng, 2, 3.0);
        const auto N = random_psd(rng, 2, 1.5);
        for (auto kind : {PucciKind::Plus, PucciKind::Minus}) {
            const double diff = pucci(kind, lam, Lam, M + N) - pucci(kind, lam, Lam, M);
            CHECK(diff >= lam * N.trace() - 1e-10);
            CHECK(diff <= Lam * N.trace() + 1e-10);
        }
    }
}

TEST_CASE("symmetric matrices report spectra and norms") {
    const auto m = SymMatrix::of_2d(2.0, 1.0, 2.0);  // eigenvalues 1 and 3
    const auto ev = m.eigenvalues();
    CHECK(ev[0] == doctest::Approx(1.0));
    CHECK(ev[1] == doctest::Approx(3.0));
    CHECK(m.norm_spectral() == doctest::Approx(3.0));
    CHECK(m.trace() == doctest::Approx(4.0));
    CHECK(SymMatrix::of_1d(-4.0).norm_spectral() == doctest::Approx(4.0));
    CHECK(SymMatrix::identity(2)(0, 1) == 0.0);
}

TEST_CASE("the frozen linear form is the trace against its coefficient") {
    const auto op = EllipticOperator::linear_constant(SymMatrix::identity(2), 1.0, 1.0);
    Phase w;  // no torus angles needed
    Rng rng(23, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto M = random_sym(rng, 2, 2.0);
        const std::vector<double> y = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        CHECK(op.eval(w, y, M) == doctest::Approx(M.trace()).epsilon(1e-13));
    }
}

TEST_CASE("a scalar coefficient channel drives the linear form") {
    const auto op = oracles::harmonic_operator(oracles::harmonic_ensemble());
    Phase w;
    w.angles = {std::acos(-1.0) / 2.0};  // a(y) = 2 + cos y
    CHECK(eval1(op, w, 0.0, SymMatrix::of_1d(1.0)) == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(eval1(op, w, std::acos(-1.0), SymMatrix::of_1d(1.0)) ==
          doctest::Approx(1.0).epsilon(1e-13));
    CHECK(eval1(op, w, 0.4, SymMatrix::of_1d(-2.0)) ==
          doctest::Approx(-2.0 * (2.0 + std::cos(0.4))).epsilon(1e-13));

    const auto realized = op.realize(w);
    CHECK(realized.coeff(std::span<const double>(std::array{0.4}.data(), 1))(0, 0) ==
          doctest::Approx(2.0 + std::cos(0.4)));
}

TEST_CASE("the branch minimum picks the cheaper linear branch") {
    auto ens = constant_channels();
    const auto op = EllipticOperator::bellman_min(
        ens, {{"lo", "", 0.0}, {"hi", "", 0.0}}, 1.0, 2.0);
    Phase w;
    w.angles = {0.0};
    CHECK(eval1(op, w, 0.0, SymMatrix::of_1d(-1.0)) == doctest::Approx(-2.0));
    CHECK(eval1(op, w, 0.0, SymMatrix::of_1d(1.0)) == doctest::Approx(1.0));

    const auto forced = EllipticOperator::bellman_min(
        ens, {{"lo", "force", 0.0}, {"hi", "", 0.0}}, 1.0, 2.0);
    CHECK(eval1(forced, w, 0.0, SymMatrix::of_1d(1.0)) == doctest::Approx(-0.5));

    const auto realized = forced.realize(w);
    REQUIRE(realized.n_branches() == 2);
    const double y0 = 0.7;
    const std::span<const double> ys(&y0, 1);
    CHECK(realized.branch_coeff(0, ys)(0, 0) == doctest::Approx(1.0));
    CHECK(realized.branch_coeff(1, ys)(0, 0) == doctest::Approx(2.0));
    CHECK(realized.branch_forcing(0, ys) == doctest::Approx(1.5));
    CHECK(realized.branch_forcing(1, ys) == doctest::Approx(0.0));
}

TEST_CASE("branch minima stay inside the ellipticity envelope") {
    auto ens = std::make_shared<QuasiPeriodicEnsemble>(1, 1, std::vector<double>{1.0});
    TrigPolynomial pa(1, 1.5);
    pa.add_term(1.0, 0.0, 0.5);  // 1.5 + 0.5 sin in [1, 2]
    TrigPolynomial pb(1, 1.5);
    pb.add_term(1.0, 0.5, 0.0);  // 1.5 + 0.5 cos in [1, 2]
    ens->add_channel("a", pa);
    ens->add_channel("b", pb);
    const auto op =
        EllipticOperator::bellman_min(ens, {{"a", "", 0.0}, {"b", "", 0.0}}, 1.0, 2.0);
    const Phase w = ens->sample_phase(5);
    Rng rng(24, 0);
    for (int trial = 0; trial < 500; ++trial) {
        const auto M = random_sym(rng, 1, 3.0);
        const auto N = random_psd(rng, 1, 1.5);
        const double y = rng.uniform(-10.0, 10.0);
        const double diff = eval1(op, w, y, M + N) - eval1(op, w, y, M);
        CHECK(diff >= 1.0 * N.trace() - 1e-10);
        CHECK(diff <= 2.0 * N.trace() + 1e-10);
    }
}

TEST_CASE("operator evaluation is stationary along the flow") {
    const auto ens = oracles::harmonic_ensemble();
    const auto op = oracles::harmonic_operator(ens);
    Rng rng(25, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Phase w = ens->sample_phase(std::uint64_t(trial));
        const double y = rng.uniform(-10.0, 10.0), z = rng.uniform(-10.0, 10.0);
        const auto M = random_sym(rng, 1, 2.0);
        const double moved = eval1(op, ens->shift(w, z), y, M);
        const double direct = eval1(op, w, y + z, M);
        CHECK(moved == doctest::Approx(direct).epsilon(1e-11));
    }
}

TEST_CASE("realized views agree with the unfrozen operator") {
    const auto ens = oracles::harmonic_ensemble();
    const auto linear = oracles::harmonic_operator(ens);
    const auto extremal = EllipticOperator::pucci_plus(2, 1.0, 2.0);
    Rng rng(26, 0);
    const Phase w = ens->sample_phase(9);
    const auto r_lin = linear.realize(w);
    Phase empty;
    const auto r_puc = extremal.realize(empty);
    for (int trial = 0; trial < 10; ++trial) {
        const double y = rng.uniform(-5.0, 5.0);
        const auto M1 = random_sym(rng, 1, 2.0);
        CHECK(r_lin.eval(std::span<const double>(&y, 1), M1) ==
              doctest::Approx(eval1(linear, w, y, M1)).epsilon(1e-13));
        const std::vector<double> y2 = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
        const auto M2 = random_sym(rng, 2, 2.0);
        CHECK(r_puc.eval(y2, M2) == doctest::Approx(extremal.eval(empty, y2, M2)).epsilon(1e-13));
    }
}

TEST_CASE("the ellipticity audit certifies honest declarations") {
    const auto extremal = EllipticOperator::pucci_plus(2, 1.0, 2.0);
    Phase empty;
    const auto m1 = ellipticity_audit(extremal, empty, 10000, 31);
    CHECK(m1.lower >= -1e-9);
    CHECK(m1.upper >= -1e-9);

    auto ens = std::make_shared<QuasiPeriodicEnsemble>(1, 1, std::vector<double>{1.0});
    TrigPolynomial prof(1, 1.5);
    prof.add_term(1.0, 0.0, 0.5);  // 1.5 + 0.5 sin in [1, 2]
    ens->add_channel("a", prof);
    const auto lin = EllipticOperator::linear_scalar(ens, "a", 1.0, 2.0);
    const auto m2 = ellipticity_audit(lin, ens->sample_phase(2), 10000, 32);
    CHECK(m2.lower >= -1e-9);
    CHECK(m2.upper >= -1e-9);
}

TEST_CASE("the ellipticity audit rejects inflated declarations") {
    const auto ens = oracles::harmonic_ensemble();  // a in [1, 3]
    const auto op = EllipticOperator::linear_scalar(ens, "a", 2.9, 3.0);
    CHECK_THROWS_AS(ellipticity_audit(op, ens->sample_phase(1), 10000, 33),
                    EllipticityViolation);
}

TEST_CASE("the modulus audit measures spatial oscillation") {
    const auto extremal = EllipticOperator::pucci_plus(2, 1.0, 2.0);
    Phase empty;
    CHECK(modulus_audit(extremal, empty, 2000, 41) == doctest::Approx(0.0));

    const auto ens = oracles::harmonic_ensemble();
    const auto ok = EllipticOperator::linear_scalar(ens, "a", 1.0, 3.0);  // 1-Lipschitz profile
    const double ratio = modulus_audit(ok, ens->sample_phase(4), 2000, 42);
    CHECK(ratio > 0.3);
    CHECK(ratio <= 1.0 + 1e-6);

    ModulusSpec tight;
    tight.scale = 0.5;  // claims half the true Lipschitz constant
    const auto bad = EllipticOperator::linear_scalar(ens, "a", 1.0, 3.0, tight);
    CHECK_THROWS_AS(modulus_audit(bad, ens->sample_phase(4), 2000, 43), ModulusViolation);
}
