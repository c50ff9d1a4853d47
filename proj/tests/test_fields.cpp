#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "homog/ap_core.hpp"
#include "homog/errors.hpp"
#include "homog/fields.hpp"
#include "homog/rng.hpp"
#include "oracles.hpp"

using namespace homog;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double mod_two_pi(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
}

// torus profile cos(t1) cos(t2) built through the product expansion
TrigPolynomial cos_cos_profile() {
    TrigPolynomial c1(2, 0.0), c2(2, 0.0);
    c1.add_term(std::vector<double>{1.0, 0.0}, 1.0, 0.0);
    c2.add_term(std::vector<double>{0.0, 1.0}, 1.0, 0.0);
    return TrigPolynomial::multiply(c1, c2);
}

QuasiPeriodicEnsemble two_torus_line() {
    QuasiPeriodicEnsemble ens(2, 1, {1.0, oracles::kSqrt2});
    ens.add_channel("f", cos_cos_profile());
    return ens;
}

}  // namespace

TEST_CASE("phase sampling is deterministic in the seed and lands on the torus") {
    auto ens = oracles::harmonic_ensemble();
    const Phase a = ens->sample_phase(42);
    const Phase b = ens->sample_phase(42);
    const Phase c = ens->sample_phase(43);
    REQUIRE(a.angles.size() == 1);
    CHECK(a.angles[0] == b.angles[0]);
    CHECK(a.angles[0] != c.angles[0]);
    for (std::uint64_t s = 0; s < 200; ++s) {
        const Phase w = ens->sample_phase(s);
        CHECK(w.angles[0] >= 0.0);
        CHECK(w.angles[0] < kTwoPi);
    }
}

TEST_CASE("sampled phases fill the torus uniformly") {
    auto ens = oracles::harmonic_ensemble();
    const int bins = 16, n = 10000;
    std::vector<int> count(bins, 0);
    for (int s = 0; s < n; ++s) {
        const double u = ens->sample_phase(std::uint64_t(s)).angles[0] / kTwoPi;
        ++count[std::min(bins - 1, int(u * bins))];
    }
    const double expect = double(n) / bins;
    double chi2 = 0.0;
    for (int c : count) chi2 += (c - expect) * (c - expect) / expect;
    CHECK(chi2 < 30.578);  // 1% critical value, 15 degrees of freedom
}

TEST_CASE("phase shift is a group action along the flow") {
    auto ens = two_torus_line();
    Rng rng(7, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const Phase w = ens.sample_phase(std::uint64_t(trial));
        const double y = rng.uniform(-5.0, 5.0), z = rng.uniform(-5.0, 5.0);
        const Phase once = ens.shift(ens.shift(w, y), z);
        const Phase direct = ens.shift(w, y + z);
        REQUIRE(once.angles.size() == 2);
        for (int i = 0; i < 2; ++i) {
            CHECK(mod_two_pi(once.angles[i]) ==
                  doctest::Approx(mod_two_pi(direct.angles[i])).epsilon(1e-9));
        }
        const Phase same = ens.shift(w, 0.0);
        for (int i = 0; i < 2; ++i) CHECK(same.angles[i] == doctest::Approx(w.angles[i]));
    }
}

TEST_CASE("realizations evaluate the rotated profile") {
    auto ens = oracles::harmonic_ensemble();
    Phase w;
    w.angles = {0.9};
    const Realization r = ens->realization(w, "a");
    for (double y : {0.0, 0.3, -4.4, 11.0}) {
        CHECK(r(y) == doctest::Approx(2.0 + std::sin(y + 0.9)).epsilon(1e-13));
    }
    const ScalarField f = r.as_field();
    const double y0 = 1.7;
    CHECK(f(std::span<const double>(&y0, 1)) == doctest::Approx(r(y0)));
}

TEST_CASE("realizations are stationary along the flow") {
    auto ens = two_torus_line();
    Rng rng(11, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Phase w = ens.sample_phase(std::uint64_t(trial));
        const double y = rng.uniform(-10.0, 10.0), z = rng.uniform(-10.0, 10.0);
        const double direct = ens.realization(w, "f")(y + z);
        const double shifted = ens.realization(ens.shift(w, z), "f")(y);
        CHECK(direct == doctest::Approx(shifted).epsilon(1e-11));
    }
}

TEST_CASE("a realization carries its channel's decaying perturbation") {
    auto ens = oracles::harmonic_ensemble();
    NullFunction::Bump b;
    b.amplitude = 1.0;
    b.center = {0.0};
    b.sigma = 1.0;
    ens->add_null_profile("a", NullFunction::gaussian_bumps(1, {b}));
    const Phase w = ens->sample_phase(3);
    const Realization r = ens->realization(w, "a");
    for (double y : {0.0, 1.0, -2.5}) {
        const double want = 2.0 + std::sin(y + w.angles[0]) + std::exp(-0.5 * y * y);
        CHECK(r(y) == doctest::Approx(want).epsilon(1e-13));
    }
    // declared-base extraction sees through the perturbation
    const auto ap = extract_ap_component(r.as_field(), 1, {{1.0}});
    CHECK(oracles::sup_gap_1d([&](double y) { return ap(y); },
                              [&](double y) { return r.trig()(y); }, -20.0, 20.0, 2001) < 5e-3);
}

TEST_CASE("ensemble means are exact torus-grid quadratures") {
    auto ens = oracles::harmonic_ensemble();
    CHECK(ens->ensemble_mean("a") == doctest::Approx(2.0).epsilon(1e-13));
    auto ens2 = two_torus_line();
    CHECK(std::abs(ens2.ensemble_mean("f")) < 1e-13);
}

TEST_CASE("the uniform torus measure is invariant under the flow") {
    auto ens = two_torus_line();
    const auto& prof = ens.profile("f");
    for (double y : {0.7, -3.3}) {
        const int n = 32;
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Phase w;
                w.angles = {kTwoPi * (i + 0.5) / n, kTwoPi * (j + 0.5) / n};
                const Phase moved = ens.shift(w, y);
                acc += prof(std::span<const double>(moved.angles.data(), 2));
            }
        acc /= double(n) * n;
        CHECK(std::abs(acc - ens.ensemble_mean("f")) < 1e-12);
    }
}

TEST_CASE("orbit averages of an ergodic flow match the ensemble mean") {
    auto ens = oracles::harmonic_ensemble();
    const std::vector<double> radii = {250.0, 500.0, 1000.0};
    const auto rep = birkhoff_compare(*ens, "a", 5, radii, 200000, 7, 1e-2);
    CHECK(rep.ensemble_mean == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(rep.spatial_means.size() == 5);
    CHECK(rep.max_gap < 1e-2);
    for (double m : rep.spatial_means) CHECK(std::abs(m - 2.0) < 1e-2);
}

TEST_CASE("orbit averages converge for a two-frequency line flow") {
    auto ens = two_torus_line();
    const std::vector<double> radii = {250.0, 500.0, 1000.0};
    const auto rep = birkhoff_compare(ens, "f", 5, radii, 200000, 19, 1e-2);
    CHECK(std::abs(rep.ensemble_mean) < 1e-12);
    CHECK(rep.max_gap < 1e-2);
}

TEST_CASE("orbit averages tighten as the window grows") {
    auto ens = oracles::harmonic_ensemble();
    const std::vector<double> small = {25.0, 50.0, 100.0};
    const std::vector<double> large = {250.0, 500.0, 1000.0};
    const auto coarse = birkhoff_compare(*ens, "a", 5, small, 200000, 7, 1.0);
    const auto fine = birkhoff_compare(*ens, "a", 5, large, 200000, 7, 1.0);
    CHECK(fine.max_gap < coarse.max_gap);
}

TEST_CASE("a resonant flow fails the ergodicity certificate at construction") {
    CHECK_THROWS_AS(QuasiPeriodicEnsemble(2, 1, {1.0, 1.0}), ErgodicityViolation);
}

TEST_CASE("resonant channel frequencies are rejected even beyond the scan cap") {
    // certificate scan caps |m|_inf at 8; the channel check must still catch
    // the resonance of (9, -1) against rows (1, 9)
    QuasiPeriodicEnsemble ens(2, 1, {1.0, 9.0});
    TrigPolynomial prof(2, 0.0);
    prof.add_term(std::vector<double>{9.0, -1.0}, 1.0, 0.0);
    CHECK_THROWS_AS(ens.add_channel("bad", prof), ErgodicityViolation);
}

TEST_CASE("orbit averages of a resonant flow stay biased") {
    QuasiPeriodicEnsemble ens(2, 1, {1.0, 1.0}, 0);  // certificate disabled
    TrigPolynomial prof(2, 0.0);
    prof.add_term(std::vector<double>{1.0, -1.0}, 1.0, 0.0);  // cos(t1 - t2): flow-invariant
    ens.add_channel("stuck", prof);
    const std::vector<double> radii = {250.0, 500.0, 1000.0};
    CHECK_THROWS_AS(birkhoff_compare(ens, "stuck", 5, radii, 50000, 7, 1e-2),
                    ErgodicityViolation);
}

TEST_CASE("mean-square averaging residual has its closed form for one cosine") {
    QuasiPeriodicEnsemble ens(1, 1, {1.0});
    TrigPolynomial prof(1, 0.0);
    prof.add_term(1.0, 1.0, 0.0);
    ens.add_channel("c", prof);
    for (double t : {1.0, 3.0, 10.0}) {
        const std::vector<double> sched = {t};
        const double want = 0.5 * std::pow(std::sin(t) / t, 2);
        CHECK(ergodicity_residual(ens, prof, sched) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("mean-square averaging residual vanishes for constants") {
    auto ens = oracles::harmonic_ensemble();
    TrigPolynomial prof(1, 3.25);
    const std::vector<double> sched = {5.0, 10.0};
    CHECK(ergodicity_residual(*ens, prof, sched) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("mean-square averaging residual stays bounded away from zero on resonance") {
    QuasiPeriodicEnsemble ens(2, 1, {1.0, 1.0}, 0);
    const auto prof = [] {
        TrigPolynomial p(2, 0.0);
        p.add_term(std::vector<double>{1.0, -1.0}, 1.0, 0.0);
        return p;
    }();
    ens.add_channel("stuck", prof);
    for (double t : {10.0, 100.0, 1000.0}) {
        const std::vector<double> sched = {t};
        CHECK(ergodicity_residual(ens, prof, sched) == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("channel bookkeeping validates inputs") {
    auto ens = oracles::harmonic_ensemble();
    CHECK(ens->has_channel("a"));
    CHECK(!ens->has_channel("b"));
    CHECK_THROWS_AS(ens->profile("missing"), ValidationError);

    TrigPolynomial bad_dim(2, 0.0);
    CHECK_THROWS_AS(ens->add_channel("x", bad_dim), ValidationError);

    TrigPolynomial frac(1, 0.0);
    frac.add_term(1.5, 1.0, 0.0);  // not 2pi-periodic on the torus
    CHECK_THROWS_AS(ens->add_channel("x", frac), ValidationError);

    CHECK_THROWS_AS(ens->add_null_profile("a", NullFunction::zero(2)), ValidationError);
}

TEST_CASE("draws from the generator are reproducible and standardized") {
    Rng a(5, 1), b(5, 1), c(5, 2);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() != c.next_u64());
    Rng r(123, 0);
    double mean = 0.0, var = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        mean += x;
        var += x * x;
    }
    mean /= n;
    var = var / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform(2.0, 3.0);
        CHECK(u >= 2.0);
        CHECK(u < 3.0);
    }
}
