#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "homog/errors.hpp"
#include "homog/operators.hpp"
#include "homog/rng.hpp"
#include "homog/solver.hpp"
#include "oracles.hpp"

using namespace homog;

namespace {

ScalarField field_2d(std::function<double(double, double)> f) {
    return [f = std::move(f)](std::span<const double> y) { return f(y[0], y[1]); };
}

SymMatrix rotated_diag(double e1, double e2, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return SymMatrix::of_2d(e1 * c * c + e2 * s * s, (e1 - e2) * c * s,
                            e1 * s * s + e2 * c * c);
}

double reconstruct_entry(const Stencil& st, const std::vector<double>& w, int r, int c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < st.size(); ++k) {
        const auto& v = st.directions()[k];
        acc += w[k] * v[r] * v[c] / st.sq_len(k);
    }
    return acc;
}

}  // namespace

TEST_CASE("stencils enumerate canonical primitive directions") {
    const auto s1 = Stencil::standard(1);
    REQUIRE(s1.size() == 1);
    CHECK(s1.directions()[0][0] == 1);

    const auto s2 = Stencil::standard(2);
    CHECK(s2.size() == 4);  // axes and both diagonals, canonical half
    CHECK(s2.frames().size() >= 1);
    CHECK(s2.sq_len(0) >= 1.0);

    const auto wide = Stencil::lattice(2, 2);
    CHECK(wide.size() == 8);  // adds (1,2),(2,1),(1,-2),(2,-1)
    CHECK(Stencil::lattice(2, 1).size() == s2.size());
}

TEST_CASE("monotone decompositions reproduce the coefficient matrix") {
    const auto st = Stencil::standard(2);
    Rng rng(51, 0);
    for (int trial = 0; trial < 200; ++trial) {
        // a11, a22 >= |a12| guarantees the axes-plus-diagonals cone
        const double a12 = rng.uniform(-1.0, 1.0);
        const double a11 = std::abs(a12) + rng.uniform(0.0, 2.0);
        const double a22 = std::abs(a12) + rng.uniform(0.0, 2.0);
        const auto a = SymMatrix::of_2d(a11, a12, a22);
        const auto dec = decompose(a, st);
        REQUIRE(dec.weights.size() == st.size());
        for (double w : dec.weights) CHECK(w >= -1e-12);
        CHECK(reconstruct_entry(st, dec.weights, 0, 0) == doctest::Approx(a11).epsilon(1e-12));
        CHECK(reconstruct_entry(st, dec.weights, 0, 1) == doctest::Approx(a12).epsilon(1e-12));
        CHECK(reconstruct_entry(st, dec.weights, 1, 1) == doctest::Approx(a22).epsilon(1e-12));
    }

    const auto d1 = decompose(SymMatrix::of_1d(1.7), Stencil::standard(1));
    REQUIRE(d1.weights.size() == 1);
    CHECK(d1.weights[0] == doctest::Approx(1.7));
}

TEST_CASE("anisotropy defeats the narrow stencil but yields to a wider one") {
    const auto strained = rotated_diag(1.0, 8.0, std::numbers::pi / 8.0);
    CHECK_THROWS_AS(decompose(strained, Stencil::standard(2)), NonMonotoneDecomposition);

    const auto wide = Stencil::lattice(2, 3);
    const auto dec = decompose(strained, wide);
    for (double w : dec.weights) CHECK(w >= -1e-12);
    CHECK(reconstruct_entry(wide, dec.weights, 0, 0) ==
          doctest::Approx(strained(0, 0)).epsilon(1e-12));
    CHECK(reconstruct_entry(wide, dec.weights, 0, 1) ==
          doctest::Approx(strained(0, 1)).epsilon(1e-12));
    CHECK(reconstruct_entry(wide, dec.weights, 1, 1) ==
          doctest::Approx(strained(1, 1)).epsilon(1e-12));
}

TEST_CASE("grids validate extents and classify the boundary band") {
    const auto g = Grid::make(Box::interval(0.0, 1.0), 0.1, Stencil::standard(1));
    CHECK(g.n[0] == 11);
    CHECK(g.nodes() == 11);
    CHECK(!g.interior(0, 0));
    CHECK(g.interior(1, 0));
    CHECK(!g.interior(10, 0));
    CHECK(g.x(0, 3) == doctest::Approx(0.3));

    CHECK_THROWS_AS(Grid::make(Box::interval(0.0, 1.0), 0.3, Stencil::standard(1)),
                    ValidationError);

    const auto g2 = Grid::make(Box::centered_cube(2, 1.0), 0.25, Stencil::lattice(2, 2));
    CHECK(g2.n[0] == 9);
    CHECK(g2.margin() == 2);
    CHECK(g2.interior(4, 4));
    CHECK(!g2.interior(1, 4));  // within two nodes of the face
}

TEST_CASE("discrete second differences are exact on quadratics") {
    const auto g = Grid::make(Box::interval(-1.0, 1.0), 0.1, Stencil::standard(1));
    std::vector<double> sq(g.nodes()), lin(g.nodes());
    for (std::int64_t i = 0; i < g.n[0]; ++i) {
        sq[i] = g.x(0, i) * g.x(0, i);
        lin[i] = 3.0 * g.x(0, i) - 1.0;
    }
    for (std::int64_t i = 1; i + 1 < g.n[0]; ++i) {
        CHECK(discrete_hessian(g, sq, i)[0] == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(std::abs(discrete_hessian(g, lin, i)[0]) < 1e-10);
    }

    const auto g2 = Grid::make(Box::centered_cube(2, 1.0), 0.25, Stencil::standard(2));
    std::vector<double> xy(g2.nodes());
    for (std::int64_t j = 0; j < g2.n[1]; ++j)
        for (std::int64_t i = 0; i < g2.n[0]; ++i)
            xy[g2.index(i, j)] = g2.x(0, i) * g2.x(1, j);
    const auto hs = discrete_hessian(g2, xy, 4, 4);
    REQUIRE(hs.size() == g2.stencil.size());
    // directional curvatures of u = xy equal v.Hv/|v|^2 with H = [[0,1],[1,0]]
    for (std::size_t k = 0; k < hs.size(); ++k) {
        const auto& v = g2.stencil.directions()[k];
        const double want = 2.0 * v[0] * v[1] / g2.stencil.sq_len(k);
        CHECK(hs[k] == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("scheme residuals evaluate the operator on discrete curvature") {
    const auto op = EllipticOperator::linear_constant(SymMatrix::identity(2), 1.0, 1.0);
    Phase w;
    const auto g = Grid::make(Box::centered_cube(2, 1.0), 0.25, Stencil::standard(2));
    std::vector<double> u(g.nodes());
    for (std::int64_t j = 0; j < g.n[1]; ++j)
        for (std::int64_t i = 0; i < g.n[0]; ++i)
            u[g.index(i, j)] = g.x(0, i) * g.x(0, i) - g.x(1, j) * g.x(1, j);
    const auto res = apply_scheme(op, w, 1.0, g, u);  // trace vanishes for harmonic u
    for (std::int64_t j = 0; j < g.n[1]; ++j)
        for (std::int64_t i = 0; i < g.n[0]; ++i) {
            if (g.interior(i, j)) CHECK(std::abs(res[g.index(i, j)]) < 1e-10);
            else CHECK(res[g.index(i, j)] == 0.0);
        }

    const auto extremal = EllipticOperator::pucci_plus(2, 1.0, 2.0);
    const auto res2 = apply_scheme(extremal, w, 1.0, g, u);  // eigenvalues (2, -2)
    for (std::int64_t j = 0; j < g.n[1]; ++j)
        for (std::int64_t i = 0; i < g.n[0]; ++i)
            if (g.interior(i, j)) CHECK(res2[g.index(i, j)] == doctest::Approx(2.0));
}

TEST_CASE("affine functions are discrete solutions even with oscillating coefficients") {
    const auto op = oracles::harmonic_operator(oracles::harmonic_ensemble());
    const Phase w = oracles::zero_phase();
    const auto g = Grid::make(Box::interval(0.0, 1.0), 0.01, Stencil::standard(1));
    std::vector<double> u(g.nodes());
    for (std::int64_t i = 0; i < g.n[0]; ++i) u[i] = 2.0 * g.x(0, i) - 0.7;
    const auto res = apply_scheme(op, w, 0.1, g, u);
    for (double r : res) CHECK(std::abs(r) < 1e-9);
}

TEST_CASE("the direct path reproduces exact solutions to machine precision") {
    const Phase w = oracles::zero_phase();

    SUBCASE("affine data, oscillating one-dimensional coefficient") {
        const auto op = oracles::harmonic_operator(oracles::harmonic_ensemble());
        const auto sol = solve_dirichlet(op, w, 0.1, Box::interval(0.0, 1.0),
                                         field_1d([](double x) { return x; }), 0.01, 1e-10);
        CHECK(sol.converged);
        CHECK(sol.iterations == 1);
        CHECK(sup_distance(sol, field_1d([](double x) { return x; })) < 1e-10);
    }

    SUBCASE("harmonic quadratic in two dimensions") {
        const auto op = EllipticOperator::linear_constant(SymMatrix::identity(2), 1.0, 1.0);
        Phase empty;
        const auto g = field_2d([](double x, double y) { return x * x - y * y; });
        const auto sol = solve_dirichlet(op, empty, 1.0, Box::centered_cube(2, 1.0), g, 0.05,
                                         1e-10);
        CHECK(sol.converged);
        CHECK(sup_distance(sol, g) < 1e-8);
    }
}

TEST_CASE("policy iteration matches an integral oracle for a forced branch problem") {
    // single forced branch: a(x/eps) u'' = 1 on (0,1), u(0) = u(1) = 0, with
    // a = 2 + sin; closed form u(x) = c x + int_0^x (x-s)/a(s/eps) ds
    auto ens = oracles::harmonic_ensemble();
    const auto op = EllipticOperator::bellman_min(ens, {{"a", "", 1.0}}, 1.0, 3.0);
    const Phase w = oracles::zero_phase();
    const double eps = 0.1, h = 1e-3;

    const auto sol =
        solve_dirichlet(op, w, eps, Box::interval(0.0, 1.0),
                        field_1d([](double) { return 0.0; }), h, 1e-8);
    CHECK(sol.converged);
    CHECK(sol.iterations <= 10);

    // prefix trapezoid quadrature on a 400x refinement of the solver grid
    const int refine = 400;
    const std::int64_t cells = 1000 * refine;
    const double step = h / refine;
    std::vector<double> I0(cells + 1, 0.0), I1(cells + 1, 0.0);
    auto inv_a = [eps](double s) { return 1.0 / (2.0 + std::sin(s / eps)); };
    for (std::int64_t i = 1; i <= cells; ++i) {
        const double s0 = (i - 1) * step, s1 = i * step;
        I0[i] = I0[i - 1] + 0.5 * (inv_a(s0) + inv_a(s1)) * step;
        I1[i] = I1[i - 1] + 0.5 * (s0 * inv_a(s0) + s1 * inv_a(s1)) * step;
    }
    const double slope = -(I0[cells] - I1[cells]);  // u(1) = 0
    double worst = 0.0;
    for (std::int64_t i = 0; i < sol.grid.n[0]; ++i) {
        const double x = sol.grid.x(0, i);
        const std::int64_t fi = i * refine;
        const double exact = slope * x + x * I0[fi] - I1[fi];
        worst = std::max(worst, std::abs(sol.at(i) - exact));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("an extra branch can only lower the operator and its solution") {
    // F_two = min(F_one, extra) <= F_one pointwise, so the one-branch solution
    // is a supersolution for F_two and dominates the two-branch solution
    auto ens = oracles::harmonic_ensemble();
    const Phase w = oracles::zero_phase();
    const auto one = EllipticOperator::bellman_min(ens, {{"a", "", 1.0}}, 1.0, 3.0);
    auto ens2 = oracles::harmonic_ensemble();
    ens2->add_channel("flat", TrigPolynomial(1, 1.2));
    const auto two = EllipticOperator::bellman_min(
        ens2, {{"a", "", 1.0}, {"flat", "", 0.8}}, 1.0, 3.0);
    const auto g0 = field_1d([](double) { return 0.0; });
    const auto ua = solve_dirichlet(one, w, 0.1, Box::interval(0.0, 1.0), g0, 0.002, 1e-9);
    const auto ub = solve_dirichlet(two, w, 0.1, Box::interval(0.0, 1.0), g0, 0.002, 1e-9);
    REQUIRE(ua.grid.same_layout(ub.grid));
    bool strict = false;
    for (std::size_t i = 0; i < ua.values.size(); ++i) {
        CHECK(ub.values[i] <= ua.values[i] + 1e-9);
        if (ub.values[i] < ua.values[i] - 1e-6) strict = true;
    }
    CHECK(strict);  // the extra branch actually binds somewhere
}

TEST_CASE("discrete comparison principle for the extremal operator") {
    const auto op = EllipticOperator::pucci_plus(2, 1.0, 2.0);
    Phase w;
    Rng rng(53, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
        const double q = rng.uniform(-0.5, 0.5);
        const auto g1 = field_2d([=](double x, double y) { return a * x + b * y + q * x * y; });
        const auto g2 = field_2d([=](double x, double y) {
            return a * x + b * y + q * x * y + 0.4 * (1.1 + std::sin(3.0 * x) * std::sin(2.0 * y));
        });
        const auto u1 = solve_dirichlet(op, w, 1.0, Box::centered_cube(2, 1.0), g1, 0.1, 1e-10);
        const auto u2 = solve_dirichlet(op, w, 1.0, Box::centered_cube(2, 1.0), g2, 0.1, 1e-10);
        REQUIRE(u1.converged);
        REQUIRE(u2.converged);
        for (std::size_t i = 0; i < u1.values.size(); ++i)
            CHECK(u2.values[i] >= u1.values[i] - 1e-8);
    }
}

TEST_CASE("damped pseudo-time stepping agrees with the direct path") {
    const auto op = oracles::harmonic_operator(oracles::harmonic_ensemble());
    const Phase w = oracles::zero_phase();
    const auto g = field_1d([](double x) { return x * x; });
    const auto direct = solve_dirichlet(op, w, 0.25, Box::interval(0.0, 1.0), g, 0.02, 1e-12,
                                        200000, SchemeMode::Direct);
    const auto stepped = solve_dirichlet(op, w, 0.25, Box::interval(0.0, 1.0), g, 0.02, 1e-12,
                                         400000, SchemeMode::Iterative);
    CHECK(direct.converged);
    CHECK(stepped.converged);
    CHECK(stepped.iterations > 1);
    CHECK(sup_distance(direct, stepped) < 1e-6);
}

TEST_CASE("iteration exhaustion is reported without throwing") {
    const auto op = oracles::harmonic_operator(oracles::harmonic_ensemble());
    const Phase w = oracles::zero_phase();
    const auto sol = solve_dirichlet(op, w, 0.25, Box::interval(0.0, 1.0),
                                     field_1d([](double x) { return x * x; }), 0.02, 1e-14, 50,
                                     SchemeMode::Iterative);
    CHECK(!sol.converged);
    CHECK(sol.iterations == 50);
}

TEST_CASE("sup distance demands identical grid layouts") {
    const auto op = oracles::harmonic_operator(oracles::harmonic_ensemble());
    const Phase w = oracles::zero_phase();
    const auto g = field_1d([](double x) { return x; });
    const auto a = solve_dirichlet(op, w, 0.1, Box::interval(0.0, 1.0), g, 0.01, 1e-10);
    const auto b = solve_dirichlet(op, w, 0.1, Box::interval(0.0, 1.0), g, 0.02, 1e-10);
    CHECK_THROWS_AS(sup_distance(a, b), GridMismatch);
    CHECK(sup_distance(a, a) == 0.0);
}

TEST_CASE("unresolvable anisotropy surfaces as a decomposition failure") {
    const auto a = rotated_diag(1.0, 8.0, std::numbers::pi / 8.0);
    const auto op = EllipticOperator::linear_constant(a, 1.0, 8.0);
    Phase w;
    CHECK_THROWS_AS(solve_dirichlet(op, w, 1.0, Box::centered_cube(2, 1.0),
                                    field_2d([](double, double) { return 0.0; }), 0.1, 1e-8),
                    NonMonotoneDecomposition);
}

TEST_CASE("wide-stencil consistency error decays with first order in the coupling") {
    // rotated indefinite curvature probed with progressively wider stencils on
    // progressively finer grids; regression values pin the per-width plateaus
    const auto M = rotated_diag(2.0, -1.0, std::numbers::pi / 8.0);
    const auto op = EllipticOperator::pucci_plus(2, 1.0, 2.0);
    const double exact = pucci(PucciKind::Plus, 1.0, 2.0, M);  // = 3 for eigenvalues (2, -1)
    CHECK(exact == doctest::Approx(3.0));
    Phase w;

    std::vector<double> hs, errs;
    for (int k = 0; k <= 4; ++k) {
        const double h = std::pow(2.0, -k);
        const auto grid = Grid::make(Box::centered_cube(2, 4.0), h, Stencil::lattice(2, k + 1));
        std::vector<double> u(grid.nodes());
        for (std::int64_t j = 0; j < grid.n[1]; ++j)
            for (std::int64_t i = 0; i < grid.n[0]; ++i) {
                const double x = grid.x(0, i), y = grid.x(1, j);
                u[grid.index(i, j)] =
                    0.5 * (M(0, 0) * x * x + 2.0 * M(0, 1) * x * y + M(1, 1) * y * y);
            }
        const auto res = apply_scheme(op, w, 1.0, grid, u);
        double worst = 0.0;
        for (std::int64_t j = 0; j < grid.n[1]; ++j)
            for (std::int64_t i = 0; i < grid.n[0]; ++i)
                if (grid.interior(i, j))
                    worst = std::max(worst, std::abs(res[grid.index(i, j)] - exact));
        hs.push_back(h);
        errs.push_back(worst);
    }

    const double plateau[5] = {4.3933982822017864e-1, 1.5075567228888181e-2,
                               1.5075567228888181e-2, 1.5075567228888181e-2,
                               4.4596395201401050e-4};
    for (int k = 0; k <= 4; ++k)
        CHECK(errs[k] == doctest::Approx(plateau[k]).epsilon(1e-6));

    // least-squares slope of log(err) against log(h)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const double lx = std::log(hs[i]), ly = std::log(errs[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double n = double(hs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope >= 0.9);
}
