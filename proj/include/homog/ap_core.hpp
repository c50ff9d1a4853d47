#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "homog/nullfn.hpp"
#include "homog/trig.hpp"

namespace homog {

// Black-box evaluatable function on R^d.
using ScalarField = std::function<double(std::span<const double>)>;

// Adapt a 1-D callable to the span interface.
ScalarField field_1d(std::function<double(double)> f);

// Sum of a trigonometric polynomial and a certified decaying part; models the
// decomposition f = f_ap + f_null with a mean value equal to f_ap's constant.
class WStarAPFunction {
  public:
    WStarAPFunction(TrigPolynomial ap, NullFunction null);

    double operator()(std::span<const double> y) const;
    double operator()(double y) const;

    const TrigPolynomial& ap_part() const { return ap_; }
    const NullFunction& null_part() const { return null_; }
    int dim() const { return ap_.dim(); }

  private:
    TrigPolynomial ap_;
    NullFunction null_;
};

struct MeanValueEstimate {
    double value = 0.0;               // average at the largest radius
    std::vector<double> radii_used;   // strictly increasing
    double tail_spread = 0.0;         // max pairwise gap among the last 3 averages
};

struct BesicovitchEstimate {
    double value = 0.0;
    std::vector<double> lengths_used;
    double tail_spread = 0.0;
};

// Mean value of a trigonometric polynomial: the zero-frequency coefficient.
double mean_value_exact(const TrigPolynomial& f);

// Ball averages over B(0;R) for the given radius schedule.  Midpoint
// quadrature for d <= 2, deterministic Kronecker sampling for d > 2.
// Throws NonConvergent when the last three averages spread more than tol.
MeanValueEstimate mean_value_numeric(const ScalarField& f, int dim,
                                     std::span<const double> radii,
                                     long samples_per_radius, double tol = 1e-3);

// ((2L)^-d  int_{[-L,L]^d} |f|^p)^(1/p) stabilized over the length schedule.
BesicovitchEstimate besicovitch_seminorm(const ScalarField& f, int dim, double p,
                                         std::span<const double> lengths,
                                         long samples_per_length, double tol = 1e-3);

// Product of 1-D Fejer kernels over the declared frequency base, expanded on
// the integer lattice of the base: nonnegative, even, mean one.
// base_frequencies[i] lists the (rationally independent) base frequencies for
// axis i; the expansion fails fast if lattice frequencies collide.
TrigPolynomial bochner_fejer_kernel(const std::vector<std::vector<double>>& base_frequencies,
                                    int order);

// Mean-value convolution phi *_M f, computed exactly on coefficients: a
// frequency survives iff present in both factors.  The null part of a
// WStarAPFunction is annihilated exactly.
TrigPolynomial ap_convolve(const TrigPolynomial& phi, const TrigPolynomial& f);
TrigPolynomial ap_convolve(const TrigPolynomial& phi, const WStarAPFunction& f);

struct ExtractOptions {
    std::vector<int> order_schedule = {63, 127, 255, 511};
    int lattice_cap = 4;          // |k|_inf cap when scanning the base lattice
    double noise_floor = 5e-3;    // coefficients below this are quadrature noise
    double mean_radius = 2000.0;  // averaging radius for the coefficient means
    double mean_dx = 0.025;       // quadrature spacing for those means
    double sup_tol = 1e-2;        // stop rule on successive sup-grid deviation
    double sup_half_width = 20.0; // sup grid on [-w, w]^d
    int sup_points = 2001;        // per axis
};

// Recovers the almost periodic component of f by Bohr-coefficient averaging
// on the caller-declared frequency lattice, tapered by Fejer weights over the
// order schedule; returns the largest order whose successive sup-grid
// deviation is below tolerance.  Throws NoConvergence when the schedule
// exhausts without stabilizing (spectrum outside the declared module).
TrigPolynomial extract_ap_component(const ScalarField& f, int dim,
                                    const std::vector<std::vector<double>>& base_frequencies,
                                    const ExtractOptions& opts = {});

// Atomic cosine spectrum plus the real Fourier transform of a compactly
// supported density on a uniform grid (1-D).  The atoms populate the
// trigonometric part; the density transform decays and forms the null part.
WStarAPFunction fs_synthesize(const std::vector<std::pair<double, double>>& atoms,
                              double density_x0, double density_dx,
                              std::vector<double> density);

}  // namespace homog
