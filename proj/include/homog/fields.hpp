#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "homog/ap_core.hpp"

namespace homog {

// A point on the phase torus [0, 2pi)^k.
struct Phase {
    std::vector<double> angles;
};

// One coefficient channel at a frozen phase: an exact trigonometric
// polynomial in the space variable (the torus profile rotated by the phase)
// plus an optional decaying perturbation attached to this realization.
class Realization {
  public:
    Realization(TrigPolynomial trig, NullFunction null);

    double operator()(std::span<const double> y) const;
    double operator()(double y) const;

    const TrigPolynomial& trig() const { return trig_; }
    const NullFunction& null_part() const { return null_; }
    int dim() const { return trig_.dim(); }
    ScalarField as_field() const;

  private:
    TrigPolynomial trig_;
    NullFunction null_;
};

/** Stationary ergodic coefficient fields realized as translations on a phase
 *  torus: the probability space is [0, 2pi)^k with the uniform measure, the
 *  flow is omega -> omega + Lambda y (mod 2pi), and each named channel is a
 *  2pi-periodic trigonometric profile of the phase, so realizations are
 *  quasi-periodic functions of y.
 *
 *  Construction certifies ergodicity by checking m^T Lambda != 0 for every
 *  nonzero integer vector with |m|_inf <= m_max (m_max = 0 disables the
 *  certificate to allow resonant diagnostics); channel frequencies are
 *  checked regardless of their magnitude.
 */
class QuasiPeriodicEnsemble {
  public:
    QuasiPeriodicEnsemble(int torus_dim, int space_dim,
                          std::vector<double> freq_matrix_row_major, int m_max = 8);

    int torus_dim() const { return k_; }
    int space_dim() const { return d_; }
    int m_max() const { return m_max_; }
    // row-major k x d
    const std::vector<double>& freq_matrix() const { return lam_; }

    // profile: trigonometric polynomial in the k torus angles with integer
    // frequency vectors (2pi-periodicity).  Throws ErgodicityViolation when a
    // term's frequency is resonant (m^T Lambda = 0) and the certificate is on.
    void add_channel(const std::string& name, TrigPolynomial profile_on_torus);
    // decaying perturbation added to every realization of the channel
    void add_null_profile(const std::string& name, NullFunction null);

    bool has_channel(const std::string& name) const;
    const TrigPolynomial& profile(const std::string& name) const;
    const NullFunction& null_profile(const std::string& name) const;
    std::vector<std::string> channel_names() const;

    Phase sample_phase(std::uint64_t seed) const;
    Phase shift(const Phase& omega, std::span<const double> y) const;
    Phase shift(const Phase& omega, double y) const;  // d == 1

    Realization realization(const Phase& omega, const std::string& channel) const;

    // Uniform-measure average of the profile by torus-grid quadrature.
    double ensemble_mean(const std::string& channel) const;

  private:
    std::vector<double> lambda_times(std::span<const double> y) const;  // Lambda y in R^k
    void certify_nonresonant(std::span<const double> m_freq, const std::string& where) const;

    int k_, d_, m_max_;
    std::vector<double> lam_;  // k x d row-major
    std::map<std::string, TrigPolynomial> channels_;
    std::map<std::string, NullFunction> nulls_;
};

struct BirkhoffReport {
    double ensemble_mean = 0.0;
    std::vector<double> spatial_means;  // one per sampled phase, at the largest radius
    double max_gap = 0.0;
};

// Compares the torus-quadrature ensemble mean with spatial orbit averages of
// n_phases sampled realizations.  Throws ErgodicityViolation when the largest
// gap at the final radius exceeds tol.
BirkhoffReport birkhoff_compare(const QuasiPeriodicEnsemble& ens, const std::string& channel,
                                int n_phases, std::span<const double> radii,
                                long samples_per_radius, std::uint64_t seed,
                                double tol = 1e-2);

/** Mean-square gap between ball averages of the realized field and the
 *  ensemble mean:
 *
 *      r(t) = E_omega | avg_{B(0,t)} f(T(x) omega) dx  -  E f |^2 .
 *
 *  For trigonometric profiles the inner ball average has the closed per-term
 *  radial factor (sinc in 1-D, 2 J1(s)/s in 2-D), and the outer mean is a
 *  Parseval sum, so r(t) is evaluated exactly; it vanishes as t grows iff no
 *  realized frequency collapses to zero.  Returns r at the largest t of the
 *  schedule. */
double ergodicity_residual(const QuasiPeriodicEnsemble& ens, const TrigPolynomial& f_on_torus,
                           std::span<const double> t_schedule);

}  // namespace homog
