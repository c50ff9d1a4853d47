#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "homog/solver.hpp"

namespace homog {

// ---------------------------------------------------------------------------
// One damped cell-problem run:  delta v + F(omega, y, M - D^2 v) = 0 on
// [-L, L]^d with v = 0 on the boundary.  The signs follow the orientation in
// which the corrected profile is 1/2 y.M y - v, so that the damped value
// delta v(0) tends to -Fbar(M); the convention is pinned by the 1-D
// harmonic-mean oracle (a(y) = A + sin y gives delta v(0) -> -sqrt(A^2-1) m).
// ---------------------------------------------------------------------------
struct CorrectorRun {
    SymMatrix M{1};
    double delta = 0.0;
    double L = 0.0;  // half width actually used (snapped to a multiple of h)
    double h = 0.0;
    DiscreteSolution solution;
    double center_value = 0.0;
    // Truncation diagnostic: the peak deviation of v on the outer 10% shell
    // from the inner-box median, transported to the center through the
    // damping decay factor exp(-0.9 L / l), l = sqrt(Lambda/delta), and
    // scaled by delta so it is commensurable with delta*v readouts.
    double boundary_influence = 0.0;
    bool truncation_warning = false;  // boundary_influence > 10 * tol
};

// Domain half-width rule L = c sqrt(Lambda/delta) ln(1/tol); the damped
// solver snaps L up to the next multiple of h.  A fixed half width, when
// set, overrides the rule.
struct DomainRule {
    double c = 1.0;
    std::optional<double> fixed_half_width;

    double operator()(double Lambda, double delta, double tol) const;
};

CorrectorRun solve_delta_corrector(const EllipticOperator& op, const Phase& omega,
                                   const SymMatrix& M, double delta, double L, double h,
                                   double tol, std::int64_t max_iter = 200000,
                                   const std::vector<double>* warm_start = nullptr);

// ---------------------------------------------------------------------------
// Effective-operator estimation: damped center readouts x(delta) =
// delta * v_delta(0) along a decreasing delta schedule, a first-order
// least-squares fit x = x* + c delta over the last three points, and
// Fbar(M) := -x*.  `residual` is reported conservatively as
// max(|x_last - x*|, worst boundary influence, solver tol).
// ---------------------------------------------------------------------------
struct EffectiveEstimate {
    double fbar = 0.0;
    double residual = 0.0;
    double extrapolation_residual = 0.0;  // |x_last - x*|
    double boundary_influence = 0.0;      // worst over the schedule
    std::vector<double> deltas;
    std::vector<double> damped_center;  // x(delta) per schedule entry
    bool truncation_warning = false;
};

struct EffectiveOptions {
    std::vector<double> delta_schedule{4e-2, 2e-2, 1e-2};
    DomainRule domain;
    double h = 1e-2;
    double tol = 1e-6;
    std::int64_t max_iter = 200000;
    // successive center gaps must shrink by this factor unless already at
    // the noise floor 50 * tol * (1 + |x|)
    double contraction_factor = 1.2;
};

EffectiveEstimate estimate_effective(const EllipticOperator& op, const Phase& omega,
                                     const SymMatrix& M, const EffectiveOptions& opts = {});

// ---------------------------------------------------------------------------
// Structural checks.
// ---------------------------------------------------------------------------

// Solves the corrector at omega and at shift(omega, y0) and returns the sup
// gap between v(omega, . + y0) (cubic interpolation) and v(shift(omega,y0), .)
// over the window |y|_inf <= window_half (default L/8).  Requires
// |y0|_inf <= L/4.
double shift_covariance_check(const EllipticOperator& op, const Phase& omega, const SymMatrix& M,
                              double delta, const std::vector<double>& y0, double L, double h,
                              double tol, double window_half = 0.0);

struct SpreadReport {
    double spread = 0.0;            // max pairwise gap of Fbar across phases
    std::vector<double> values;     // Fbar per sampled phase
    double max_residual = 0.0;      // worst reported residual across phases
};

SpreadReport omega_independence_check(const EllipticOperator& op, const SymMatrix& M,
                                      const EffectiveOptions& opts, int n_phases,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Estimator plumbing: a memoizing closure over estimate_effective, and a
// lattice table with multilinear interpolation for the homogenized solver.
// ---------------------------------------------------------------------------
using EffectiveEstimator = std::function<EffectiveEstimate(const SymMatrix&)>;

EffectiveEstimator make_corrector_estimator(const EllipticOperator& op, const Phase& omega,
                                            const EffectiveOptions& opts);

/** Axis-aligned lattice of Fbar values over Hessian coordinates
 *  (d = 1: [m]; d = 2: [m11, m12, m22]) with multilinear interpolation and
 *  no extrapolation.  Entries may be precomputed (`build`) or filled on
 *  first touch from an attached estimator (`lazy`); both paths produce
 *  identical numbers.  The form tag and the (lambda, Lambda) pair travel
 *  with the table so the homogenized solver can pick its scheme. */
class EffectiveTable {
  public:
    struct Entry {
        std::vector<double> m;  // lattice coordinates
        double fbar = 0.0;
        double delta_min = 0.0;
        double residual = 0.0;
    };

    static EffectiveTable build(const EffectiveEstimator& estimator, int dim,
                                std::vector<std::vector<double>> axes, std::string form_tag,
                                double lambda, double Lambda, double delta_min);
    static EffectiveTable lazy(EffectiveEstimator estimator, int dim,
                               std::vector<std::vector<double>> axes, std::string form_tag,
                               double lambda, double Lambda, double delta_min);

    int dim() const { return dim_; }
    int coords() const { return dim_ == 1 ? 1 : 3; }
    const std::vector<std::vector<double>>& axes() const { return axes_; }
    const std::string& form_tag() const { return form_tag_; }
    double lambda_min() const { return lambda_; }
    double lambda_max() const { return Lambda_; }

    // Multilinear interpolation; throws TableRangeExceeded outside the hull.
    double interpolate(const SymMatrix& M) const;
    // Stored value at a lattice node (filled on demand on the lazy path).
    const Entry& at(const std::vector<std::size_t>& node) const;
    std::size_t size() const;                  // total lattice nodes
    std::size_t computed() const;              // entries already filled
    double max_residual() const;               // over filled entries
    std::vector<std::size_t> shape() const;

    void save_csv(const std::string& path) const;
    static EffectiveTable load_csv(const std::string& path);

  private:
    EffectiveTable() = default;
    std::size_t flat_index(const std::vector<std::size_t>& node) const;
    void fill_all() const;
    const Entry& ensure(std::size_t flat) const;

    int dim_ = 1;
    std::vector<std::vector<double>> axes_;
    std::string form_tag_;
    double lambda_ = 1.0, Lambda_ = 1.0;
    double delta_min_ = 0.0;
    EffectiveEstimator estimator_;  // may be empty (fully precomputed/loaded)
    mutable std::vector<std::optional<Entry>> entries_;
};

// ---------------------------------------------------------------------------
// Ellipticity transfer check on the effective operator: samples matrix pairs
// (M, M+N) with N positive semidefinite and verifies
//     lambda tr(N) <= Fbar(M+N) - Fbar(M) <= Lambda tr(N)
// within a slack of 3x the worst estimation residual involved.  The
// estimator-backed variant draws continuous samples; the table-backed
// variant draws lattice vertex pairs (so stored values are compared
// directly and interpolation error never enters).  Throws
// EllipticityViolation beyond the slack.
// ---------------------------------------------------------------------------
EllipticityMargins effective_ellipticity_check(const EffectiveEstimator& estimator, int dim,
                                               double lambda, double Lambda, int n_samples,
                                               std::uint64_t seed);
EllipticityMargins effective_ellipticity_check(const EffectiveTable& table, double lambda,
                                               double Lambda, int n_samples, std::uint64_t seed);

}  // namespace homog
