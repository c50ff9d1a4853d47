#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "homog/config.hpp"
#include "homog/corrector.hpp"
#include "homog/operators.hpp"
#include "homog/solver.hpp"

namespace homog {

// Closed-form boundary data: an affine or quadratic polynomial of x, carried
// as a tag + coefficients so configs can describe it exactly.
class BoundaryData {
  public:
    static BoundaryData affine(int dim, double c0, std::vector<double> grad);
    static BoundaryData quadratic(int dim, double c0, std::vector<double> grad, SymMatrix hess);

    double operator()(std::span<const double> x) const;
    double operator()(double x) const;  // d == 1
    ScalarField as_field() const;

    int dim() const { return dim_; }
    const std::string& tag() const { return tag_; }

  private:
    BoundaryData() = default;
    std::string tag_;
    int dim_ = 1;
    double c0_ = 0.0;
    std::vector<double> grad_;
    SymMatrix hess_{1};
    bool has_hess_ = false;
};

/** A fully resolved experiment: every section of the config file validated
 *  and turned into library objects.  Sections not needed by a given
 *  subcommand may be absent; the corresponding accessors then throw. */
struct Experiment {
    std::shared_ptr<const QuasiPeriodicEnsemble> ensemble;  // null for y-independent ops
    std::optional<EllipticOperator> op;
    std::optional<Box> domain;
    std::optional<BoundaryData> boundary;
    EffectiveOptions effective;
    SymMatrix matrix{1};                           // M for the `effective` subcommand
    std::vector<std::vector<double>> table_axes;   // per Hessian coordinate
    std::optional<Phase> pinned_phase;             // overrides seeded sampling
    std::uint64_t seed = 1;
    std::string out_dir = ".";

    // study parameters
    std::vector<double> eps_schedule;
    long base_cells = 64;
    std::string study_benchmark = "operator";  // "operator" | "flux"
    double claimed_tolerance = 1e-2;
    double study_tol = 1e-8;
    long study_max_iter = 200000;

    // `solve` subcommand parameters
    double solve_eps = 1.0;
    double solve_h = 0.0;
    double solve_tol = 1e-8;
    long solve_max_iter = 200000;

    const EllipticOperator& require_op() const;
    const Box& require_domain() const;
    const BoundaryData& require_boundary() const;
    Phase phase() const;  // pinned phase if declared, else sampled from seed
};

// Section builders; each validates only what it consumes.
std::shared_ptr<const QuasiPeriodicEnsemble> build_ensemble(const Config& cfg);
// Trig profile from `<base>constant` and `<base>term.N = "f_1 .. f_dim a b"`.
TrigPolynomial build_trig_profile(const Config& cfg, const std::string& base, int dim);
// Null-part grammar: "none" | "bumps amp c_1..c_dim sigma [...]" | "exp amp rate".
NullFunction build_null_spec(const Config& cfg, const std::string& key, int dim);
EllipticOperator build_operator(const Config& cfg,
                                std::shared_ptr<const QuasiPeriodicEnsemble> ens);
Box build_domain(const Config& cfg);
BoundaryData build_boundary(const Config& cfg, int dim);
EffectiveOptions build_effective_options(const Config& cfg);
SymMatrix build_matrix(const Config& cfg, int dim);
std::vector<std::vector<double>> build_table_axes(const Config& cfg, int dim);
Experiment build_experiment(const Config& cfg);

/** Solves the constant-coefficient effective problem on U with data g using
 *  tabulated values only (multilinear interpolation; queries outside the
 *  table range throw TableRangeExceeded).  1-D: root-finding in the Hessian
 *  coordinate plus an exact tridiagonal solve.  2-D: a monotone wide-stencil
 *  sweep whose node values are table queries at frame-reconstructed Hessians,
 *  extremized to match the table's form tag. */
DiscreteSolution solve_homogenized(const EffectiveTable& table, const Box& U,
                                   const ScalarField& g, double h, double tol,
                                   long max_iter = 200000);

struct StudyRow {
    double eps = 0.0;
    double sup_error = 0.0;
    long iterations = 0;
    double wall_ms = 0.0;  // in-memory only; never serialized
};

struct ConvergenceReport {
    std::vector<StudyRow> rows;
    std::string benchmark;
    std::string form_tag;
    double table_residual_max = 0.0;  // provenance: worst F-bar residual used
    double claimed_tolerance = 0.0;
    std::vector<double> error_ratios() const;
};

/** End-to-end study: builds the effective table on ex.table_axes (estimator
 *  attached, filled on demand), solves the homogenized problem, solves or
 *  quadratures the oscillatory problem per epsilon, and writes
 *  study_report.csv + study_loglog.csv to ex.out_dir.  The report refuses to
 *  cite a table whose recorded residual exceeds ex.claimed_tolerance. */
ConvergenceReport run_convergence_study(const Experiment& ex);

// Report emission (also used by run_convergence_study).
void write_study_csv(const ConvergenceReport& report, const std::string& dir);

}  // namespace homog
