#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "homog/ap_core.hpp"
#include "homog/operators.hpp"

namespace homog {

// ---------------------------------------------------------------------------
// Axis-aligned box domain in dimension 1 or 2.
// ---------------------------------------------------------------------------
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    int dim() const { return static_cast<int>(lo.size()); }

    static Box interval(double a, double b);
    static Box rectangle(double ax, double bx, double ay, double by);
    static Box centered_cube(int dim, double half_width);
};

// ---------------------------------------------------------------------------
// Integer-direction stencil.  Directions are stored as a canonical half (the
// opposite of each listed vector is used implicitly by the symmetric second
// difference).  In d = 2 the stencil also records its orthogonal frames
// (v, rot90(v)) together with the index of the "companion" directions
// v + rot90(v) and v - rot90(v) when those are present after reduction to
// primitive vectors; frames with companions admit monotone decompositions of
// anisotropic coefficient matrices.
// ---------------------------------------------------------------------------
class Stencil {
  public:
    struct Frame {
        int i = -1;      // direction index of v
        int j = -1;      // direction index of rot90(v) (canonical representative)
        int plus = -1;   // index of primitive(v + rot90(v)), -1 if absent
        int minus = -1;  // index of primitive(v - rot90(v)), -1 if absent
    };

    // d = 1: the single direction (1).  d = 2: axes plus both diagonals.
    static Stencil standard(int dim);
    // All primitive integer directions with |v|_inf <= width, canonical half.
    static Stencil lattice(int dim, int width);

    int dim() const { return dim_; }
    int width() const { return width_; }
    const std::vector<std::array<int, 2>>& directions() const { return dirs_; }
    const std::vector<Frame>& frames() const { return frames_; }
    std::size_t size() const { return dirs_.size(); }
    // |v|^2 of direction k.
    double sq_len(std::size_t k) const;

  private:
    int dim_ = 0;
    int width_ = 0;
    std::vector<std::array<int, 2>> dirs_;
    std::vector<Frame> frames_;

    void build_frames();
};

// ---------------------------------------------------------------------------
// Uniform grid over a box.  Node (i, j) sits at
//   x = (lo_x + i h, lo_y + j h),  0 <= i < nx, 0 <= j < ny  (ny = 1 in d=1).
// The box extents must be integer multiples of h (within roundoff).  A node
// is interior when it is at least `margin` (the stencil width) nodes away
// from every face; the remaining band carries Dirichlet data.
// ---------------------------------------------------------------------------
struct Grid {
    Box box;
    double h = 0.0;
    int dim = 0;
    std::array<std::int64_t, 2> n = {0, 1};  // node counts per axis
    Stencil stencil;

    static Grid make(const Box& box, double h, Stencil stencil);

    std::int64_t nodes() const { return n[0] * n[1]; }
    std::int64_t index(std::int64_t i, std::int64_t j = 0) const { return j * n[0] + i; }
    double x(int axis, std::int64_t i) const { return box.lo[axis] + h * static_cast<double>(i); }
    int margin() const { return stencil.width(); }
    bool interior(std::int64_t i, std::int64_t j) const;
    bool same_layout(const Grid& other) const;
};

// ---------------------------------------------------------------------------
// Discrete solution container.
// ---------------------------------------------------------------------------
struct DiscreteSolution {
    Grid grid;
    std::vector<double> values;          // all nodes, boundary band included
    std::vector<double> boundary_trace;  // Dirichlet data on the band, 0 inside
    double residual_norm = 0.0;          // sup norm of the scheme at exit
    std::int64_t iterations = 0;
    bool converged = true;

    double at(std::int64_t i, std::int64_t j = 0) const { return values[grid.index(i, j)]; }
};

// Directional second differences (u(x + hv) - 2 u(x) + u(x - hv)) / (h^2 |v|^2)
// for every canonical stencil direction at node (i, j); the node must be
// interior.  Entries align with grid.stencil.directions().
std::vector<double> discrete_hessian(const Grid& grid, const std::vector<double>& values,
                                     std::int64_t i, std::int64_t j = 0);

// ---------------------------------------------------------------------------
// Monotone decomposition of a symmetric coefficient matrix over a stencil:
// weights w_k >= 0 with  sum_k w_k (v_k v_k^T / |v_k|^2) = a,  so that
// trace(a D^2 u) = sum_k w_k Delta^2_{v_k} u  for quadratics.  Throws
// NonMonotoneDecomposition when no frame of the stencil admits nonnegative
// weights (remedy: widen the stencil).
// ---------------------------------------------------------------------------
struct Decomposition {
    int frame = -1;                  // index into stencil.frames(), -1 in d = 1
    std::vector<double> weights;     // per canonical direction, aligned with directions()
};

Decomposition decompose(const SymMatrix& a, const Stencil& stencil);

// ---------------------------------------------------------------------------
// Scheme application: residual of F_h(omega, x/eps, D^2_h u) at every interior
// node (boundary band entries are 0).  Positive residual means the discrete
// operator is positive there.
// ---------------------------------------------------------------------------
std::vector<double> apply_scheme(const EllipticOperator& op, const Phase& omega, double eps,
                                 const Grid& grid, const std::vector<double>& values);

enum class SchemeMode { Auto, Direct, Iterative };

// ---------------------------------------------------------------------------
// Dirichlet solve of F(omega, x/eps, D^2 u) = 0 in U, u = g on the boundary.
//  - linear operators: exact sparse solve (tridiagonal in d = 1, banded LU or
//    BiCGSTAB in d = 2), iterations = 1 on the direct path;
//  - Pucci / Bellman operators: Howard policy iteration, each policy solved
//    by the linear path;
//  - SchemeMode::Iterative forces damped pseudo-time stepping
//    u <- u + tau * residual with tau = h^2 / (2 d Lambda C_stencil); the
//    sup-norm update sequence must be nonexpansive, otherwise NonConvergent
//    is thrown.
// Reaching max_iter marks converged = false (no throw).
// ---------------------------------------------------------------------------
DiscreteSolution solve_dirichlet(const EllipticOperator& op, const Phase& omega, double eps,
                                 const Box& domain, const ScalarField& g, double h, double tol,
                                 std::int64_t max_iter = 200000,
                                 SchemeMode mode = SchemeMode::Auto);

// ---------------------------------------------------------------------------
// Damped cell-problem solve:
//     delta v + F(omega, y, M - D^2 v) = 0   on [-L', L']^d,   v = 0 on the
// boundary, where L' = ceil(L / h) * h is L snapped up to a node multiple.
// The matrix argument M - D^2 v is the curvature of the corrected profile
// 1/2 y.M y - v.  A warm-start vector (matching the grid layout) may be
// supplied to seed the nonlinear iteration.
// ---------------------------------------------------------------------------
DiscreteSolution solve_damped(const EllipticOperator& op, const Phase& omega, const SymMatrix& M,
                              double delta, double L, double h, double tol,
                              std::int64_t max_iter = 200000, SchemeMode mode = SchemeMode::Auto,
                              const std::vector<double>* warm_start = nullptr);

// Sup distance between two discrete solutions on identical grids (throws
// GridMismatch otherwise), and against a closed-form field sampled nodewise.
double sup_distance(const DiscreteSolution& a, const DiscreteSolution& b);
double sup_distance(const DiscreteSolution& a, const ScalarField& exact);

}  // namespace homog
