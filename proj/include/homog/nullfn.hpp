#pragma once

#include <span>
#include <vector>

namespace homog {

/** A function with vanishing large-ball mean of its absolute value: bounded,
 *  uniformly continuous, and avg_{B(0,R)} |f| -> 0 as R -> infinity.  Each
 *  instance certifies itself with an explicit decay_bound(R) that is monotone
 *  nonincreasing beyond monotone_from().
 *
 *  Shipped shapes: sums of gaussian bumps, an exponential envelope, and the
 *  real part of the Fourier transform of a compactly supported density
 *  (evaluated by quadrature on a caller-supplied grid).
 */
class NullFunction {
public:
    enum class Kind { Zero, GaussianBumpSum, ExponentialEnvelope, FsDensityPart };

    struct Bump {
        double amplitude = 0.0;
        std::vector<double> center;
        double sigma = 1.0;
    };

    static NullFunction zero(int dim);
    static NullFunction gaussian_bumps(int dim, std::vector<Bump> bumps);
    static NullFunction exponential_envelope(int dim, double amplitude, double rate);
    /** d = 1.  density sampled at x0 + i*dx, i = 0..n-1.  Throws
     *  QuadratureError when the grid is too coarse to certify decay. */
    static NullFunction fs_density_part(double x0, double dx, std::vector<double> density);

    double operator()(std::span<const double> y) const;
    double operator()(double y) const;

    /// Upper bound for avg_{B(0,R)} |f|; tends to 0 as R grows.
    double decay_bound(double R) const;
    /// Radius beyond which decay_bound is monotone nonincreasing.
    double monotone_from() const;

    int dim() const { return dim_; }
    Kind kind() const { return kind_; }
    bool is_zero() const { return kind_ == Kind::Zero; }

private:
    NullFunction(int dim, Kind kind) : dim_(dim), kind_(kind) {}

    int dim_ = 1;
    Kind kind_ = Kind::Zero;

    std::vector<Bump> bumps_;
    double amplitude_ = 0.0, rate_ = 1.0;       // exponential envelope
    double x0_ = 0.0, dx_ = 0.0;                // density grid
    std::vector<double> density_;
    double mass_ = 0.0;                         // integral of |f| (bump/exp kinds)
    double m0_ = 0.0, m1_ = 0.0;                // |density|_L1 and its total variation
};

} // namespace homog
