#include "homog/nullfn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "homog/errors.hpp"

namespace homog {

namespace {

double vol_ball(int d, double R) {
    if (d == 1) return 2.0 * R;
    if (d == 2) return std::numbers::pi * R * R;
    // recursive v_d = v_{d-2} * 2 pi R^2 / d
    double v = (d % 2 == 0) ? std::numbers::pi * R * R : 2.0 * R;
    for (int k = (d % 2 == 0) ? 4 : 3; k <= d; k += 2)
        v *= 2.0 * std::numbers::pi * R * R / k;
    return v;
}

} // namespace

NullFunction NullFunction::zero(int dim) {
    return NullFunction(dim, Kind::Zero);
}

NullFunction NullFunction::gaussian_bumps(int dim, std::vector<Bump> bumps) {
    NullFunction f(dim, Kind::GaussianBumpSum);
    for (auto& b : bumps) {
        if (static_cast<int>(b.center.size()) != dim)
            throw ValidationError("NullFunction: bump center dimension mismatch");
        if (b.sigma <= 0.0) throw ValidationError("NullFunction: bump sigma must be positive");
        f.mass_ += std::abs(b.amplitude) *
                   std::pow(b.sigma * std::sqrt(2.0 * std::numbers::pi), dim);
    }
    f.bumps_ = std::move(bumps);
    return f;
}

NullFunction NullFunction::exponential_envelope(int dim, double amplitude, double rate) {
    if (rate <= 0.0) throw ValidationError("NullFunction: envelope rate must be positive");
    NullFunction f(dim, Kind::ExponentialEnvelope);
    f.amplitude_ = amplitude;
    f.rate_ = rate;
    // integral of |A| e^{-rate |y|} over R^d
    if (dim == 1) f.mass_ = 2.0 * std::abs(amplitude) / rate;
    else if (dim == 2) f.mass_ = 2.0 * std::numbers::pi * std::abs(amplitude) / (rate * rate);
    else {
        double surf = vol_ball(dim, 1.0) * dim;  // |S^{d-1}|
        double fact = 1.0;
        for (int k = 1; k < dim; ++k) fact *= k;  // Gamma(d)
        f.mass_ = std::abs(amplitude) * surf * fact / std::pow(rate, dim);
    }
    return f;
}

NullFunction NullFunction::fs_density_part(double x0, double dx, std::vector<double> density) {
    if (dx <= 0.0 || density.size() < 3)
        throw ValidationError("NullFunction: density grid needs dx > 0 and >= 3 nodes");
    NullFunction f(1, Kind::FsDensityPart);
    f.x0_ = x0;
    f.dx_ = dx;
    f.density_ = std::move(density);

    // m0 = integral of |rho| (trapezoid), m1 = total variation, which bounds
    // the L1 norm of rho' and via one integration by parts gives
    // |f(x)| <= min(m0, m1/|x|).
    const auto& rho = f.density_;
    for (std::size_t i = 0; i + 1 < rho.size(); ++i) {
        f.m0_ += 0.5 * (std::abs(rho[i]) + std::abs(rho[i + 1])) * dx;
        f.m1_ += std::abs(rho[i + 1] - rho[i]);
    }
    if (f.m0_ == 0.0) return zero(1);

    // Audit: the quadrature evaluation of the transform aliases once |x|
    // approaches pi/dx, so check the empirical ball averages of |f| against
    // the claimed bound on an alias-safe range.  A coarse grid fails here.
    const double r_max = 0.25 * std::numbers::pi / dx;
    const double r0 = f.monotone_from();
    if (r_max < 4.0 * std::max(r0, 1.0))
        throw QuadratureError("fs_density_part: density grid too coarse to certify decay");
    for (double frac : {0.125, 0.25, 0.5, 1.0}) {
        const double R = frac * std::min(r_max, 200.0);
        const int n = 2001;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = -R + (i + 0.5) * (2.0 * R / n);
            acc += std::abs(f(x));
        }
        acc /= n;
        if (acc > 1.10 * f.decay_bound(R) + 1e-12)
            throw QuadratureError("fs_density_part: empirical tail exceeds decay bound "
                                  "(density grid too coarse)");
    }
    return f;
}

double NullFunction::operator()(std::span<const double> y) const {
    switch (kind_) {
    case Kind::Zero:
        return 0.0;
    case Kind::GaussianBumpSum: {
        double s = 0.0;
        for (const Bump& b : bumps_) {
            double r2 = 0.0;
            for (int i = 0; i < dim_; ++i) {
                const double d = y[i] - b.center[i];
                r2 += d * d;
            }
            s += b.amplitude * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
        }
        return s;
    }
    case Kind::ExponentialEnvelope: {
        double r2 = 0.0;
        for (int i = 0; i < dim_; ++i) r2 += y[i] * y[i];
        return amplitude_ * std::exp(-rate_ * std::sqrt(r2));
    }
    case Kind::FsDensityPart: {
        // real part of the transform: integral cos(x t) rho(t) dt, trapezoid
        const double x = y[0];
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < density_.size(); ++i) {
            const double t0 = x0_ + i * dx_, t1 = t0 + dx_;
            s += 0.5 * (std::cos(x * t0) * density_[i] + std::cos(x * t1) * density_[i + 1]) * dx_;
        }
        return s;
    }
    }
    return 0.0;
}

double NullFunction::operator()(double y) const {
    return (*this)(std::span<const double>(&y, 1));
}

double NullFunction::decay_bound(double R) const {
    if (R <= 0.0) throw ValidationError("NullFunction: decay_bound needs R > 0");
    switch (kind_) {
    case Kind::Zero:
        return 0.0;
    case Kind::GaussianBumpSum:
    case Kind::ExponentialEnvelope:
        return mass_ / vol_ball(dim_, R);
    case Kind::FsDensityPart: {
        // average of min(m0, m1/|x|) over [-R, R]
        const double x0 = m1_ / m0_;
        if (R <= x0) return m0_;
        return (m0_ * x0 + m1_ * std::log(R / x0)) / R;
    }
    }
    return 0.0;
}

double NullFunction::monotone_from() const {
    return kind_ == Kind::FsDensityPart ? m1_ / m0_ : 0.0;
}

} // namespace homog
