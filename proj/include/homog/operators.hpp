#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "homog/fields.hpp"

namespace homog {

// Symmetric d x d matrix, d in {1, 2}, with closed-form eigenvalues.
class SymMatrix {
  public:
    explicit SymMatrix(int dim = 1);
    static SymMatrix of_1d(double m);
    static SymMatrix of_2d(double xx, double xy, double yy);
    static SymMatrix identity(int dim);

    int dim() const { return dim_; }
    double operator()(int i, int j) const;
    void set(int i, int j, double v);

    double trace() const;
    std::array<double, 2> eigenvalues() const;  // ascending; e[1] unused for d = 1
    double norm_spectral() const;

    SymMatrix& operator+=(const SymMatrix& rhs);
    SymMatrix& operator-=(const SymMatrix& rhs);
    SymMatrix& operator*=(double s);
    friend SymMatrix operator+(SymMatrix l, const SymMatrix& r) { l += r; return l; }
    friend SymMatrix operator-(SymMatrix l, const SymMatrix& r) { l -= r; return l; }
    friend SymMatrix operator*(SymMatrix l, double s) { l *= s; return l; }

  private:
    int dim_;
    std::array<double, 3> e_{};  // xx, xy, yy
};

enum class PucciKind { Plus, Minus };

// Extremal operators: plus = Lambda sum(e+) - lambda sum(e-), minus swaps.
double pucci(PucciKind kind, double lambda, double Lambda, const SymMatrix& M);

// Modulus of continuity data: |F(y,M) - F(z,M)| <= rho((1+|M|)|y-z|^gamma)
// with rho(s) = scale * s^power and gamma > 1/2.
struct ModulusSpec {
    double scale = 1.0;
    double power = 1.0;
    double gamma = 1.0;
    double operator()(double s) const { return scale * std::pow(s, power); }
};

/** Uniformly elliptic F(omega, y, M) with declared constants (lambda, Lambda)
 *  and modulus data.  Forms: nondivergence linear trace(a(omega,y) M) with a
 *  scalar or matrix-valued coefficient channel, the two Pucci extremal
 *  operators (y-independent), and a Bellman minimum over linear branches
 *  trace(a_i M) - f_i. */
class EllipticOperator {
  public:
    enum class Form { LinearNonDiv, PucciPlus, PucciMinus, BellmanMin };

    struct BellmanBranch {
        std::string coeff_channel;    // scalar coefficient
        std::string forcing_channel;  // empty: use forcing_const
        double forcing_const = 0.0;
    };

    static EllipticOperator pucci_plus(int dim, double lambda, double Lambda);
    static EllipticOperator pucci_minus(int dim, double lambda, double Lambda);
    // F = a(omega,y) trace(M), coefficient from a scalar channel
    static EllipticOperator linear_scalar(std::shared_ptr<const QuasiPeriodicEnsemble> ens,
                                          std::string channel, double lambda, double Lambda,
                                          ModulusSpec modulus = {});
    // F = trace(a(omega,y) M), entries from channels (a11, a12, a22); d = 2
    static EllipticOperator linear_matrix(std::shared_ptr<const QuasiPeriodicEnsemble> ens,
                                          std::array<std::string, 3> channels, double lambda,
                                          double Lambda, ModulusSpec modulus = {});
    // y-independent F = trace(a M)
    static EllipticOperator linear_constant(const SymMatrix& a, double lambda, double Lambda);
    static EllipticOperator bellman_min(std::shared_ptr<const QuasiPeriodicEnsemble> ens,
                                        std::vector<BellmanBranch> branches, double lambda,
                                        double Lambda, ModulusSpec modulus = {});

    int dim() const { return dim_; }
    double lambda_min() const { return lambda_; }
    double lambda_max() const { return Lambda_; }
    Form form() const { return form_; }
    const ModulusSpec& modulus() const { return modulus_; }
    const std::shared_ptr<const QuasiPeriodicEnsemble>& ensemble() const { return ens_; }
    int n_branches() const { return int(branches_.size()); }

    double eval(const Phase& omega, std::span<const double> y, const SymMatrix& M) const;

    /** Frozen-phase view consumed by the solvers: pure functions of y. */
    class Realized {
      public:
        double eval(std::span<const double> y, const SymMatrix& M) const;
        SymMatrix coeff(std::span<const double> y) const;  // LinearNonDiv
        int n_branches() const { return int(branch_coeffs_.size()); }
        SymMatrix branch_coeff(int i, std::span<const double> y) const;
        double branch_forcing(int i, std::span<const double> y) const;
        Form form() const { return form_; }
        int dim() const { return dim_; }
        double lambda_min() const { return lambda_; }
        double lambda_max() const { return Lambda_; }

      private:
        friend class EllipticOperator;
        Form form_ = Form::PucciPlus;
        int dim_ = 1;
        double lambda_ = 1.0, Lambda_ = 1.0;
        std::optional<SymMatrix> const_coeff_;
        std::vector<Realization> coeff_parts_;             // scalar [a] or matrix [a11,a12,a22]
        std::vector<std::vector<Realization>> branch_coeffs_;  // scalar per branch
        std::vector<std::optional<Realization>> branch_forcings_;
        std::vector<double> branch_forcing_consts_;
    };

    Realized realize(const Phase& omega) const;

  private:
    EllipticOperator() = default;

    Form form_ = Form::PucciPlus;
    int dim_ = 1;
    double lambda_ = 1.0, Lambda_ = 1.0;
    ModulusSpec modulus_;
    std::shared_ptr<const QuasiPeriodicEnsemble> ens_;
    std::vector<std::string> coeff_channels_;  // 1 (scalar) or 3 (matrix entries)
    std::optional<SymMatrix> const_coeff_;
    std::vector<BellmanBranch> branches_;
};

struct EllipticityMargins {
    double lower = 0.0;  // min over samples of diff - lambda tr(N)
    double upper = 0.0;  // min over samples of Lambda tr(N) - diff
};

// Samples (y, M, N >= 0) and checks lambda tr(N) <= F(M+N) - F(M) <= Lambda tr(N)
// (trace norm of the nonnegative increment); for linear forms the coefficient
// eigenvalues are checked against [lambda, Lambda] at every sampled y.
// Throws EllipticityViolation when a margin drops below -1e-9.
EllipticityMargins ellipticity_audit(const EllipticOperator& op, const Phase& omega,
                                     int n_samples, std::uint64_t seed);

// Samples near pairs (y, z) over several separation scales and returns the
// worst |F(y,M)-F(z,M)| / rho((1+|M|)|y-z|^gamma); throws ModulusViolation
// when it exceeds 1 + 1e-6.
double modulus_audit(const EllipticOperator& op, const Phase& omega, int n_samples,
                     std::uint64_t seed);

}  // namespace homog
