#pragma once

#include <span>
#include <string>
#include <vector>

namespace homog {

/** Real trigonometric polynomial on R^d,
 *
 *    f(y) = c0 + sum_j [ a_j cos(lambda_j . y) + b_j sin(lambda_j . y) ].
 *
 *  Frequencies are stored canonically: no zero frequency (folded into the
 *  constant), first nonzero component positive (sign absorbed into b), no
 *  duplicates, terms sorted lexicographically.  Canonical storage lets the
 *  coefficient algebra (convolution, products) use exact frequency equality,
 *  as long as callers build equal frequencies through identical arithmetic.
 */
class TrigPolynomial {
public:
    struct Term {
        std::vector<double> freq;
        double cos_coef = 0.0;
        double sin_coef = 0.0;
    };

    explicit TrigPolynomial(int dim = 1, double constant = 0.0);

    int dim() const { return dim_; }
    double constant() const { return constant_; }
    void set_constant(double c) { constant_ = c; }
    const std::vector<Term>& terms() const { return terms_; }

    /// Adds a*cos(freq.y) + b*sin(freq.y), canonicalizing and merging.
    void add_term(std::span<const double> freq, double a, double b);
    void add_term(double freq, double a, double b);  // d == 1

    double operator()(std::span<const double> y) const;
    double operator()(double y) const;

    /// |c0| + sum_j sqrt(a_j^2 + b_j^2): a cheap uniform envelope.
    double sup_bound() const;
    /// Smallest nonzero |lambda_j| over stored terms (0 if none).
    double min_frequency() const;

    TrigPolynomial& operator+=(const TrigPolynomial& rhs);
    TrigPolynomial& operator-=(const TrigPolynomial& rhs);
    TrigPolynomial& operator*=(double s);

    friend TrigPolynomial operator+(TrigPolynomial l, const TrigPolynomial& r) { l += r; return l; }
    friend TrigPolynomial operator-(TrigPolynomial l, const TrigPolynomial& r) { l -= r; return l; }
    friend TrigPolynomial operator*(TrigPolynomial l, double s) { l *= s; return l; }

    /** Product-to-sum expansion.  Result frequencies are floating sums of the
     *  factors'; distinct index pairs must not collide except through exact
     *  equality, which holds for the rationally independent generators used
     *  throughout. */
    static TrigPolynomial multiply(const TrigPolynomial& f, const TrigPolynomial& g);

    /** Plain-text records: first line "d; constant", then one term per line
     *  "f_1 ... f_d; a; b".  Round-trips exactly via %.17g. */
    std::string serialize() const;
    static TrigPolynomial deserialize(const std::string& text);

private:
    void sort_terms();

    int dim_;
    double constant_;
    std::vector<Term> terms_;
};

} // namespace homog
