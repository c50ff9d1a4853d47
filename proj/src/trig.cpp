#include "homog/trig.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <sstream>

#include "homog/errors.hpp"

namespace homog {

namespace {

// Canonical sign: first nonzero component positive.  Returns false if the
// frequency is identically zero.  Flipping lambda -> -lambda keeps cos and
// negates sin, so the caller flips b alongside.
bool canonicalize(std::vector<double>& freq, double& b) {
    for (double c : freq) {
        if (c > 0.0) return true;
        if (c < 0.0) {
            for (double& x : freq) x = -x;
            b = -b;
            return true;
        }
    }
    return false;
}

bool freq_less(const std::vector<double>& a, const std::vector<double>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

} // namespace

TrigPolynomial::TrigPolynomial(int dim, double constant)
    : dim_(dim), constant_(constant) {
    if (dim < 1) throw ValidationError("TrigPolynomial: dimension must be >= 1");
}

void TrigPolynomial::add_term(std::span<const double> freq, double a, double b) {
    if (static_cast<int>(freq.size()) != dim_)
        throw ValidationError("TrigPolynomial: frequency dimension mismatch");
    std::vector<double> f(freq.begin(), freq.end());
    if (!canonicalize(f, b)) {
        constant_ += a;  // cos(0) = 1, sin(0) = 0
        return;
    }
    auto it = std::lower_bound(terms_.begin(), terms_.end(), f,
        [](const Term& t, const std::vector<double>& key) { return freq_less(t.freq, key); });
    if (it != terms_.end() && it->freq == f) {
        it->cos_coef += a;
        it->sin_coef += b;
        if (it->cos_coef == 0.0 && it->sin_coef == 0.0) terms_.erase(it);
        return;
    }
    if (a == 0.0 && b == 0.0) return;
    terms_.insert(it, Term{std::move(f), a, b});
}

void TrigPolynomial::add_term(double freq, double a, double b) {
    add_term(std::span<const double>(&freq, 1), a, b);
}

double TrigPolynomial::operator()(std::span<const double> y) const {
    double s = constant_;
    for (const Term& t : terms_) {
        double arg = 0.0;
        for (int i = 0; i < dim_; ++i) arg += t.freq[i] * y[i];
        s += t.cos_coef * std::cos(arg) + t.sin_coef * std::sin(arg);
    }
    return s;
}

double TrigPolynomial::operator()(double y) const {
    return (*this)(std::span<const double>(&y, 1));
}

double TrigPolynomial::sup_bound() const {
    double s = std::abs(constant_);
    for (const Term& t : terms_) s += std::hypot(t.cos_coef, t.sin_coef);
    return s;
}

double TrigPolynomial::min_frequency() const {
    double m = 0.0;
    for (const Term& t : terms_) {
        double n2 = 0.0;
        for (double c : t.freq) n2 += c * c;
        const double n = std::sqrt(n2);
        if (m == 0.0 || n < m) m = n;
    }
    return m;
}

TrigPolynomial& TrigPolynomial::operator+=(const TrigPolynomial& rhs) {
    if (rhs.dim_ != dim_) throw ValidationError("TrigPolynomial: dimension mismatch in +=");
    constant_ += rhs.constant_;
    for (const Term& t : rhs.terms_) add_term(t.freq, t.cos_coef, t.sin_coef);
    return *this;
}

TrigPolynomial& TrigPolynomial::operator-=(const TrigPolynomial& rhs) {
    if (rhs.dim_ != dim_) throw ValidationError("TrigPolynomial: dimension mismatch in -=");
    constant_ -= rhs.constant_;
    for (const Term& t : rhs.terms_) add_term(t.freq, -t.cos_coef, -t.sin_coef);
    return *this;
}

TrigPolynomial& TrigPolynomial::operator*=(double s) {
    constant_ *= s;
    if (s == 0.0) { terms_.clear(); return *this; }
    for (Term& t : terms_) { t.cos_coef *= s; t.sin_coef *= s; }
    return *this;
}

TrigPolynomial TrigPolynomial::multiply(const TrigPolynomial& f, const TrigPolynomial& g) {
    if (f.dim_ != g.dim_) throw ValidationError("TrigPolynomial: dimension mismatch in multiply");
    const int d = f.dim_;

    // Work in the complex representation c(lambda) e^{i lambda.y} with
    // c(-lambda) = conj(c(lambda)), accumulating on canonical keys only.
    using Key = std::vector<double>;
    std::map<Key, std::complex<double>> acc;
    double constant = 0.0;

    auto accumulate = [&](Key key, std::complex<double> c) {
        double flip = 1.0;
        bool nonzero = false;
        for (double v : key) {
            if (v > 0.0) { nonzero = true; break; }
            if (v < 0.0) { nonzero = true; flip = -1.0; break; }
        }
        if (!nonzero) { constant += c.real(); return; }
        if (flip < 0.0) {
            for (double& v : key) v = -v;
            c = std::conj(c);
        }
        acc[std::move(key)] += c;
    };

    // Each real term contributes exponentials at +/-lambda with
    // c(+lambda) = (a - i b)/2.
    struct Exp { Key freq; std::complex<double> c; };
    auto exps = [d](const TrigPolynomial& p) {
        std::vector<Exp> out;
        out.push_back({Key(d, 0.0), {p.constant_, 0.0}});
        for (const Term& t : p.terms_) {
            std::complex<double> c(0.5 * t.cos_coef, -0.5 * t.sin_coef);
            out.push_back({t.freq, c});
            Key neg = t.freq;
            for (double& v : neg) v = -v;
            out.push_back({std::move(neg), std::conj(c)});
        }
        return out;
    };

    for (const Exp& ef : exps(f))
        for (const Exp& eg : exps(g)) {
            Key sum(d);
            for (int i = 0; i < d; ++i) sum[i] = ef.freq[i] + eg.freq[i];
            accumulate(std::move(sum), ef.c * eg.c);
        }

    // Both members of a +/- mirror pair fold onto the same canonical key, so
    // acc already holds 2 c(lambda); real coefficients are a = 2 Re c(lambda),
    // b = -2 Im c(lambda), i.e. the accumulator's parts verbatim.
    TrigPolynomial out(d, constant);
    for (const auto& [freq, c] : acc)
        out.add_term(freq, c.real(), -c.imag());
    return out;
}

std::string TrigPolynomial::serialize() const {
    char buf[64];
    std::string out;
    std::snprintf(buf, sizeof buf, "%d; %.17g\n", dim_, constant_);
    out += buf;
    for (const Term& t : terms_) {
        for (int i = 0; i < dim_; ++i) {
            std::snprintf(buf, sizeof buf, i ? " %.17g" : "%.17g", t.freq[i]);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "; %.17g; %.17g\n", t.cos_coef, t.sin_coef);
        out += buf;
    }
    return out;
}

TrigPolynomial TrigPolynomial::deserialize(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("TrigPolynomial: empty serialization");

    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t semi = s.find(';', pos);
            fields.push_back(s.substr(pos, semi == std::string::npos ? semi : semi - pos));
            if (semi == std::string::npos) break;
            pos = semi + 1;
        }
        return fields;
    };

    auto head = split(line);
    if (head.size() != 2) throw ValidationError("TrigPolynomial: malformed header line");
    const int d = std::stoi(head[0]);
    TrigPolynomial out(d, std::stod(head[1]));

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != 3) throw ValidationError("TrigPolynomial: malformed term line");
        std::istringstream fs(fields[0]);
        std::vector<double> freq(d);
        for (int i = 0; i < d; ++i)
            if (!(fs >> freq[i])) throw ValidationError("TrigPolynomial: bad frequency record");
        out.add_term(freq, std::stod(fields[1]), std::stod(fields[2]));
    }
    return out;
}

void TrigPolynomial::sort_terms() {
    std::sort(terms_.begin(), terms_.end(),
              [](const Term& a, const Term& b) { return freq_less(a.freq, b.freq); });
}

} // namespace homog
