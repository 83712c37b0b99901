#pragma once

// Dense polynomial helpers used throughout the toolkit:
//  - Poly1: univariate polynomials (ascending coefficients) for beam fields,
//    including exact integration of rational expressions poly/EI where the
//    bending-stiffness profile EI is constant, linear, or quadratic.
//  - Poly2: bivariate tensor-monomial polynomials for fluxes on quadrilateral
//    cells (coefficients c(i,j) multiply x^i y^j in cell-local coordinates).

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace strictbounds {

class Poly1 {
public:
    Poly1() : c_(1, 0.0) {}
    explicit Poly1(std::vector<double> coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) c_.assign(1, 0.0);
    }
    static Poly1 constant(double v) { return Poly1(std::vector<double>{v}); }

    int degree() const { return static_cast<int>(c_.size()) - 1; }
    double coeff(int i) const {
        return (i >= 0 && i < static_cast<int>(c_.size())) ? c_[static_cast<std::size_t>(i)] : 0.0;
    }
    const std::vector<double>& coeffs() const { return c_; }

    double eval(double s) const {
        double v = 0.0;
        for (std::size_t i = c_.size(); i-- > 0;) v = v * s + c_[i];
        return v;
    }

    Poly1 derivative() const {
        if (c_.size() <= 1) return Poly1();
        std::vector<double> d(c_.size() - 1);
        for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
        return Poly1(std::move(d));
    }

    Poly1 antiderivative() const {
        std::vector<double> a(c_.size() + 1, 0.0);
        for (std::size_t i = 0; i < c_.size(); ++i) a[i + 1] = c_[i] / static_cast<double>(i + 1);
        return Poly1(std::move(a));
    }

    double integrate(double a, double b) const {
        Poly1 A = antiderivative();
        return A.eval(b) - A.eval(a);
    }

    // p(s + s0): shift of the argument, exact binomial expansion.
    Poly1 shifted(double s0) const {
        const int n = degree();
        std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
        for (int k = n; k >= 0; --k) {
            // Horner-like: out <- out * (s + s0) + c_k, tracked on coefficients.
            for (int i = n; i >= 1; --i) out[static_cast<std::size_t>(i)] =
                out[static_cast<std::size_t>(i - 1)] + s0 * out[static_cast<std::size_t>(i)];
            out[0] = s0 * out[0] + c_[static_cast<std::size_t>(k)];
        }
        return Poly1(std::move(out));
    }

    Poly1 operator+(const Poly1& o) const {
        std::vector<double> r(std::max(c_.size(), o.c_.size()), 0.0);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = coeff(static_cast<int>(i)) + o.coeff(static_cast<int>(i));
        return Poly1(std::move(r));
    }
    Poly1 operator-(const Poly1& o) const {
        std::vector<double> r(std::max(c_.size(), o.c_.size()), 0.0);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = coeff(static_cast<int>(i)) - o.coeff(static_cast<int>(i));
        return Poly1(std::move(r));
    }
    Poly1 operator*(const Poly1& o) const {
        std::vector<double> r(c_.size() + o.c_.size() - 1, 0.0);
        for (std::size_t i = 0; i < c_.size(); ++i)
            for (std::size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
        return Poly1(std::move(r));
    }
    Poly1 operator*(double a) const {
        std::vector<double> r(c_);
        for (double& v : r) v *= a;
        return Poly1(std::move(r));
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (double v : c_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::vector<double> c_;  // c_[i] multiplies s^i
};

inline Poly1 operator*(double a, const Poly1& p) { return p * a; }

namespace detail {

// Polynomial long division: num = quot * den + rem with deg(rem) < deg(den).
inline void poly_divmod(const Poly1& num, const Poly1& den, Poly1& quot, Poly1& rem) {
    const int dn = num.degree();
    const int dd = den.degree();
    std::vector<double> r(num.coeffs());
    const double lead = den.coeff(dd);
    if (lead == 0.0) throw std::invalid_argument("poly_divmod: zero leading coefficient");
    if (dn < dd) {
        quot = Poly1();
        rem = num;
        return;
    }
    std::vector<double> q(static_cast<std::size_t>(dn - dd) + 1, 0.0);
    for (int k = dn - dd; k >= 0; --k) {
        const double f = r[static_cast<std::size_t>(k + dd)] / lead;
        q[static_cast<std::size_t>(k)] = f;
        for (int j = 0; j <= dd; ++j) r[static_cast<std::size_t>(k + j)] -= f * den.coeff(j);
    }
    r.resize(static_cast<std::size_t>(std::max(dd, 1)));
    quot = Poly1(std::move(q));
    rem = Poly1(std::move(r));
}

// Adaptive Gauss on [a,b] to ~1e-14 relative: 7-point rule compared against
// the same rule on both halves, bisecting where they disagree.
template <class F>
double adaptive_gauss(const F& f, double a, double b, double tol_abs, int depth = 0) {
    static const double gx[7] = {-0.9491079123427585, -0.7415311855993945, -0.4058451513773972,
                                 0.0,
                                 0.4058451513773972,  0.7415311855993945,  0.9491079123427585};
    static const double gw[7] = {0.1294849661688697, 0.2797053914892766, 0.3818300505051189,
                                 0.4179591836734694,
                                 0.3818300505051189, 0.2797053914892766, 0.1294849661688697};
    auto rule = [&](double lo, double hi) {
        const double mid = 0.5 * (lo + hi), hl = 0.5 * (hi - lo);
        double s = 0.0;
        for (int i = 0; i < 7; ++i) s += gw[i] * f(mid + hl * gx[i]);
        return s * hl;
    };
    const double whole = rule(a, b);
    const double m = 0.5 * (a + b);
    const double split = rule(a, m) + rule(m, b);
    if (std::abs(split - whole) <= tol_abs || depth > 48) return split;
    return adaptive_gauss(f, a, m, 0.5 * tol_abs, depth + 1) +
           adaptive_gauss(f, m, b, 0.5 * tol_abs, depth + 1);
}

}  // namespace detail

// Exact integral of num(s)/den(s) over [a,b] for den of degree <= 2 that is
// positive on [a,b] (the shape every stiffness profile here takes). Degree 2
// denominators are handled through polynomial division plus the closed-form
// antiderivatives of (r0 + r1 s)/den; the discriminant branch at zero (double
// root, e.g. the (1+s)^2 column profile) is selected with a relative guard so
// that a cancellation-level discriminant never enters the atan/log formulas.
// Denominators of higher degree fall back to adaptive quadrature at 1e-14.
inline double integrate_ratio(const Poly1& num, const Poly1& den, double a, double b) {
    if (b == a) return 0.0;
    int dd = den.degree();
    while (dd > 0 && den.coeff(dd) == 0.0) --dd;

    if (dd == 0) {
        const double c = den.coeff(0);
        if (c == 0.0) throw std::invalid_argument("integrate_ratio: zero denominator");
        return num.integrate(a, b) / c;
    }

    if (dd > 2) {
        auto f = [&](double s) { return num.eval(s) / den.eval(s); };
        const double scale = std::abs(num.integrate(a, b)) + num.max_abs_coeff() * std::abs(b - a) + 1.0;
        return detail::adaptive_gauss(f, a, b, 1e-14 * scale);
    }

    // the closed forms below assume a positive denominator on [a,b]; for a
    // quadratic, endpoint positivity plus the interior vertex check is exact
    {
        bool pos = den.eval(a) > 0.0 && den.eval(b) > 0.0;
        if (pos && dd == 2 && den.coeff(2) > 0.0) {
            const double sv = -den.coeff(1) / (2.0 * den.coeff(2));
            if (sv > std::min(a, b) && sv < std::max(a, b)) pos = den.eval(sv) > 0.0;
        }
        if (!pos)
            throw std::invalid_argument(
                "integrate_ratio: denominator must be positive on the interval");
    }

    Poly1 quot, rem;
    detail::poly_divmod(num, Poly1(std::vector<double>(den.coeffs().begin(),
                                                       den.coeffs().begin() + dd + 1)),
                        quot, rem);
    double result = quot.integrate(a, b);

    if (dd == 1) {
        const double c0 = den.coeff(0), c1 = den.coeff(1);
        const double r0 = rem.coeff(0);
        result += (r0 / c1) * std::log((c1 * b + c0) / (c1 * a + c0));
        return result;
    }

    const double c0 = den.coeff(0), c1 = den.coeff(1), c2 = den.coeff(2);
    const double r0 = rem.coeff(0), r1 = rem.coeff(1);
    // log part: (r1/(2 c2)) * ln(den)
    result += (r1 / (2.0 * c2)) * std::log(den.eval(b) / den.eval(a));
    const double k0 = r0 - r1 * c1 / (2.0 * c2);

    const double disc = c1 * c1 - 4.0 * c2 * c0;
    const double disc_scale = c1 * c1 + 4.0 * std::abs(c2 * c0);
    double i0;  // integral of ds/den
    if (std::abs(disc) <= 1e-9 * disc_scale) {
        // double root: den = c2 (s + c1/(2 c2))^2
        const double r = c1 / (2.0 * c2);
        i0 = (1.0 / c2) * (1.0 / (a + r) - 1.0 / (b + r));
    } else if (disc < 0.0) {
        const double q = std::sqrt(-disc);
        i0 = (2.0 / q) * (std::atan((2.0 * c2 * b + c1) / q) - std::atan((2.0 * c2 * a + c1) / q));
    } else {
        const double q = std::sqrt(disc);
        auto g = [&](double s) {
            return std::log(std::abs((2.0 * c2 * s + c1 - q) / (2.0 * c2 * s + c1 + q)));
        };
        i0 = (g(b) - g(a)) / q;
    }
    result += k0 * i0;
    return result;
}

// Bivariate polynomial sum_{i,j} c(i,j) x^i y^j on cell-local coordinates.
class Poly2 {
public:
    Poly2() : c_(Eigen::MatrixXd::Zero(1, 1)) {}
    explicit Poly2(Eigen::MatrixXd c) : c_(std::move(c)) {
        if (c_.size() == 0) c_ = Eigen::MatrixXd::Zero(1, 1);
    }
    static Poly2 constant(double v) {
        Eigen::MatrixXd m(1, 1);
        m(0, 0) = v;
        return Poly2(m);
    }

    const Eigen::MatrixXd& coeffs() const { return c_; }
    int deg_x() const { return static_cast<int>(c_.rows()) - 1; }
    int deg_y() const { return static_cast<int>(c_.cols()) - 1; }

    double eval(double x, double y) const {
        double v = 0.0;
        for (Eigen::Index i = c_.rows(); i-- > 0;) {
            double row = 0.0;
            for (Eigen::Index j = c_.cols(); j-- > 0;) row = row * y + c_(i, j);
            v = v * x + row;
        }
        return v;
    }

    Poly2 dx() const {
        if (c_.rows() <= 1) return Poly2();
        Eigen::MatrixXd d(c_.rows() - 1, c_.cols());
        for (Eigen::Index i = 1; i < c_.rows(); ++i) d.row(i - 1) = static_cast<double>(i) * c_.row(i);
        return Poly2(std::move(d));
    }
    Poly2 dy() const {
        if (c_.cols() <= 1) return Poly2();
        Eigen::MatrixXd d(c_.rows(), c_.cols() - 1);
        for (Eigen::Index j = 1; j < c_.cols(); ++j) d.col(j - 1) = static_cast<double>(j) * c_.col(j);
        return Poly2(std::move(d));
    }

    Poly2 operator+(const Poly2& o) const {
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(std::max(c_.rows(), o.c_.rows()),
                                                  std::max(c_.cols(), o.c_.cols()));
        r.topLeftCorner(c_.rows(), c_.cols()) = c_;
        r.topLeftCorner(o.c_.rows(), o.c_.cols()) += o.c_;
        return Poly2(std::move(r));
    }
    Poly2 operator-(const Poly2& o) const { return *this + (o * -1.0); }
    Poly2 operator*(double a) const { return Poly2(Eigen::MatrixXd(a * c_)); }
    Poly2 operator*(const Poly2& o) const {
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(c_.rows() + o.c_.rows() - 1,
                                                  c_.cols() + o.c_.cols() - 1);
        for (Eigen::Index i = 0; i < c_.rows(); ++i)
            for (Eigen::Index j = 0; j < c_.cols(); ++j) {
                if (c_(i, j) == 0.0) continue;
                r.block(i, j, o.c_.rows(), o.c_.cols()) += c_(i, j) * o.c_;
            }
        return Poly2(std::move(r));
    }

    // integral over the rectangle [0,hx] x [0,hy]
    double integrate_cell(double hx, double hy) const {
        double v = 0.0;
        double px = hx;
        for (Eigen::Index i = 0; i < c_.rows(); ++i) {
            double py = hy;
            for (Eigen::Index j = 0; j < c_.cols(); ++j) {
                v += c_(i, j) * px * py / (static_cast<double>(i + 1) * static_cast<double>(j + 1));
                py *= hy;
            }
            px *= hx;
        }
        return v;
    }

    double max_abs_coeff() const { return c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0; }

private:
    Eigen::MatrixXd c_;
};

inline Poly2 operator*(double a, const Poly2& p) { return p * a; }

}  // namespace strictbounds
