#pragma once

// Gauss-Legendre quadrature on [-1,1] and its tensor product on [-1,1]^2.
// A rule with `order` points per direction integrates polynomials of degree
// <= 2*order - 1 in each variable exactly.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace strictbounds {

struct QuadRule {
    int dim = 1;
    std::vector<double> x;  // abscissae (first coordinate)
    std::vector<double> y;  // second coordinate (dim == 2 only, else zeros)
    std::vector<double> w;  // weights; they sum to 2 (dim 1) or 4 (dim 2)

    std::size_t size() const { return w.size(); }
};

namespace detail {

// Nodes/weights by Newton iteration on the Legendre recurrence; nodes are
// symmetrized so the rule is exactly even about the origin.
inline void legendre_nodes(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double xi = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = xi;
            if (n == 1) { p1 = xi; }
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            const double pn = (n == 1) ? xi : p1;
            const double pm = (n == 1) ? 1.0 : p0;
            dp = static_cast<double>(n) * (xi * pn - pm) / (xi * xi - 1.0);
            const double dx = pn / dp;
            xi -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
        x[static_cast<std::size_t>(i)] = -xi;
        x[static_cast<std::size_t>(n - 1 - i)] = xi;
        w[static_cast<std::size_t>(i)] = wi;
        w[static_cast<std::size_t>(n - 1 - i)] = wi;
    }
    if (n % 2 == 1) x[static_cast<std::size_t>(n / 2)] = 0.0;
}

}  // namespace detail

inline QuadRule gauss_rule(int order, int dim) {
    if (order < 1 || order > 30) throw std::invalid_argument("gauss_rule: order must be in [1,30]");
    if (dim != 1 && dim != 2) throw std::invalid_argument("gauss_rule: dim must be 1 or 2");
    std::vector<double> gx, gw;
    detail::legendre_nodes(order, gx, gw);

    QuadRule r;
    r.dim = dim;
    if (dim == 1) {
        r.x = gx;
        r.y.assign(gx.size(), 0.0);
        r.w = gw;
    } else {
        r.x.reserve(gx.size() * gx.size());
        r.y.reserve(gx.size() * gx.size());
        r.w.reserve(gx.size() * gx.size());
        for (std::size_t j = 0; j < gx.size(); ++j)
            for (std::size_t i = 0; i < gx.size(); ++i) {
                r.x.push_back(gx[i]);
                r.y.push_back(gx[j]);
                r.w.push_back(gw[i] * gw[j]);
            }
    }
    return r;
}

// Convenience: integrate f over [a,b] with an `order`-point rule.
template <class F>
double gauss_integrate(const F& f, double a, double b, int order) {
    const QuadRule r = gauss_rule(order, 1);
    const double mid = 0.5 * (a + b), hl = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * f(mid + hl * r.x[i]);
    return s * hl;
}

// Convenience: integrate f over [0,hx] x [0,hy] with an order x order rule.
template <class F>
double gauss_integrate_cell(const F& f, double hx, double hy, int order) {
    const QuadRule r = gauss_rule(order, 2);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i)
        s += r.w[i] * f(0.5 * hx * (1.0 + r.x[i]), 0.5 * hy * (1.0 + r.y[i]));
    return s * 0.25 * hx * hy;
}

}  // namespace strictbounds
