#pragma once

// Shared test oracles, written independently of the library under test.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace oracle {

// Dense Gaussian elimination with partial pivoting, hand-rolled so library
// factorizations can be checked against an independent implementation.
inline Eigen::VectorXd dense_solve(Eigen::MatrixXd A, Eigen::VectorXd b) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n || b.size() != n) throw std::invalid_argument("dense_solve: shape mismatch");
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(A(k, k));
        for (int i = k + 1; i < n; ++i)
            if (std::abs(A(i, k)) > best) {
                best = std::abs(A(i, k));
                piv = i;
            }
        if (best == 0.0) throw std::runtime_error("dense_solve: singular matrix");
        if (piv != k) {
            A.row(piv).swap(A.row(k));
            std::swap(b(piv), b(k));
        }
        for (int i = k + 1; i < n; ++i) {
            const double m = A(i, k) / A(k, k);
            if (m == 0.0) continue;
            for (int j = k + 1; j < n; ++j) A(i, j) -= m * A(k, j);
            A(i, k) = 0.0;
            b(i) -= m * b(k);
        }
    }
    Eigen::VectorXd x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b(i);
        for (int j = i + 1; j < n; ++j) s -= A(i, j) * x(j);
        x(i) = s / A(i, i);
    }
    return x;
}

// Closed-form reference values for the portal frame benchmark at beta = (1,1),
// from an exact symbolic solution of the idealized model (computed once with
// a computer algebra system and frozen here to 20 digits).
//
//   sway(beta1)   = (-6 b1 ln^2(2) + 3 b1 - 4 ln 2 + 3) / (2 (3 b1 + 1))
//   kSway         = sway(1) = 3/4 - (3/4) ln^2 2 - (1/2) ln 2
constexpr double kSway = 0.043086649281376276791;     // sway at beta = (1,1)
constexpr double kRotB = 0.044468735332762767807;     // joint rotation at B (clockwise+)
constexpr double kSwayD1 = -0.017654747399683276094;  // d sway / d beta1
constexpr double kRotBD1 = -0.029664047869407966818;  // d rotB / d beta1
constexpr double kRotBD2 = 0.012224265805511862969;   // d rotB / d beta2

inline double sway_exact(double b1) {
    const double l2 = std::log(2.0);
    return (-6.0 * b1 * l2 * l2 + 3.0 * b1 - 4.0 * l2 + 3.0) / (2.0 * (3.0 * b1 + 1.0));
}

// 6-point Gauss-Legendre rule on [-1,1], nodes and weights from standard
// tables (independent of the library's Newton-iteration construction).
inline const double kG6x[6] = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                               0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
inline const double kG6w[6] = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                               0.4679139345726910, 0.3607615730481386, 0.1713244923791704};

// integral of f over [a,b] with the 6-point rule (exact for degree <= 11)
template <class F>
inline double gauss6(F&& f, double a, double b) {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) {
        const double x = 0.5 * (a + b) + 0.5 * (b - a) * kG6x[i];
        s += kG6w[i] * f(x);
    }
    return 0.5 * (b - a) * s;
}

}  // namespace oracle
