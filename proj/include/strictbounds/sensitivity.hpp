#pragma once

// Dual-field solves of the coupled sensitivity formulation. For the scaled
// sensitivity V = xi * du/dbeta the block system reads
//
//   K u = f                      K (V) = xi f' - xi K' u        (primal pair)
//   K W = g / xi                 K w = -xi K' W                 (adjoint pair)
//
// so one factorization of K serves all four solves. The quantity of interest
// is the parameter derivative J = g . V / xi, and the adjoint-state identity
// J = (xi W) . (f' - K' u) provides an independent evaluation of the same
// number. The scaling parameter xi must satisfy 0 < xi < xi_max, where xi_max
// is the coercivity threshold of the coupled (non-symmetric) form.

#include <cmath>
#include <limits>
#include <stdexcept>

#include "forms.hpp"
#include "linalg.hpp"

namespace strictbounds {

enum class PairRole { primal, adjoint };

struct FieldPair {
    Vector first;   // u_h (primal) or w_h (adjoint)
    Vector second;  // V_h = xi u'_h (primal) or W_h (adjoint)
    double xi;
    PairRole role;
    double solver_residual = 0.0;  // max achieved relative residual
};

struct XiValidation {
    double alpha;   // coercivity constant of the symmetric part
    double psi;     // max coefficient-derivative magnitude ratio
    double xi_max;  // 2 * alpha / psi (infinity when psi == 0)
    bool ok;        // 0 < xi < xi_max
};

// Model-wise interpretation: for the frame, alpha = 1 and psi is the largest
// EI'/EI ratio over the members (sampled; the ratio is constant within each
// member), so xi_max = 2 / max(EI'/EI). For the membrane, alpha is the
// diffusion coefficient a and psi = |a'|, so xi_max = 2 a / |a'|.
inline XiValidation validate_xi(const ParamProblem& p) {
    XiValidation v{1.0, 0.0, std::numeric_limits<double>::infinity(), false};
    if (p.model == Model::beam_frame) {
        for (int m = 0; m < p.beam().mesh.n_members(); ++m)
            v.psi = std::max(v.psi, std::abs(member_stiffness_ratio(p, m)));
    } else {
        v.alpha = p.membrane().a;
        v.psi = std::abs(p.membrane().a_prime);
        if (v.alpha <= 0.0) throw std::invalid_argument("validate_xi: nonpositive diffusion");
    }
    if (v.psi > 0.0) v.xi_max = 2.0 * v.alpha / v.psi;
    v.ok = p.xi > 0.0 && p.xi < v.xi_max;
    return v;
}

inline void require_valid_xi(const ParamProblem& p) {
    const XiValidation v = validate_xi(p);
    if (!v.ok)
        throw std::invalid_argument("scaling parameter xi outside the admissible range (0, xi_max)");
}

inline FieldPair solve_primal_pair(const ParamProblem& p, const AssembledSystem& sys,
                                   double rel_tol = 1e-12) {
    require_valid_xi(p);
    double r1 = 0.0, r2 = 0.0;
    Vector u = sys.fact.solve(sys.f, rel_tol, &r1);
    Vector rhs = p.xi * (sys.fp - sys.Kp.apply(u));
    Vector V = sys.fact.solve(rhs, rel_tol, &r2);
    return FieldPair{std::move(u), std::move(V), p.xi, PairRole::primal, std::max(r1, r2)};
}

inline FieldPair solve_adjoint_pair(const ParamProblem& p, const AssembledSystem& sys,
                                    double rel_tol = 1e-12) {
    require_valid_xi(p);
    double r1 = 0.0, r2 = 0.0;
    Vector W = sys.fact.solve(sys.g / p.xi, rel_tol, &r1);
    Vector rhs = -p.xi * sys.Kp.apply(W);
    Vector w = sys.fact.solve(rhs, rel_tol, &r2);
    return FieldPair{std::move(w), std::move(W), p.xi, PairRole::adjoint, std::max(r1, r2)};
}

// J(u'_h) = g . V / xi evaluated from the primal pair.
inline double evaluate_qoi(const AssembledSystem& sys, const FieldPair& pair) {
    if (pair.role != PairRole::primal)
        throw std::invalid_argument("evaluate_qoi: expects the primal pair");
    return sys.g.dot(pair.second) / pair.xi;
}

// Adjoint-state evaluation of the same derivative: (xi W) . (f' - K' u).
inline double adjoint_state_value(const AssembledSystem& sys, const FieldPair& primal,
                                  const FieldPair& adjoint) {
    if (primal.role != PairRole::primal || adjoint.role != PairRole::adjoint)
        throw std::invalid_argument("adjoint_state_value: pass (primal, adjoint) pairs");
    const Vector residual = sys.fp - sys.Kp.apply(primal.first);
    return adjoint.xi * adjoint.second.dot(residual);
}

}  // namespace strictbounds
