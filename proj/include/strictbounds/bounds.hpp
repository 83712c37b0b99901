#pragma once

// Guaranteed two-sided bounds on parameter derivatives of quantities of
// interest. The coupled constitutive-error estimator of an admissible
// residual pair (s1, s2) is
//
//   E^2 = ||s1||_K^2 + ||s2||_K^2 + xi * (K'/K) (s1, s2)_K ,
//
// where ||.||_K is the complementary energy norm (integrals of squares over
// the stiffness) and K'/K is the constant stiffness-derivative ratio. For
// 0 < xi < xi_max the coupling term is dominated and E^2 >= 0. With primal
// and adjoint estimators E_p, E_d and the coupled cross form A(p, d), the
// derivative J of the quantity of interest obeys
//
//   J_h + corr - E_p E_d / 2  <=  J  <=  J_h + corr + E_p E_d / 2 ,
//   corr = A(p, d) / 2 ,
//
// so the bound gap is exactly E_p * E_d. When the operator does not depend
// on the parameter (K' = 0) the derivative problem decouples, the scaling
// parameter cancels, and the same machinery reduces to the classical
// symmetric bound applied to the derivative problem; sensitivity_bounds
// takes that reduction automatically.

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "equilibration.hpp"
#include "forms.hpp"
#include "sensitivity.hpp"

namespace strictbounds {

struct EstimatorValue {
    double value = 0.0;                      // E = sqrt(max(E^2, 0))
    std::array<double, 3> parts = {0, 0, 0};  // first-field, second-field, coupling contributions
};

namespace detail {

// complementary-energy inner product of two moment fields: sum over elements
// of the integral of (ma * mb) / EI
inline double beam_energy_product(const ParamProblem& p, const std::vector<Poly1>& ma,
                                  const std::vector<Poly1>& mb, bool weight_by_ratio) {
    const Mesh1D& mesh = p.beam().mesh;
    double v = 0.0;
    for (int m = 0; m < mesh.n_members(); ++m) {
        const double ratio = weight_by_ratio ? member_stiffness_ratio(p, m) : 1.0;
        if (ratio == 0.0) continue;
        const double he = mesh.element_length(m);
        for (int e = 0; e < mesh.n_per_member(); ++e) {
            const int idx = mesh.element_index(m, e);
            const auto [ei, eip] = beam_element_stiffness(p, m, e);
            v += ratio * integrate_ratio(ma[static_cast<std::size_t>(idx)] * mb[static_cast<std::size_t>(idx)], ei, 0.0, he);
        }
    }
    return v;
}

// membrane analogue: flux product / a plus reaction product / k
inline double quad_energy_product(const ParamProblem& p, const StressField& a,
                                  const StressField& b, bool weight_by_ratio) {
    const auto& d = p.membrane();
    const double h = d.mesh.h();
    const double wa = (weight_by_ratio ? d.a_prime / d.a : 1.0) / d.a;
    const double wk = (weight_by_ratio ? (d.k != 0.0 ? d.k_prime / d.k : 0.0) : 1.0) /
                      (d.k != 0.0 ? d.k : 1.0);
    double v = 0.0;
    for (int c = 0; c < d.mesh.n_cells(); ++c) {
        const std::size_t cc = static_cast<std::size_t>(c);
        if (wa != 0.0)
            v += wa * ((a.flux_x[cc] * b.flux_x[cc]) + (a.flux_y[cc] * b.flux_y[cc])).integrate_cell(h, h);
        if (wk != 0.0 && !a.reaction.empty() && !b.reaction.empty())
            v += wk * (a.reaction[cc] * b.reaction[cc]).integrate_cell(h, h);
    }
    return v;
}

inline double energy_product(const ParamProblem& p, const StressField& a, const StressField& b,
                             bool weight_by_ratio = false) {
    if (p.model == Model::beam_frame) return beam_energy_product(p, a.moment, b.moment, weight_by_ratio);
    return quad_energy_product(p, a, b, weight_by_ratio);
}

}  // namespace detail

// Coupled estimator of an admissible residual pair. The negativity guard
// triggers only on genuine failures (roundoff-level negatives are clamped).
inline EstimatorValue cre_estimator(const ParamProblem& p, const AdmissibleResidualPair& pair) {
    EstimatorValue ev;
    ev.parts[0] = detail::energy_product(p, pair.first, pair.first, false);
    ev.parts[1] = detail::energy_product(p, pair.second, pair.second, false);
    ev.parts[2] = pair.xi * detail::energy_product(p, pair.first, pair.second, true);
    const double e2 = ev.parts[0] + ev.parts[1] + ev.parts[2];
    const double scale = std::abs(ev.parts[0]) + std::abs(ev.parts[1]) + std::abs(ev.parts[2]);
    if (e2 < -1e-14 * std::max(scale, 1e-300))
        throw std::runtime_error("cre_estimator: negative squared estimator (invalid pair or xi)");
    ev.value = std::sqrt(std::max(e2, 0.0));
    return ev;
}

// Coupled cross form A(pair_p, pair_d) between the primal and adjoint
// admissible residual pairs (both at the same scaling parameter).
inline double cross_term(const ParamProblem& p, const AdmissibleResidualPair& pp,
                         const AdmissibleResidualPair& pd) {
    if (pp.xi != pd.xi)
        throw std::invalid_argument("cross_term: pairs must share the scaling parameter");
    const double direct = detail::energy_product(p, pp.first, pd.first, false) +
                          detail::energy_product(p, pp.second, pd.second, false);
    const double coupling = detail::energy_product(p, pp.first, pd.second, true) +
                            detail::energy_product(p, pd.first, pp.second, true);
    return direct + 0.5 * pp.xi * coupling;
}

// kappa = sqrt(e_d / e_p) balances the two estimators in the bound product;
// returns +infinity as the sentinel when e_p vanishes (the bounds collapse).
inline double optimal_kappa(double e_p, double e_d) {
    if (e_p < 0.0 || e_d < 0.0) throw std::invalid_argument("optimal_kappa: negative estimator");
    if (e_p == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(e_d / e_p);
}

struct BoundsReport {
    std::string case_name;
    double h = 0.0;
    double xi = 0.0;
    double j_h = 0.0;        // finite element value of the derivative
    double correction = 0.0;  // half the coupled cross form
    double half_gap = 0.0;    // e_primal * e_dual / 2
    double lower = 0.0;
    double upper = 0.0;
    double gap = 0.0;  // e_primal * e_dual (the exact bound width)
    double kappa = 0.0;
    double e_primal = 0.0;
    double e_dual = 0.0;
    double solver_residual = 0.0;
    double equil_residual = 0.0;
};

// Bounds on the derivative from the coupled pairs. When the operator carries
// no parameter dependence the decoupled (symmetric) reduction is used: only
// the second-slot residuals enter, and the scaling parameter cancels.
inline BoundsReport sensitivity_bounds(const ParamProblem& p, const AssembledSystem& sys,
                                       double j_h, const AdmissibleResidualPair& pp,
                                       const AdmissibleResidualPair& pd) {
    if (pp.role != PairRole::primal || pd.role != PairRole::adjoint)
        throw std::invalid_argument("sensitivity_bounds: pass (primal, adjoint) pairs");
    BoundsReport r;
    r.xi = pp.xi;
    r.j_h = j_h;
    const bool decoupled = sys.Kp.max_abs() == 0.0;
    if (decoupled) {
        const double e2p = detail::energy_product(p, pp.second, pp.second, false);
        const double e2d = detail::energy_product(p, pd.second, pd.second, false);
        r.e_primal = std::sqrt(std::max(e2p, 0.0)) / pp.xi;
        r.e_dual = std::sqrt(std::max(e2d, 0.0)) * pd.xi;
        r.correction = 0.5 * detail::energy_product(p, pp.second, pd.second, false);
    } else {
        const EstimatorValue ep = cre_estimator(p, pp);
        const EstimatorValue ed = cre_estimator(p, pd);
        r.e_primal = ep.value;
        r.e_dual = ed.value;
        r.correction = 0.5 * cross_term(p, pp, pd);
    }
    r.kappa = optimal_kappa(r.e_primal, r.e_dual);
    r.half_gap = 0.5 * r.e_primal * r.e_dual;
    r.gap = r.e_primal * r.e_dual;
    r.lower = j_h + r.correction - r.half_gap;
    r.upper = j_h + r.correction + r.half_gap;
    r.equil_residual = std::max(pp.equil_residual, pd.equil_residual);
    return r;
}

// Classical symmetric two-sided bound on Q(u) from a primal field with an
// admissible stress and a dual (extraction) field with an admissible stress:
//   |Q(u) - Q(u_h) - corr| <= e_primal * e_dual / 2.
inline BoundsReport symmetric_bounds(const ParamProblem& p, const Vector& u_h,
                                     const StressField& sigma_hat, const Vector& dual_h,
                                     const StressField& tau_hat, double q_h) {
    StressField sres, tres;
    sres.model = tres.model = p.model;
    if (p.model == Model::beam_frame) {
        const Mesh1D& mesh = p.beam().mesh;
        sres.moment.resize(static_cast<std::size_t>(mesh.n_elements()));
        tres.moment.resize(static_cast<std::size_t>(mesh.n_elements()));
        for (int m = 0; m < mesh.n_members(); ++m)
            for (int e = 0; e < mesh.n_per_member(); ++e) {
                const int idx = mesh.element_index(m, e);
                const auto [ei, eip] = beam_element_stiffness(p, m, e);
                sres.moment[static_cast<std::size_t>(idx)] =
                    sigma_hat.moment[static_cast<std::size_t>(idx)] -
                    ei * detail::beam_second_derivative(mesh, u_h, m, e);
                tres.moment[static_cast<std::size_t>(idx)] =
                    tau_hat.moment[static_cast<std::size_t>(idx)] -
                    ei * detail::beam_second_derivative(mesh, dual_h, m, e);
            }
    } else {
        const auto& d = p.membrane();
        const double h = d.mesh.h();
        const auto basis = bilinear_basis(h);
        const int nc = d.mesh.n_cells();
        sres.flux_x.resize(static_cast<std::size_t>(nc));
        sres.flux_y.resize(static_cast<std::size_t>(nc));
        sres.reaction.resize(static_cast<std::size_t>(nc));
        tres.flux_x.resize(static_cast<std::size_t>(nc));
        tres.flux_y.resize(static_cast<std::size_t>(nc));
        tres.reaction.resize(static_cast<std::size_t>(nc));
        for (int c = 0; c < nc; ++c) {
            const std::size_t cc = static_cast<std::size_t>(c);
            const auto verts = d.mesh.cell_vertices(c);
            std::array<double, 4> va, vb;
            for (int t = 0; t < 4; ++t) {
                va[static_cast<std::size_t>(t)] = u_h[verts[static_cast<std::size_t>(t)]];
                vb[static_cast<std::size_t>(t)] = dual_h[verts[static_cast<std::size_t>(t)]];
            }
            const Poly2 fa = detail::bilinear_field(va, h);
            const Poly2 fb = detail::bilinear_field(vb, h);
            sres.flux_x[cc] = sigma_hat.flux_x[cc] - fa.dx() * d.a;
            sres.flux_y[cc] = sigma_hat.flux_y[cc] - fa.dy() * d.a;
            sres.reaction[cc] = sigma_hat.reaction.empty() ? Poly2() : sigma_hat.reaction[cc] - fa * d.k;
            tres.flux_x[cc] = tau_hat.flux_x[cc] - fb.dx() * d.a;
            tres.flux_y[cc] = tau_hat.flux_y[cc] - fb.dy() * d.a;
            tres.reaction[cc] = tau_hat.reaction.empty() ? Poly2() : tau_hat.reaction[cc] - fb * d.k;
        }
    }
    BoundsReport r;
    r.j_h = q_h;
    r.e_primal = std::sqrt(std::max(detail::energy_product(p, sres, sres, false), 0.0));
    r.e_dual = std::sqrt(std::max(detail::energy_product(p, tres, tres, false), 0.0));
    r.correction = 0.5 * detail::energy_product(p, sres, tres, false);
    r.kappa = optimal_kappa(r.e_primal, r.e_dual);
    r.half_gap = 0.5 * r.e_primal * r.e_dual;
    r.gap = r.e_primal * r.e_dual;
    r.lower = q_h + r.correction - r.half_gap;
    r.upper = q_h + r.correction + r.half_gap;
    return r;
}

}  // namespace strictbounds
