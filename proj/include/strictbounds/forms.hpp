#pragma once

// Parametrized problem definitions, element matrices, and global assembly for
// the two benchmark families:
//
//  - beam_frame: portal frame of Hermite beam elements. Column stiffness
//    EI(s) = (1 + s)^2 grows from each support toward the joint; the beam has
//    constant stiffness beta1. Loads: uniform transverse load beta2^2 on the
//    beam (downward positive) and a unit horizontal force at the sway
//    translation. Parameter derivatives follow the active parameter: beta1
//    scales the beam stiffness, beta2 scales the distributed load.
//
//  - membrane: reaction-diffusion on the unit square with free (natural)
//    boundary, bilinear elements, a(x) = beta1, k(x) = 1, unit load on the
//    centered square of half-width beta2. The beta2-derivative of the load is
//    a unit line source on the boundary of the load square.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "linalg.hpp"
#include "mesh.hpp"
#include "poly.hpp"
#include "quadrature.hpp"

namespace strictbounds {

enum class Model { beam_frame, membrane };
enum class ActiveParam { beta1, beta2 };
enum class OperatorKind { stiffness, stiffness_derivative };
enum class LoadKind { load, load_derivative };
enum class QoiKind { sway, rotation_b, region_average };

struct StiffnessProfile {
    Poly1 ei;        // bending stiffness along the member coordinate s in [0, l]
    Poly1 ei_prime;  // its derivative with respect to the active parameter
};

struct PointLoad {
    int dof;
    double value;
};

struct BeamFrameData {
    Mesh1D mesh;
    std::vector<StiffnessProfile> profiles;  // indexed by Member::profile
    std::vector<double> q;                   // uniform transverse load per member
    std::vector<double> q_prime;             // its parameter derivative
    std::vector<PointLoad> point_loads;
    std::vector<PointLoad> point_load_primes;
};

struct MembraneData {
    Mesh2D mesh;
    double a = 1.0, a_prime = 0.0;  // diffusion coefficient and derivative
    double k = 1.0, k_prime = 0.0;  // reaction coefficient and derivative
    double load_half_width = 0.125;
    bool load_derivative_active = false;  // active parameter is the half-width
    bool recovery_ready = true;           // load-square edges lie on mesh lines
};

struct ParamProblem {
    Model model;
    ActiveParam active;
    double beta1, beta2;
    double xi;
    std::variant<BeamFrameData, MembraneData> data;

    const BeamFrameData& beam() const { return std::get<BeamFrameData>(data); }
    const MembraneData& membrane() const { return std::get<MembraneData>(data); }

    int n_dofs() const {
        if (model == Model::beam_frame) return beam().mesh.n_dofs();
        return membrane().mesh.n_vertices();
    }

    // True when the strict-recovery pipeline may run (loads representable
    // cell-by-cell as polynomials).
    bool recovery_ready() const {
        return model == Model::beam_frame || membrane().recovery_ready;
    }
};

// ---------------------------------------------------------------------------
// problem factories
// ---------------------------------------------------------------------------

inline ParamProblem make_frame_problem(ActiveParam active, int n_per_member, double xi = 1.0,
                                       double beta1 = 1.0, double beta2 = 1.0) {
    BeamFrameData d{Mesh1D(FrameGeometry{1.0}, n_per_member), {}, {}, {}, {}, {}};
    // profile 0: columns, EI = (1+s)^2, parameter-independent
    // profile 1: beam, EI = beta1 (derivative 1 when beta1 is active)
    d.profiles.push_back({Poly1({1.0, 2.0, 1.0}), Poly1::constant(0.0)});
    d.profiles.push_back({Poly1::constant(beta1),
                          Poly1::constant(active == ActiveParam::beta1 ? 1.0 : 0.0)});
    d.q = {0.0, beta2 * beta2, 0.0};
    d.q_prime = {0.0, active == ActiveParam::beta2 ? 2.0 * beta2 : 0.0, 0.0};
    d.point_loads = {{d.mesh.sway_dof(), 1.0}};
    ParamProblem p{Model::beam_frame, active, beta1, beta2, xi, std::move(d)};
    return p;
}

inline ParamProblem make_membrane_problem(ActiveParam active, int n, double xi = 1.0,
                                          double beta1 = 1.0, double beta2 = 0.125) {
    if (!is_power_of_two(n) || n < 8)
        throw std::invalid_argument(
            "make_membrane_problem: centered load region requires n to be a power of two, n >= 8");
    MembraneData d{Mesh2D(n), beta1, active == ActiveParam::beta1 ? 1.0 : 0.0,
                   1.0, 0.0, beta2, active == ActiveParam::beta2, true};
    const double edge = (0.5 - beta2) * n;
    d.recovery_ready = std::abs(edge - std::round(edge)) <= 1e-9 * n;
    ParamProblem p{Model::membrane, active, beta1, beta2, xi, std::move(d)};
    return p;
}

// ---------------------------------------------------------------------------
// element matrices
// ---------------------------------------------------------------------------

struct ElementMatrices {
    Eigen::Matrix4d k = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d k_prime = Eigen::Matrix4d::Zero();
    Eigen::Vector4d f = Eigen::Vector4d::Zero();
    Eigen::Vector4d f_prime = Eigen::Vector4d::Zero();
};

// Second derivatives of the Hermite shape functions on [0,h], as polynomials
// in the local coordinate s. DOF order: (w_a, th_a, w_b, th_b).
inline std::array<Poly1, 4> hermite_second_derivatives(double h) {
    const double h2 = h * h, h3 = h2 * h;
    return {Poly1({-6.0 / h2, 12.0 / h3}), Poly1({-4.0 / h, 6.0 / h2}),
            Poly1({6.0 / h2, -12.0 / h3}), Poly1({-2.0 / h, 6.0 / h2})};
}

// Values of the Hermite shape functions at local coordinate s.
inline std::array<double, 4> hermite_values(double h, double s) {
    const double t = s / h;
    return {1.0 - 3.0 * t * t + 2.0 * t * t * t, h * (t - 2.0 * t * t + t * t * t),
            3.0 * t * t - 2.0 * t * t * t, h * (-t * t + t * t * t)};
}

// Bending element on [0,h] with stiffness polynomial ei (local coordinate)
// and uniform transverse load q; all integrals are exact polynomial ones.
inline ElementMatrices element_beam(const Poly1& ei, const Poly1& ei_prime, double h, double q,
                                    double q_prime) {
    ElementMatrices em;
    const auto b = hermite_second_derivatives(h);
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) {
            const Poly1 bb = b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
            em.k(i, j) = em.k(j, i) = (ei * bb).integrate(0.0, h);
            em.k_prime(i, j) = em.k_prime(j, i) = (ei_prime * bb).integrate(0.0, h);
        }
    const double h2 = h * h;
    em.f << q * h / 2.0, q * h2 / 12.0, q * h / 2.0, -q * h2 / 12.0;
    em.f_prime << q_prime * h / 2.0, q_prime * h2 / 12.0, q_prime * h / 2.0, -q_prime * h2 / 12.0;
    return em;
}

// Bilinear vertex basis on the square cell [0,h]^2, counter-clockwise from
// the lower-left corner (matching Mesh2D::cell_vertices).
inline std::array<Poly2, 4> bilinear_basis(double h) {
    const double ih = 1.0 / h;
    auto mk = [&](double c00, double c10, double c01, double c11) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
        m(0, 0) = c00;
        m(1, 0) = c10;
        m(0, 1) = c01;
        m(1, 1) = c11;
        return Poly2(m);
    };
    return {mk(1.0, -ih, -ih, ih * ih), mk(0.0, ih, 0.0, -ih * ih),
            mk(0.0, 0.0, 0.0, ih * ih), mk(0.0, 0.0, ih, -ih * ih)};
}

// Diffusion-reaction element on a square cell of side h:
// a * (grad,grad) + k * (mass); closed-form templates.
inline Eigen::Matrix4d element_quad(double a, double k, double h) {
    Eigen::Matrix4d S, M;
    S << 4, -1, -2, -1,
        -1, 4, -1, -2,
        -2, -1, 4, -1,
        -1, -2, -1, 4;
    S /= 6.0;
    M << 4, 2, 1, 2,
        2, 4, 2, 1,
        1, 2, 4, 2,
        2, 1, 2, 4;
    M *= h * h / 36.0;
    return a * S + k * M;
}

// ---------------------------------------------------------------------------
// global assembly
// ---------------------------------------------------------------------------

inline SymSparse assemble_operator(const ParamProblem& p, OperatorKind kind) {
    SymSparse K(p.n_dofs());
    if (p.model == Model::beam_frame) {
        const auto& d = p.beam();
        const Mesh1D& mesh = d.mesh;
        for (int m = 0; m < mesh.n_members(); ++m) {
            const auto& prof = d.profiles[static_cast<std::size_t>(mesh.member(m).profile)];
            const double he = mesh.element_length(m);
            for (int e = 0; e < mesh.n_per_member(); ++e) {
                const Poly1 ei = prof.ei.shifted(e * he);
                const Poly1 eip = prof.ei_prime.shifted(e * he);
                const ElementMatrices em = element_beam(ei, eip, he, 0.0, 0.0);
                const Eigen::Matrix4d& ke =
                    (kind == OperatorKind::stiffness) ? em.k : em.k_prime;
                const auto dofs = mesh.element_dofs(m, e);
                for (int i = 0; i < 4; ++i) {
                    if (dofs[static_cast<std::size_t>(i)] < 0) continue;
                    for (int j = 0; j <= i; ++j) {
                        if (dofs[static_cast<std::size_t>(j)] < 0) continue;
                        if (ke(i, j) != 0.0)
                            K.add(dofs[static_cast<std::size_t>(i)], dofs[static_cast<std::size_t>(j)], ke(i, j));
                    }
                }
            }
        }
    } else {
        const auto& d = p.membrane();
        const double a = (kind == OperatorKind::stiffness) ? d.a : d.a_prime;
        const double k = (kind == OperatorKind::stiffness) ? d.k : d.k_prime;
        if (a != 0.0 || k != 0.0) {
            const Eigen::Matrix4d ke = element_quad(a, k, d.mesh.h());
            for (int c = 0; c < d.mesh.n_cells(); ++c) {
                const auto verts = d.mesh.cell_vertices(c);
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j <= i; ++j)
                        K.add(verts[static_cast<std::size_t>(i)], verts[static_cast<std::size_t>(j)], ke(i, j));
            }
        }
    }
    return K;
}

namespace detail {

// Integrals of the four bilinear vertex functions over the cell-local
// subrectangle [x1,x2] x [y1,y2] of a cell of side h (exact closed form).
inline Eigen::Vector4d bilinear_subcell_integrals(double h, double x1, double x2, double y1,
                                                  double y2) {
    const double i1x = (x2 * x2 - x1 * x1) / (2.0 * h);
    const double i0x = (x2 - x1) - i1x;
    const double i1y = (y2 * y2 - y1 * y1) / (2.0 * h);
    const double i0y = (y2 - y1) - i1y;
    Eigen::Vector4d v;
    v << i0x * i0y, i1x * i0y, i1x * i1y, i0x * i1y;
    return v;
}

}  // namespace detail

inline Vector assemble_load(const ParamProblem& p, LoadKind kind) {
    Vector f = Vector::Zero(p.n_dofs());
    if (p.model == Model::beam_frame) {
        const auto& d = p.beam();
        const Mesh1D& mesh = d.mesh;
        for (int m = 0; m < mesh.n_members(); ++m) {
            const double q =
                (kind == LoadKind::load) ? d.q[static_cast<std::size_t>(m)] : d.q_prime[static_cast<std::size_t>(m)];
            if (q == 0.0) continue;
            const double he = mesh.element_length(m);
            const double h2 = he * he;
            for (int e = 0; e < mesh.n_per_member(); ++e) {
                const auto dofs = mesh.element_dofs(m, e);
                const std::array<double, 4> fe = {q * he / 2.0, q * h2 / 12.0, q * he / 2.0,
                                                  -q * h2 / 12.0};
                for (int i = 0; i < 4; ++i)
                    if (dofs[static_cast<std::size_t>(i)] >= 0) f[dofs[static_cast<std::size_t>(i)]] += fe[static_cast<std::size_t>(i)];
            }
        }
        const auto& pts = (kind == LoadKind::load) ? d.point_loads : d.point_load_primes;
        for (const auto& pl : pts) f[pl.dof] += pl.value;
    } else {
        const auto& d = p.membrane();
        const Mesh2D& mesh = d.mesh;
        const double h = mesh.h();
        const double lo = 0.5 - d.load_half_width, hi = 0.5 + d.load_half_width;
        if (kind == LoadKind::load) {
            for (int c = 0; c < mesh.n_cells(); ++c) {
                const auto o = mesh.cell_origin(c);
                const double x1 = std::max(o[0], lo), x2 = std::min(o[0] + h, hi);
                const double y1 = std::max(o[1], lo), y2 = std::min(o[1] + h, hi);
                if (x2 <= x1 || y2 <= y1) continue;
                const Eigen::Vector4d v =
                    detail::bilinear_subcell_integrals(h, x1 - o[0], x2 - o[0], y1 - o[1], y2 - o[1]);
                const auto verts = mesh.cell_vertices(c);
                for (int i = 0; i < 4; ++i) f[verts[static_cast<std::size_t>(i)]] += v(i);
            }
        } else if (d.load_derivative_active) {
            if (!d.recovery_ready)
                throw std::runtime_error(
                    "assemble_load: line-source load derivative requires the load square to be "
                    "mesh-aligned");
            // Unit line source on the boundary of the load square: every mesh
            // edge on that boundary contributes h/2 to each of its endpoints.
            const int i_lo = static_cast<int>(std::round(lo / h));
            const int i_hi = static_cast<int>(std::round(hi / h));
            for (int i = i_lo; i < i_hi; ++i) {
                // bottom and top sides (edges along x)
                f[mesh.vertex_id(i, i_lo)] += h / 2.0;
                f[mesh.vertex_id(i + 1, i_lo)] += h / 2.0;
                f[mesh.vertex_id(i, i_hi)] += h / 2.0;
                f[mesh.vertex_id(i + 1, i_hi)] += h / 2.0;
                // left and right sides (edges along y)
                f[mesh.vertex_id(i_lo, i)] += h / 2.0;
                f[mesh.vertex_id(i_lo, i + 1)] += h / 2.0;
                f[mesh.vertex_id(i_hi, i)] += h / 2.0;
                f[mesh.vertex_id(i_hi, i + 1)] += h / 2.0;
            }
        }
    }
    return f;
}

// Extraction vector g of the quantity of interest: Q(u) = g . u.
inline Vector assemble_qoi(const ParamProblem& p, QoiKind kind) {
    Vector g = Vector::Zero(p.n_dofs());
    if (kind == QoiKind::sway || kind == QoiKind::rotation_b) {
        if (p.model != Model::beam_frame)
            throw std::invalid_argument("assemble_qoi: point quantity requires the frame model");
        const auto& mesh = p.beam().mesh;
        g[kind == QoiKind::sway ? mesh.sway_dof() : mesh.rotation_b_dof()] = 1.0;
        return g;
    }
    if (p.model != Model::membrane)
        throw std::invalid_argument("assemble_qoi: region average requires the membrane model");
    const auto& mesh = p.membrane().mesh;
    // average over the square (0.5, 0.625)^2; its corners sit on mesh lines
    // for every n that is a multiple of 8
    const int n = mesh.n();
    if (n % 8 != 0) throw std::invalid_argument("assemble_qoi: region requires n divisible by 8");
    const double h = mesh.h();
    const double area = 0.125 * 0.125;
    const int i_lo = n / 2, i_hi = 5 * n / 8;
    for (int j = i_lo; j < i_hi; ++j)
        for (int i = i_lo; i < i_hi; ++i) {
            const auto verts = mesh.cell_vertices(mesh.cell_id(i, j));
            for (int t = 0; t < 4; ++t) g[verts[static_cast<std::size_t>(t)]] += (h * h / 4.0) / area;
        }
    return g;
}

// ---------------------------------------------------------------------------
// per-element data used by the recovery and estimator stages
// ---------------------------------------------------------------------------

// Stiffness polynomial (and parameter derivative) of element e of member m,
// in element-local coordinates [0, h_e].
inline std::pair<Poly1, Poly1> beam_element_stiffness(const ParamProblem& p, int m, int e) {
    const auto& d = p.beam();
    const auto& prof = d.profiles[static_cast<std::size_t>(d.mesh.member(m).profile)];
    const double he = d.mesh.element_length(m);
    return {prof.ei.shifted(e * he), prof.ei_prime.shifted(e * he)};
}

// Constant ratio EI'(s) / EI(s) of a member (zero when the member stiffness
// does not depend on the active parameter). The coupled transform requires
// this ratio to be constant along each member; deviations are an input error.
inline double member_stiffness_ratio(const ParamProblem& p, int m) {
    const auto& d = p.beam();
    const auto& prof = d.profiles[static_cast<std::size_t>(d.mesh.member(m).profile)];
    if (prof.ei_prime.max_abs_coeff() == 0.0) return 0.0;
    int lead = prof.ei.degree();
    while (lead > 0 && prof.ei.coeff(lead) == 0.0) --lead;
    const double ratio = prof.ei_prime.coeff(lead) / prof.ei.coeff(lead);
    const Poly1 diff = prof.ei_prime - prof.ei * ratio;
    if (diff.max_abs_coeff() > 1e-12 * prof.ei_prime.max_abs_coeff())
        throw std::runtime_error(
            "member_stiffness_ratio: stiffness derivative is not proportional to the stiffness");
    return ratio;
}

// Membrane analogue: a'(x)/a(x), constant over the domain.
inline double membrane_stiffness_ratio(const ParamProblem& p) {
    const auto& d = p.membrane();
    return d.a_prime / d.a;
}

// ---------------------------------------------------------------------------
// assembled bundle shared by the solver stages
// ---------------------------------------------------------------------------

struct AssembledSystem {
    SymSparse K;
    SymSparse Kp;
    Vector f;
    Vector fp;
    Vector g;
    Factorization fact;
};

inline AssembledSystem assemble_system(const ParamProblem& p, QoiKind qoi) {
    SymSparse K = assemble_operator(p, OperatorKind::stiffness);
    SymSparse Kp = assemble_operator(p, OperatorKind::stiffness_derivative);
    Vector f = assemble_load(p, LoadKind::load);
    Vector fp = assemble_load(p, LoadKind::load_derivative);
    Vector g = assemble_qoi(p, qoi);
    Factorization fact(K);
    return AssembledSystem{std::move(K), std::move(Kp), std::move(f), std::move(fp), std::move(g),
                           std::move(fact)};
}

}  // namespace strictbounds
