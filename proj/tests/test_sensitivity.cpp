#include <catch2/catch_amalgamated.hpp>

#include <strictbounds/forms.hpp>
#include <strictbounds/sensitivity.hpp>

#include "oracle_helpers.hpp"

using namespace strictbounds;

TEST_CASE("scaling-parameter admissibility") {
    SECTION("frame with the stiffness parameter") {
        const XiValidation v = validate_xi(make_frame_problem(ActiveParam::beta1, 2, 1.0));
        CHECK(v.psi == Catch::Approx(1.0));  // EI'/EI = 1 on the beam at beta1 = 1
        CHECK(v.xi_max == Catch::Approx(2.0));
        CHECK(v.ok);
        CHECK_FALSE(validate_xi(make_frame_problem(ActiveParam::beta1, 2, 2.0)).ok);
        CHECK_FALSE(validate_xi(make_frame_problem(ActiveParam::beta1, 2, -0.5)).ok);
        CHECK_FALSE(validate_xi(make_frame_problem(ActiveParam::beta1, 2, 0.0)).ok);
        CHECK(validate_xi(make_frame_problem(ActiveParam::beta1, 2, 1.9)).ok);
        // stiffer beam widens the admissible range: psi = 1/beta1
        CHECK(validate_xi(make_frame_problem(ActiveParam::beta1, 2, 1.0, 4.0)).xi_max ==
              Catch::Approx(8.0));
    }
    SECTION("membrane") {
        CHECK(validate_xi(make_membrane_problem(ActiveParam::beta1, 8, 1.0)).xi_max ==
              Catch::Approx(2.0));
        // load parameter leaves the operator alone: any positive xi works
        const XiValidation v = validate_xi(make_membrane_problem(ActiveParam::beta2, 8, 5.0));
        CHECK(std::isinf(v.xi_max));
        CHECK(v.ok);
    }
    SECTION("solvers refuse invalid xi") {
        const ParamProblem p = make_frame_problem(ActiveParam::beta1, 2, 2.5);
        const AssembledSystem sys =
            assemble_system(make_frame_problem(ActiveParam::beta1, 2, 1.0), QoiKind::sway);
        CHECK_THROWS(solve_primal_pair(p, sys));
        CHECK_THROWS(require_valid_xi(p));
    }
}

TEST_CASE("primal pair solves the perturbation block") {
    const ParamProblem p = make_frame_problem(ActiveParam::beta1, 4, 1.3);
    const AssembledSystem sys = assemble_system(p, QoiKind::sway);
    const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
    CHECK(pp.role == PairRole::primal);
    CHECK(pp.solver_residual <= 1e-12);

    // K u = f and K V = xi (f' - K' u)
    CHECK((sys.K.apply(pp.first) - sys.f).lpNorm<Eigen::Infinity>() < 1e-10);
    const Vector rhs = p.xi * (sys.fp - sys.Kp.apply(pp.first));
    CHECK((sys.K.apply(pp.second) - rhs).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("adjoint pair solves the transposed block") {
    const ParamProblem p = make_frame_problem(ActiveParam::beta1, 4, 0.7);
    const AssembledSystem sys = assemble_system(p, QoiKind::rotation_b);
    const FieldPair pd = solve_adjoint_pair(p, sys, 1e-12);
    CHECK(pd.role == PairRole::adjoint);

    // K W = g / xi and K w + xi K' W = 0
    CHECK((sys.K.apply(pd.second) - sys.g / p.xi).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((sys.K.apply(pd.first) + p.xi * sys.Kp.apply(pd.second)).lpNorm<Eigen::Infinity>() <
          1e-10);
}

TEST_CASE("derivative field matches a finite-difference reconstruction") {
    SECTION("frame stiffness parameter") {
        const int n = 8;
        const ParamProblem p = make_frame_problem(ActiveParam::beta1, n, 1.0);
        const AssembledSystem sys = assemble_system(p, QoiKind::sway);
        const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
        const Vector uprime = pp.second / pp.xi;

        auto solve_at = [&](double b1) {
            const ParamProblem pb = make_frame_problem(ActiveParam::beta1, n, 1.0, b1, 1.0);
            const SymSparse K = assemble_operator(pb, OperatorKind::stiffness);
            const Vector f = assemble_load(pb, LoadKind::load);
            return Factorization(K).solve(f, 1e-13);
        };
        // central differences at two steps plus Richardson
        const double d1 = 0.02, d2 = 0.01;
        const Vector fd1 = (solve_at(1.0 + d1) - solve_at(1.0 - d1)) / (2.0 * d1);
        const Vector fd2 = (solve_at(1.0 + d2) - solve_at(1.0 - d2)) / (2.0 * d2);
        const Vector fd = (4.0 * fd2 - fd1) / 3.0;
        CHECK((uprime - fd).lpNorm<Eigen::Infinity>() <=
              1e-7 * uprime.lpNorm<Eigen::Infinity>());
    }
    SECTION("membrane diffusion parameter") {
        const int n = 8;
        const ParamProblem p = make_membrane_problem(ActiveParam::beta1, n, 1.0);
        const AssembledSystem sys = assemble_system(p, QoiKind::region_average);
        const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
        const Vector uprime = pp.second / pp.xi;

        auto solve_at = [&](double b1) {
            const ParamProblem pb = make_membrane_problem(ActiveParam::beta1, n, 1.0, b1);
            const SymSparse K = assemble_operator(pb, OperatorKind::stiffness);
            const Vector f = assemble_load(pb, LoadKind::load);
            return Factorization(K).solve(f, 1e-13);
        };
        const double d1 = 0.02, d2 = 0.01;
        const Vector fd1 = (solve_at(1.0 + d1) - solve_at(1.0 - d1)) / (2.0 * d1);
        const Vector fd2 = (solve_at(1.0 + d2) - solve_at(1.0 - d2)) / (2.0 * d2);
        const Vector fd = (4.0 * fd2 - fd1) / 3.0;
        CHECK((uprime - fd).lpNorm<Eigen::Infinity>() <=
              1e-7 * uprime.lpNorm<Eigen::Infinity>());
    }
}

TEST_CASE("operator-independent parameters make the pair decouple") {
    const ParamProblem p = make_frame_problem(ActiveParam::beta2, 3, 1.0);
    const AssembledSystem sys = assemble_system(p, QoiKind::rotation_b);
    // f' = 0 would make the derivative vanish; here f' != 0 but K' = 0, so the
    // second field is xi K^-1 f'
    const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
    const Vector direct = Factorization(sys.K).solve(assemble_load(p, LoadKind::load_derivative), 1e-12);
    CHECK((pp.second / p.xi - direct).lpNorm<Eigen::Infinity>() < 1e-11);

    // zero load derivative and zero operator derivative: derivative field is zero
    ParamProblem p0 = p;
    std::get<BeamFrameData>(p0.data).q_prime = {0.0, 0.0, 0.0};
    const AssembledSystem sys0 = assemble_system(p0, QoiKind::rotation_b);
    const FieldPair pp0 = solve_primal_pair(p0, sys0, 1e-12);
    CHECK(pp0.second.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("derivative values match the frozen closed-form references") {
    SECTION("sway derivative with respect to the beam stiffness") {
        const ParamProblem p = make_frame_problem(ActiveParam::beta1, 50, 1.0);
        const AssembledSystem sys = assemble_system(p, QoiKind::sway);
        const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
        const double j = evaluate_qoi(sys, pp);
        CHECK(j == Catch::Approx(oracle::kSwayD1).epsilon(5e-7));
        // the base response itself
        CHECK(sys.g.dot(pp.first) == Catch::Approx(oracle::kSway).epsilon(5e-7));
        // parametric cross-check of the frozen constant
        CHECK(oracle::sway_exact(1.0) == Catch::Approx(oracle::kSway).epsilon(1e-14));
    }
    SECTION("joint-rotation derivative with respect to the load factor") {
        const ParamProblem p = make_frame_problem(ActiveParam::beta2, 50, 1.0);
        const AssembledSystem sys = assemble_system(p, QoiKind::rotation_b);
        const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
        CHECK(evaluate_qoi(sys, pp) == Catch::Approx(oracle::kRotBD2).epsilon(5e-7));
        CHECK(sys.g.dot(pp.first) == Catch::Approx(oracle::kRotB).epsilon(5e-7));
    }
    SECTION("rotation derivative with respect to the beam stiffness") {
        const ParamProblem p = make_frame_problem(ActiveParam::beta1, 50, 1.0);
        const AssembledSystem sys = assemble_system(p, QoiKind::rotation_b);
        const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
        CHECK(evaluate_qoi(sys, pp) == Catch::Approx(oracle::kRotBD1).epsilon(5e-7));
    }
}

TEST_CASE("direct and adjoint evaluations agree") {
    auto check_case = [](const ParamProblem& p, QoiKind qoi) {
        const AssembledSystem sys = assemble_system(p, qoi);
        const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
        const FieldPair pd = solve_adjoint_pair(p, sys, 1e-12);
        const double direct = evaluate_qoi(sys, pp);
        const double adjoint = adjoint_state_value(sys, pp, pd);
        CHECK(std::abs(direct - adjoint) <= 1e-11 * std::abs(direct));
    };
    check_case(make_frame_problem(ActiveParam::beta1, 8, 1.0), QoiKind::sway);
    check_case(make_frame_problem(ActiveParam::beta1, 8, 0.4), QoiKind::sway);
    check_case(make_frame_problem(ActiveParam::beta2, 8, 1.0), QoiKind::rotation_b);
    check_case(make_membrane_problem(ActiveParam::beta1, 8, 1.0), QoiKind::region_average);
    check_case(make_membrane_problem(ActiveParam::beta1, 8, 1.7), QoiKind::region_average);
    check_case(make_membrane_problem(ActiveParam::beta2, 8, 1.0), QoiKind::region_average);
}

TEST_CASE("role checks on the evaluation helpers") {
    const ParamProblem p = make_frame_problem(ActiveParam::beta1, 2, 1.0);
    const AssembledSystem sys = assemble_system(p, QoiKind::sway);
    const FieldPair pp = solve_primal_pair(p, sys, 1e-12);
    const FieldPair pd = solve_adjoint_pair(p, sys, 1e-12);
    CHECK_THROWS(evaluate_qoi(sys, pd));
    CHECK_THROWS(adjoint_state_value(sys, pd, pp));
}
