#include <catch2/catch_amalgamated.hpp>

#include <set>

#include <strictbounds/forms.hpp>
#include <strictbounds/mesh.hpp>

using namespace strictbounds;

TEST_CASE("single-element frame mesh") {
    const Mesh1D m(FrameGeometry{1.0}, 1);
    CHECK(m.n_elements() == 3);
    CHECK(m.n_dofs() == 3);  // sway and the two joint rotations
    CHECK(m.element_length(0) == Catch::Approx(1.0));

    // column A->B: clamped base, sway + rotation at the top
    CHECK(m.element_dofs(0, 0) == std::array<int, 4>{-1, -1, m.sway_dof(), m.rotation_b_dof()});
    // beam B->C: deflections held by the rigid columns, rotations free
    CHECK(m.element_dofs(1, 0) ==
          std::array<int, 4>{-1, m.rotation_b_dof(), -1, m.rotation_c_dof()});
    // column D->C
    CHECK(m.element_dofs(2, 0) == std::array<int, 4>{-1, -1, m.sway_dof(), m.rotation_c_dof()});
}

TEST_CASE("refined frame mesh dof layout") {
    const int n = 4;
    const Mesh1D m(FrameGeometry{1.0}, n);
    CHECK(m.n_elements() == 12);
    // 3 shared + 3 members * (n-1) interior nodes * 2 unknowns each
    CHECK(m.n_dofs() == 21);

    SECTION("shared unknowns sit where expected") {
        CHECK(m.deflection_dof(0, n) == m.sway_dof());
        CHECK(m.deflection_dof(2, n) == m.sway_dof());
        CHECK(m.slope_dof(0, n) == m.rotation_b_dof());
        CHECK(m.slope_dof(1, 0) == m.rotation_b_dof());
        CHECK(m.slope_dof(1, n) == m.rotation_c_dof());
        CHECK(m.slope_dof(2, n) == m.rotation_c_dof());
    }
    SECTION("constrained values are marked") {
        CHECK(m.deflection_dof(0, 0) == -1);
        CHECK(m.slope_dof(0, 0) == -1);
        CHECK(m.deflection_dof(1, 0) == -1);
        CHECK(m.deflection_dof(1, n) == -1);
        CHECK(m.deflection_dof(2, 0) == -1);
        CHECK(m.slope_dof(2, 0) == -1);
    }
    SECTION("every unknown index is hit exactly by the node maps") {
        std::set<int> seen;
        int constrained = 0;
        for (int mem = 0; mem < 3; ++mem)
            for (int k = 0; k <= n; ++k)
                for (int dof : {m.deflection_dof(mem, k), m.slope_dof(mem, k)}) {
                    if (dof < 0) {
                        ++constrained;
                        continue;
                    }
                    REQUIRE(dof < m.n_dofs());
                    seen.insert(dof);
                }
        CHECK(static_cast<int>(seen.size()) == m.n_dofs());
        // clamped supports contribute 2 constraints each, beam ends 1 each;
        // the sway and rotation unknowns are visited from several members
        CHECK(constrained == 6);
    }
    SECTION("element dof tuples chain along each member") {
        for (int mem = 0; mem < 3; ++mem)
            for (int e = 0; e + 1 < n; ++e) {
                const auto a = m.element_dofs(mem, e);
                const auto b = m.element_dofs(mem, e + 1);
                CHECK(a[2] == b[0]);
                CHECK(a[3] == b[1]);
            }
    }
    SECTION("bounds checking") {
        CHECK_THROWS(m.element_dofs(0, n));
        CHECK_THROWS(m.element_dofs(3, 0));
        CHECK_THROWS(m.deflection_dof(0, n + 1));
    }
}

TEST_CASE("quad mesh indexing") {
    const Mesh2D m(4);
    CHECK(m.n_vertices() == 25);
    CHECK(m.n_cells() == 16);
    CHECK(m.h() == Catch::Approx(0.25));
    CHECK(m.vertex_id(4, 4) == 24);
    CHECK(m.vertex_ij(13) == std::pair<int, int>{3, 2});

    const int c = m.cell_id(1, 2);
    CHECK(m.cell_ij(c) == std::pair<int, int>{1, 2});
    CHECK(m.cell_vertices(c) ==
          std::array<int, 4>{m.vertex_id(1, 2), m.vertex_id(2, 2), m.vertex_id(2, 3),
                             m.vertex_id(1, 3)});
    CHECK(m.cell_origin(c)[0] == Catch::Approx(0.25));
    CHECK(m.cell_origin(c)[1] == Catch::Approx(0.5));

    SECTION("corner order is counter-clockwise") {
        // shoelace area of the corner polygon must be +h^2
        const auto verts = m.cell_vertices(c);
        double area = 0.0;
        for (int k = 0; k < 4; ++k) {
            const auto [xi, yi] = m.vertex_ij(verts[static_cast<std::size_t>(k)]);
            const auto [xj, yj] = m.vertex_ij(verts[static_cast<std::size_t>((k + 1) % 4)]);
            area += 0.5 * (xi * yj - xj * yi) * m.h() * m.h();
        }
        CHECK(area == Catch::Approx(m.h() * m.h()));
    }
    SECTION("bounds checking") {
        CHECK_THROWS(m.vertex_id(5, 0));
        CHECK_THROWS(m.cell_id(4, 0));
        CHECK_THROWS(Mesh2D(0));
    }
}

TEST_CASE("power-of-two helper and membrane mesh admission") {
    for (int n : {1, 2, 4, 8, 64, 1024}) CHECK(is_power_of_two(n));
    for (int n : {0, -4, 3, 6, 12, 100}) CHECK_FALSE(is_power_of_two(n));

    CHECK_THROWS_WITH(make_membrane_problem(ActiveParam::beta1, 12),
                      Catch::Matchers::ContainsSubstring("power of two"));
    CHECK_THROWS_WITH(make_membrane_problem(ActiveParam::beta1, 4),
                      Catch::Matchers::ContainsSubstring("power of two"));
    CHECK_NOTHROW(make_membrane_problem(ActiveParam::beta1, 8));
}
