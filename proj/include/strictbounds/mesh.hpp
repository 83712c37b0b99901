#pragma once

// Meshes for the two benchmark families:
//  - Mesh1D: the portal-frame sway idealization. Three members (two clamped
//    columns and the connecting beam), axially rigid, each split into
//    n_per_member Hermite elements. Free unknowns are the sway translation
//    shared by both column tops, the two joint rotations, and the interior
//    deflection/slope pairs of every member: 6 n - 3 in total.
//  - Mesh2D: uniform n x n grid of square bilinear cells on the unit square.
//
// Sign conventions (fixed once, used everywhere): member transverse axes are
// +x for both columns and -y (downward) for the beam, and joint rotations are
// clockwise-positive. With these choices every member-local slope degree of
// freedom maps to a global rotation with factor +1, downward beam loads are
// positive, and a rightward push at the joints drives positive sway.

#include <array>
#include <stdexcept>
#include <utility>

namespace strictbounds {

struct FrameGeometry {
    double l = 1.0;  // column height and beam span
};

struct Member {
    int start_node;                    // frame corner ids: 0=A(0,0) 1=B(0,1) 2=C(1,1) 3=D(1,0)
    int end_node;
    double length;
    std::array<double, 2> axis;        // unit vector from start to end
    std::array<double, 2> transverse;  // unit vector of positive deflection
    int profile;                       // stiffness-profile id (0 = column, 1 = beam)
};

class Mesh1D {
public:
    Mesh1D(FrameGeometry g, int n_per_member) : g_(g), n_(n_per_member) {
        if (g.l <= 0.0) throw std::invalid_argument("Mesh1D: member length must be positive");
        if (n_ < 1) throw std::invalid_argument("Mesh1D: need at least one element per member");
        members_[0] = Member{0, 1, g.l, {0.0, 1.0}, {1.0, 0.0}, 0};   // column A->B
        members_[1] = Member{1, 2, g.l, {1.0, 0.0}, {0.0, -1.0}, 1};  // beam   B->C
        members_[2] = Member{3, 2, g.l, {0.0, 1.0}, {1.0, 0.0}, 0};   // column D->C
    }

    int n_per_member() const { return n_; }
    int n_members() const { return 3; }
    const Member& member(int m) const { return members_.at(static_cast<std::size_t>(m)); }
    double element_length(int m) const { return member(m).length / n_; }

    int n_elements() const { return 3 * n_; }
    int element_index(int m, int e) const { return m * n_ + e; }

    int n_dofs() const { return 6 * n_ - 3; }
    int sway_dof() const { return 0; }
    int rotation_b_dof() const { return 1; }
    int rotation_c_dof() const { return 2; }

    // Transverse-deflection unknown at node k (0..n) of member m; -1 when the
    // value is constrained (clamped supports; beam ends held by the rigid columns).
    int deflection_dof(int m, int k) const {
        check_node(m, k);
        if (m == 1) {
            if (k == 0 || k == n_) return -1;
            return interior_base(m) + 2 * (k - 1);
        }
        if (k == 0) return -1;        // clamped support
        if (k == n_) return sway_dof();  // column top carries the shared sway
        return interior_base(m) + 2 * (k - 1);
    }

    // Slope unknown at node k of member m (clockwise-positive joint rotations).
    int slope_dof(int m, int k) const {
        check_node(m, k);
        if (m == 0) {
            if (k == 0) return -1;
            if (k == n_) return rotation_b_dof();
        } else if (m == 2) {
            if (k == 0) return -1;
            if (k == n_) return rotation_c_dof();
        } else {
            if (k == 0) return rotation_b_dof();
            if (k == n_) return rotation_c_dof();
        }
        return interior_base(m) + 2 * (k - 1) + 1;
    }

    // Global unknowns of element e of member m, ordered (w_a, th_a, w_b, th_b).
    std::array<int, 4> element_dofs(int m, int e) const {
        if (e < 0 || e >= n_) throw std::out_of_range("Mesh1D: element index");
        return {deflection_dof(m, e), slope_dof(m, e), deflection_dof(m, e + 1), slope_dof(m, e + 1)};
    }

private:
    void check_node(int m, int k) const {
        if (m < 0 || m >= 3) throw std::out_of_range("Mesh1D: member index");
        if (k < 0 || k > n_) throw std::out_of_range("Mesh1D: node index");
    }
    int interior_base(int m) const { return 3 + m * 2 * (n_ - 1); }

    FrameGeometry g_;
    int n_;
    std::array<Member, 3> members_;
};

inline Mesh1D build_frame_mesh(const FrameGeometry& g, int n_per_member) {
    return Mesh1D(g, n_per_member);
}

class Mesh2D {
public:
    explicit Mesh2D(int n) : n_(n), h_(1.0 / n) {
        if (n < 1) throw std::invalid_argument("Mesh2D: need at least one cell per direction");
    }

    int n() const { return n_; }
    double h() const { return h_; }
    int n_vertices() const { return (n_ + 1) * (n_ + 1); }
    int n_cells() const { return n_ * n_; }

    int vertex_id(int i, int j) const {
        if (i < 0 || j < 0 || i > n_ || j > n_) throw std::out_of_range("Mesh2D: vertex index");
        return j * (n_ + 1) + i;
    }
    std::pair<int, int> vertex_ij(int v) const { return {v % (n_ + 1), v / (n_ + 1)}; }

    int cell_id(int i, int j) const {
        if (i < 0 || j < 0 || i >= n_ || j >= n_) throw std::out_of_range("Mesh2D: cell index");
        return j * n_ + i;
    }
    std::pair<int, int> cell_ij(int c) const { return {c % n_, c / n_}; }

    // Cell corners counter-clockwise from the lower-left vertex.
    std::array<int, 4> cell_vertices(int c) const {
        auto [i, j] = cell_ij(c);
        return {vertex_id(i, j), vertex_id(i + 1, j), vertex_id(i + 1, j + 1), vertex_id(i, j + 1)};
    }

    std::array<double, 2> cell_origin(int c) const {
        auto [i, j] = cell_ij(c);
        return {i * h_, j * h_};
    }

private:
    int n_;
    double h_;
};

inline Mesh2D build_quad_mesh(int n) { return Mesh2D(n); }

inline bool is_power_of_two(int n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace strictbounds
