#pragma once

// Symmetric sparse linear algebra for the assembled systems. Storage keeps
// the lower triangle only; factorization is a sparse Cholesky (LL^T) with
// natural ordering so results are deterministic across runs. Every solve is
// re-checked against the requested relative residual; failures carry the
// achieved residual in the exception message.

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace strictbounds {

using Vector = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct SolveError : std::runtime_error {
    explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

class SymSparse {
public:
    explicit SymSparse(int n) : n_(n) {
        if (n < 0) throw std::invalid_argument("SymSparse: negative dimension");
    }

    int dim() const { return n_; }

    // Accumulate a symmetric entry; (i,j) and (j,i) refer to the same slot.
    void add(int i, int j, double v) {
        if (i < 0 || j < 0 || i >= n_ || j >= n_) throw std::out_of_range("SymSparse::add: index");
        if (j > i) std::swap(i, j);
        trips_.emplace_back(i, j, v);
        dirty_ = true;
    }

    // Compressed lower-triangular matrix (duplicates summed).
    const SpMat& lower() const {
        if (dirty_) {
            mat_ = SpMat(n_, n_);
            mat_.setFromTriplets(trips_.begin(), trips_.end());
            mat_.makeCompressed();
            dirty_ = false;
        }
        return mat_;
    }

    Vector apply(const Vector& v) const {
        if (v.size() != n_) throw std::invalid_argument("SymSparse::apply: size mismatch");
        return lower().selfadjointView<Eigen::Lower>() * v;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd d = Eigen::MatrixXd(lower());
        d = d.selfadjointView<Eigen::Lower>();
        return d;
    }

    std::size_t nnz_lower() const { return static_cast<std::size_t>(lower().nonZeros()); }

    double max_abs() const {
        const SpMat& m = lower();
        double v = 0.0;
        for (int k = 0; k < m.outerSize(); ++k)
            for (SpMat::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
        return v;
    }

private:
    int n_;
    std::vector<Eigen::Triplet<double>> trips_;
    mutable SpMat mat_;
    mutable bool dirty_ = true;
};

// Immutable Cholesky factorization, shareable across solves of the same
// operator (the sensitivity pairs reuse one factorization for four solves).
class Factorization {
public:
    explicit Factorization(const SymSparse& a)
        : matrix_(std::make_shared<SpMat>(a.lower())),
          llt_(std::make_shared<Solver>()) {
        llt_->compute(*matrix_);
        if (llt_->info() != Eigen::Success)
            throw SolveError("Cholesky factorization failed: matrix is not positive definite");
        // infinity norm of the full symmetric matrix, for the backward-error measure
        Vector rowsum = Vector::Zero(matrix_->rows());
        for (int k = 0; k < matrix_->outerSize(); ++k)
            for (SpMat::InnerIterator it(*matrix_, k); it; ++it) {
                rowsum[it.row()] += std::abs(it.value());
                if (it.row() != it.col()) rowsum[it.col()] += std::abs(it.value());
            }
        norm_inf_ = rowsum.size() > 0 ? rowsum.maxCoeff() : 0.0;
    }

    int dim() const { return static_cast<int>(matrix_->rows()); }

    // Solve with a measured normwise backward error
    //     ||K x - b||_inf / (||K||_inf ||x||_inf + ||b||_inf),
    // applying iterative refinement until the tolerance is met or the error
    // stagnates. Throws SolveError with the achieved value on failure.
    Vector solve(const Vector& b, double rel_tol = 1e-12, double* achieved = nullptr) const {
        if (b.size() != matrix_->rows()) throw std::invalid_argument("Factorization::solve: size mismatch");
        if (b.lpNorm<Eigen::Infinity>() == 0.0) {
            if (achieved) *achieved = 0.0;
            return Vector::Zero(b.size());
        }
        const double bnorm = b.lpNorm<Eigen::Infinity>();
        Vector x = llt_->solve(b);
        auto backward_error = [&](const Vector& xx) {
            const double rnorm =
                (matrix_->selfadjointView<Eigen::Lower>() * xx - b).lpNorm<Eigen::Infinity>();
            return rnorm / (norm_inf_ * xx.lpNorm<Eigen::Infinity>() + bnorm);
        };
        double res = backward_error(x);
        for (int it = 0; it < 6 && res > rel_tol; ++it) {
            const Vector r = b - matrix_->selfadjointView<Eigen::Lower>() * x;
            const Vector x_new = x + llt_->solve(r);
            const double res_new = backward_error(x_new);
            if (res_new >= res) break;  // stagnated
            x = x_new;
            res = res_new;
        }
        if (res > rel_tol) {
            std::ostringstream os;
            os << "solve did not reach backward error " << rel_tol << " (achieved " << res << ")";
            throw SolveError(os.str());
        }
        if (achieved) *achieved = res;
        return x;
    }

    double norm_inf() const { return norm_inf_; }

private:
    using Solver = Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>>;
    std::shared_ptr<SpMat> matrix_;
    std::shared_ptr<Solver> llt_;
    double norm_inf_ = 0.0;
};

inline Vector solve_spd(const SymSparse& a, const Vector& b, double rel_tol = 1e-12,
                        double* achieved = nullptr) {
    return Factorization(a).solve(b, rel_tol, achieved);
}

inline Vector matvec(const SymSparse& a, const Vector& v) { return a.apply(v); }

}  // namespace strictbounds
