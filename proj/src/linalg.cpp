#include "kgrape/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace kgrape::linalg {

SparseHermitianOperator SparseHermitianOperator::from_triplets(
    int dim, const std::vector<Triplet>& triplets, double drop_tol, double herm_tol) {
    if (dim <= 0) throw std::invalid_argument("operator dimension must be positive");

    // Accumulate duplicates row-major.
    std::vector<Triplet> sorted = triplets;
    for (const auto& [r, c, v] : sorted) {
        (void)v;
        if (r < 0 || r >= dim || c < 0 || c >= dim)
            throw std::invalid_argument("triplet index out of range");
    }
    std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
        return std::get<1>(a) < std::get<1>(b);
    });

    SparseHermitianOperator op;
    op.dim_ = dim;
    op.row_ptr_.assign(static_cast<std::size_t>(dim) + 1, 0);
    std::vector<int> rows;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const int r = std::get<0>(sorted[i]);
        const int c = std::get<1>(sorted[i]);
        Complex v = std::get<2>(sorted[i]);
        ++i;
        while (i < sorted.size() && std::get<0>(sorted[i]) == r && std::get<1>(sorted[i]) == c) {
            v += std::get<2>(sorted[i]);
            ++i;
        }
        if (std::abs(v) <= drop_tol) continue;
        rows.push_back(r);
        op.cols_.push_back(c);
        op.values_.push_back(v);
        op.max_abs_ = std::max(op.max_abs_, std::abs(v));
    }
    for (int r : rows) ++op.row_ptr_[static_cast<std::size_t>(r) + 1];
    for (int r = 0; r < dim; ++r) op.row_ptr_[r + 1] += op.row_ptr_[r];

    // Hermiticity: every stored (r,c,v) must have a matching (c,r,conj v).
    const double tol = herm_tol * std::max(1.0, op.max_abs_);
    op.for_each([&](int r, int c, const Complex& v) {
        if (std::abs(op.coeff(c, r) - std::conj(v)) > tol)
            throw std::invalid_argument("operator is not Hermitian within tolerance");
    });
    return op;
}

Complex SparseHermitianOperator::coeff(int row, int col) const {
    for (int k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k)
        if (cols_[k] == col) return values_[k];
    return Complex(0.0, 0.0);
}

void SparseHermitianOperator::apply(Eigen::Ref<const StateVector> x,
                                    Eigen::Ref<StateVector> y) const {
    if (x.size() != dim_ || y.size() != dim_)
        throw std::invalid_argument("matvec dimension mismatch");
    for (int r = 0; r < dim_; ++r) {
        Complex acc(0.0, 0.0);
        for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * x[cols_[k]];
        y[r] = acc;
    }
}

StateVector SparseHermitianOperator::apply(const StateVector& x) const {
    StateVector y(dim_);
    apply(x, y);
    return y;
}

DenseMatrix SparseHermitianOperator::to_dense() const {
    DenseMatrix H = DenseMatrix::Zero(dim_, dim_);
    for_each([&](int r, int c, const Complex& v) { H(r, c) += v; });
    return H;
}

StateVector matvec(const SparseHermitianOperator& op, const StateVector& v) {
    return op.apply(v);
}

Complex inner(const StateVector& u, const StateVector& v) {
    if (u.size() != v.size()) throw std::invalid_argument("inner dimension mismatch");
    return u.dot(v);
}

DenseHermitianEig eigh(const DenseMatrix& H, double herm_tol) {
    if (H.rows() != H.cols()) throw std::invalid_argument("eigh expects a square matrix");
    const double scale = H.cwiseAbs().maxCoeff();
    if ((H - H.adjoint()).cwiseAbs().maxCoeff() > herm_tol * std::max(1.0, scale))
        throw std::invalid_argument("eigh input is not Hermitian within tolerance");

    Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(H);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigh failed to converge");

    DenseHermitianEig out;
    out.dim = static_cast<int>(H.rows());
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
    return out;
}

StateVector expm_apply(const DenseHermitianEig& eig, double t, const StateVector& v) {
    if (v.size() != eig.dim) throw std::invalid_argument("expm_apply dimension mismatch");
    StateVector c = eig.eigenvectors.adjoint() * v;
    for (int k = 0; k < eig.dim; ++k)
        c[k] *= std::exp(Complex(0.0, -eig.eigenvalues[k] * t));
    return eig.eigenvectors * c;
}

StateVector expm_apply_dense(const DenseMatrix& H, double t, const StateVector& v) {
    return expm_apply(eigh(H), t, v);
}

}  // namespace kgrape::linalg
