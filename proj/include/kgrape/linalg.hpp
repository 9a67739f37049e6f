#pragma once

#include <complex>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace kgrape::linalg {

using Complex = std::complex<double>;
using StateVector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXcd;

/// Hermitian matrix in row-compressed storage. Immutable after construction.
class SparseHermitianOperator {
public:
    using Triplet = std::tuple<int, int, Complex>;

    SparseHermitianOperator() = default;

    /// Builds from (row, col, value) triplets. Duplicate entries are summed,
    /// entries with |value| <= drop_tol are discarded, and Hermiticity is
    /// verified to herm_tol.
    static SparseHermitianOperator from_triplets(int dim,
                                                 const std::vector<Triplet>& triplets,
                                                 double drop_tol = 1e-15,
                                                 double herm_tol = 1e-12);

    int dim() const { return dim_; }
    std::size_t nonzeros() const { return values_.size(); }

    /// y = H x; y must be preallocated to dim().
    void apply(Eigen::Ref<const StateVector> x, Eigen::Ref<StateVector> y) const;
    StateVector apply(const StateVector& x) const;

    DenseMatrix to_dense() const;

    /// max_{ij} |H_ij| over stored entries (0 for the zero operator).
    double max_abs() const { return max_abs_; }

    Complex coeff(int row, int col) const;

    /// Raw CSR access: entries of row r live at indices [row_begin(r),
    /// row_end(r)) with strictly ascending columns.
    int row_begin(int r) const { return row_ptr_[r]; }
    int row_end(int r) const { return row_ptr_[r + 1]; }
    int col_at(int k) const { return cols_[k]; }
    const Complex& value_at(int k) const { return values_[k]; }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (int r = 0; r < dim_; ++r)
            for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
                fn(r, cols_[k], values_[k]);
    }

private:
    int dim_ = 0;
    std::vector<int> row_ptr_{0};
    std::vector<int> cols_;
    std::vector<Complex> values_;
    double max_abs_ = 0.0;
};

/// result_i = sum_k op[i,k] v_k
StateVector matvec(const SparseHermitianOperator& op, const StateVector& v);

/// Conjugate-linear in u, linear in v.
Complex inner(const StateVector& u, const StateVector& v);

struct DenseHermitianEig {
    int dim = 0;
    Eigen::VectorXd eigenvalues;   // ascending
    DenseMatrix eigenvectors;      // columns orthonormal
};

/// Eigendecomposition of a dense Hermitian matrix. Throws if the input
/// deviates from Hermiticity by more than herm_tol (relative to max |H_ij|).
DenseHermitianEig eigh(const DenseMatrix& H, double herm_tol = 1e-12);

/// Q diag(exp(-i lambda_k t)) Q^dag v from a precomputed eigendecomposition.
StateVector expm_apply(const DenseHermitianEig& eig, double t, const StateVector& v);

/// exp(-i H t) v via the spectral theorem.
StateVector expm_apply_dense(const DenseMatrix& H, double t, const StateVector& v);

}  // namespace kgrape::linalg
