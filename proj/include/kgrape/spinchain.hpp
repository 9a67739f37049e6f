#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "kgrape/linalg.hpp"

namespace kgrape::spinchain {

using linalg::Complex;
using linalg::SparseHermitianOperator;
using linalg::StateVector;

enum class Parity { even, odd };

std::string to_string(Parity p);
Parity parity_from_string(const std::string& s);

/// XXZ chain parameters and the symmetry sector holding the dynamics.
struct ChainSpec {
    int L = 2;             // sites
    double J = 1.0;        // coupling strength
    double alpha_z = 0.5;  // anisotropy
    int K = 1;             // excitation (up-spin) count
    Parity parity = Parity::even;

    void validate() const;
};

/// Computational basis of the K-excitation subspace S_K. Configurations are
/// L-bit codes with up = 0 and down = 1, leftmost site most significant,
/// listed in ascending binary order.
struct SubspaceBasis {
    int L = 0;
    int K = 0;
    std::vector<std::uint32_t> configs;

    int dim() const { return static_cast<int>(configs.size()); }
    int index_of(std::uint32_t config) const;  // -1 if absent
    std::uint32_t mirror(std::uint32_t config) const;
    bool spin_up(std::uint32_t config, int site) const {  // site is 1-based
        return ((config >> (L - site)) & 1u) == 0u;
    }
};

SubspaceBasis build_basis(int L, int K);

/// Parity eigenbasis rows inside S_K: (|s> +- |mirror s>)/sqrt(2) per mirror
/// pair, palindromes alone (even sector only), ordered by the smaller pair
/// index ascending.
struct ParityBasis {
    Parity parity = Parity::even;
    int full_dim = 0;   // D_K
    int dim = 0;        // reduced D
    int palindromes = 0;
    Eigen::SparseMatrix<double, Eigen::RowMajor> Q;  // dim x D_K, rows orthonormal
};

ParityBasis build_parity_basis(const SubspaceBasis& basis, Parity parity);

struct ReducedModel {
    ChainSpec spec;
    int dim = 0;
    ParityBasis parity_basis;
    SparseHermitianOperator H_d;
    SparseHermitianOperator H_c;
};

/// XXZ drift (J/2) sum_i [sx sx + sy sy + alpha_z sz sz] restricted to S_K.
SparseHermitianOperator build_drift(const ChainSpec& spec);

/// Edge control (J/2)(sz_1 + sz_L) on S_K; diagonal in the computational basis.
SparseHermitianOperator build_control(const ChainSpec& spec);

/// Q H Q^dag. Throws if H does not commute with the mirror permutation.
SparseHermitianOperator parity_reduce(const SparseHermitianOperator& H,
                                      const SubspaceBasis& basis, const ParityBasis& pb,
                                      double commute_tol = 1e-12);

ReducedModel build_reduced_model(const ChainSpec& spec);

/// Unit coordinate vectors e_1 and e_D of the reduced basis.
std::pair<StateVector, StateVector> task_states(int D);

/// Dimension of the real Lie algebra generated by {-i H_d, -i H_c} under
/// commutator closure; D^2 - 1 or D^2 means full controllability.
int controllability_rank(const SparseHermitianOperator& H_d,
                         const SparseHermitianOperator& H_c, int max_dim_cap = 64);

}  // namespace kgrape::spinchain
