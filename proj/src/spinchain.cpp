#include "kgrape/spinchain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace kgrape::spinchain {

std::string to_string(Parity p) { return p == Parity::even ? "even" : "odd"; }

Parity parity_from_string(const std::string& s) {
    if (s == "even") return Parity::even;
    if (s == "odd") return Parity::odd;
    throw std::invalid_argument("parity must be 'even' or 'odd', got '" + s + "'");
}

void ChainSpec::validate() const {
    if (L < 2) throw std::invalid_argument("chain length L must be >= 2");
    if (L > 30) throw std::invalid_argument("chain length L too large for 32-bit configs");
    if (K < 1 || K > L - 1)
        throw std::invalid_argument("excitation number K must satisfy 1 <= K <= L-1");
}

int SubspaceBasis::index_of(std::uint32_t config) const {
    const auto it = std::lower_bound(configs.begin(), configs.end(), config);
    if (it == configs.end() || *it != config) return -1;
    return static_cast<int>(it - configs.begin());
}

std::uint32_t SubspaceBasis::mirror(std::uint32_t config) const {
    std::uint32_t out = 0;
    for (int b = 0; b < L; ++b)
        if ((config >> b) & 1u) out |= 1u << (L - 1 - b);
    return out;
}

SubspaceBasis build_basis(int L, int K) {
    if (L < 1 || K < 0 || K > L) throw std::invalid_argument("invalid (L, K)");
    SubspaceBasis basis;
    basis.L = L;
    basis.K = K;
    // K up-spins = L-K set bits (down = 1); Gosper's hack walks the codes in
    // ascending order.
    const int downs = L - K;
    if (downs == 0) {
        basis.configs.push_back(0u);
        return basis;
    }
    std::uint32_t c = (1u << downs) - 1u;
    const std::uint32_t limit = 1u << L;
    while (c < limit) {
        basis.configs.push_back(c);
        const std::uint32_t lo = c & (~c + 1u);
        const std::uint32_t ripple = c + lo;
        c = ripple | (((c ^ ripple) >> 2) / lo);
    }
    return basis;
}

SparseHermitianOperator build_drift(const ChainSpec& spec) {
    spec.validate();
    const SubspaceBasis basis = build_basis(spec.L, spec.K);
    const int D = basis.dim();
    std::vector<SparseHermitianOperator::Triplet> trips;
    trips.reserve(static_cast<std::size_t>(D) * spec.L);
    for (int a = 0; a < D; ++a) {
        const std::uint32_t s = basis.configs[a];
        double zz = 0.0;
        for (int i = 1; i < spec.L; ++i) {
            const double zi = basis.spin_up(s, i) ? 1.0 : -1.0;
            const double zn = basis.spin_up(s, i + 1) ? 1.0 : -1.0;
            zz += zi * zn;
            if (zi * zn < 0.0) {
                // sx sx + sy sy exchanges an adjacent up/down pair.
                const std::uint32_t flip = (1u << (spec.L - i)) | (1u << (spec.L - i - 1));
                const int b = basis.index_of(s ^ flip);
                trips.emplace_back(a, b, Complex(spec.J, 0.0));
            }
        }
        trips.emplace_back(a, a, Complex(0.5 * spec.J * spec.alpha_z * zz, 0.0));
    }
    return SparseHermitianOperator::from_triplets(D, trips);
}

SparseHermitianOperator build_control(const ChainSpec& spec) {
    spec.validate();
    const SubspaceBasis basis = build_basis(spec.L, spec.K);
    const int D = basis.dim();
    std::vector<SparseHermitianOperator::Triplet> trips;
    trips.reserve(D);
    for (int a = 0; a < D; ++a) {
        const std::uint32_t s = basis.configs[a];
        const double z1 = basis.spin_up(s, 1) ? 1.0 : -1.0;
        const double zL = basis.spin_up(s, spec.L) ? 1.0 : -1.0;
        trips.emplace_back(a, a, Complex(0.5 * spec.J * (z1 + zL), 0.0));
    }
    return SparseHermitianOperator::from_triplets(D, trips);
}

ParityBasis build_parity_basis(const SubspaceBasis& basis, Parity parity) {
    const int DK = basis.dim();
    ParityBasis pb;
    pb.parity = parity;
    pb.full_dim = DK;

    std::vector<Eigen::Triplet<double>> qtrips;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    int row = 0;
    for (int a = 0; a < DK; ++a) {
        const std::uint32_t s = basis.configs[a];
        const std::uint32_t t = basis.mirror(s);
        if (t == s) {
            ++pb.palindromes;
            if (parity == Parity::even) qtrips.emplace_back(row++, a, 1.0);
        } else if (s < t) {
            const int b = basis.index_of(t);
            qtrips.emplace_back(row, a, inv_sqrt2);
            qtrips.emplace_back(row, b, parity == Parity::even ? inv_sqrt2 : -inv_sqrt2);
            ++row;
        }
    }
    pb.dim = row;
    pb.Q.resize(row, DK);
    pb.Q.setFromTriplets(qtrips.begin(), qtrips.end());
    return pb;
}

SparseHermitianOperator parity_reduce(const SparseHermitianOperator& H,
                                      const SubspaceBasis& basis, const ParityBasis& pb,
                                      double commute_tol) {
    if (H.dim() != basis.dim() || basis.dim() != pb.full_dim)
        throw std::invalid_argument("parity_reduce dimension mismatch");

    // [H, Pi] = 0 <=> H[mirror a, mirror b] = H[a, b] for all entries.
    const double tol = commute_tol * std::max(1.0, H.max_abs());
    H.for_each([&](int a, int b, const Complex& v) {
        const int ma = basis.index_of(basis.mirror(basis.configs[a]));
        const int mb = basis.index_of(basis.mirror(basis.configs[b]));
        if (std::abs(H.coeff(ma, mb) - v) > tol)
            throw std::invalid_argument("operator does not commute with the mirror parity");
    });

    Eigen::SparseMatrix<Complex> Hs(H.dim(), H.dim());
    {
        std::vector<Eigen::Triplet<Complex>> ht;
        ht.reserve(H.nonzeros());
        H.for_each([&](int r, int c, const Complex& v) { ht.emplace_back(r, c, v); });
        Hs.setFromTriplets(ht.begin(), ht.end());
    }
    Eigen::SparseMatrix<Complex> Qc = pb.Q.cast<Complex>();
    Eigen::SparseMatrix<Complex> red = Qc * Hs * Eigen::SparseMatrix<Complex>(Qc.adjoint());

    std::vector<SparseHermitianOperator::Triplet> trips;
    trips.reserve(red.nonZeros());
    for (int k = 0; k < red.outerSize(); ++k)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(red, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
    return SparseHermitianOperator::from_triplets(pb.dim, trips);
}

ReducedModel build_reduced_model(const ChainSpec& spec) {
    spec.validate();
    ReducedModel model;
    model.spec = spec;
    const SubspaceBasis basis = build_basis(spec.L, spec.K);
    model.parity_basis = build_parity_basis(basis, spec.parity);
    model.dim = model.parity_basis.dim;
    model.H_d = parity_reduce(build_drift(spec), basis, model.parity_basis);
    model.H_c = parity_reduce(build_control(spec), basis, model.parity_basis);
    return model;
}

std::pair<StateVector, StateVector> task_states(int D) {
    if (D < 2) throw std::invalid_argument("task_states needs dimension >= 2");
    StateVector e1 = StateVector::Zero(D);
    StateVector eD = StateVector::Zero(D);
    e1[0] = Complex(1.0, 0.0);
    eD[D - 1] = Complex(1.0, 0.0);
    return {e1, eD};
}

int controllability_rank(const SparseHermitianOperator& H_d,
                         const SparseHermitianOperator& H_c, int max_dim_cap) {
    if (H_d.dim() != H_c.dim())
        throw std::invalid_argument("controllability_rank dimension mismatch");
    const int D = H_d.dim();
    if (D > max_dim_cap)
        throw std::invalid_argument("controllability_rank: dimension exceeds cap");

    using Mat = Eigen::MatrixXcd;
    std::vector<Mat> algebra;
    algebra.reserve(static_cast<std::size_t>(D) * D);

    const auto try_add = [&](Mat X) {
        const double scale = X.norm();
        if (scale <= 0.0) return;
        // Two Gram-Schmidt passes under the real Frobenius inner product.
        for (int pass = 0; pass < 2; ++pass)
            for (const Mat& B : algebra)
                X -= (B.adjoint() * X).trace().real() * B;
        if (X.norm() > 1e-10 * scale) algebra.push_back(X / X.norm());
    };

    const Complex mi(0.0, -1.0);
    try_add(mi * H_d.to_dense());
    try_add(mi * H_c.to_dense());

    std::size_t processed = 0;
    while (processed < algebra.size()) {
        const std::size_t i = processed++;
        for (std::size_t j = 0; j < i; ++j)
            try_add(algebra[i] * algebra[j] - algebra[j] * algebra[i]);
    }
    return static_cast<int>(algebra.size());
}

}  // namespace kgrape::spinchain
