#pragma once
#include "cpcp/instances.hpp"

#include <Eigen/Cholesky>
#include <cstdint>
#include <memory>
#include <vector>

namespace cpcp {

// Matrices are vectorized column-major (Eigen storage order) throughout.
inline Eigen::Map<const Vector> vec_view(const Matrix& M) {
    return Eigen::Map<const Vector>(M.data(), M.size());
}
inline Matrix unvec(const Vector& v, int m, int n) {
    return Eigen::Map<const Matrix>(v.data(), m, n);
}

// q iid Gaussian sensing matrices H_i (entry variance 1/(mn)), stored as the
// rows of a q x (mn) matrix. With q >= mn the span is the whole space and
// projection short-circuits to the identity (no Gram factorization is built).
// Streamed storage regenerates rows from the seed in chunks, trading CPU for
// memory on large configurations; span projection is unavailable in that mode
// unless it short-circuits.
class MeasurementEnsemble {
public:
    enum class Storage { Dense, Streamed };

    MeasurementEnsemble(int m, int n, int q, std::uint64_t seed,
                        Storage storage = Storage::Dense);

    // Explicit matrices (small/deterministic ensembles for testing).
    static MeasurementEnsemble from_matrices(const std::vector<Matrix>& mats);

    int rows() const { return m_; }
    int cols() const { return n_; }
    int size() const { return q_; }
    Storage storage() const { return storage_; }
    bool spans_everything() const { return q_ >= m_ * n_; }

    // component i equals <H_i, M>
    Vector apply(const Matrix& M) const;
    // sum_i y_i H_i
    Matrix adjoint(const Vector& y) const;
    // P_Q M = adjoint(G^{-1} apply(M)) via the cached Gram factorization
    Matrix project_span(const Matrix& M) const;

    // Materializes H_i (tests, single-matrix golfing blocks).
    Matrix matrix_at(int i) const;

    // Partial sums over a contiguous row range (golfing blocks).
    Vector apply_rows(int start, int count, const Matrix& M) const;
    Matrix adjoint_rows(int start, int count, const Vector& y) const;

private:
    MeasurementEnsemble() = default;
    void build_gram();
    void fill_row(int i, double* dst) const;

    int m_ = 0, n_ = 0, q_ = 0;
    Storage storage_ = Storage::Dense;
    std::uint64_t seed_ = 0;
    bool seeded_ = false;  // false for from_matrices ensembles
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> H_;
    Eigen::LLT<Matrix> gram_llt_;
    bool has_gram_ = false;
};

// One of the structured subspaces: the nuclear-norm tangent space at a rank-r
// point, an entrywise support, an explicit orthonormal basis, or a sum of
// descriptors (pooled and re-orthonormalized).
class SubspaceDescriptor {
public:
    enum class Kind { NuclearTangent, Support, ExplicitBasis, DirectSum };

    static SubspaceDescriptor nuclear_tangent(const Matrix& U, const Matrix& V);
    static SubspaceDescriptor support(int m, int n,
                                      const std::vector<std::pair<int, int>>& indices);
    // B: (m*n) x d with orthonormal columns (each column a vectorized matrix)
    static SubspaceDescriptor explicit_basis(int m, int n, const Matrix& B);
    static SubspaceDescriptor direct_sum(const std::vector<SubspaceDescriptor>& parts);

    Kind kind() const { return kind_; }
    int rows() const { return m_; }
    int cols() const { return n_; }
    int dim() const { return dim_; }

    Matrix project(const Matrix& M) const;
    Matrix project_complement(const Matrix& M) const;

    // Orthonormal basis of the subspace as an (m*n) x dim matrix. Built on
    // demand for the closed-form variants, cached thereafter.
    const Matrix& basis() const;

    // DirectSum only: true when the pooled summands were linearly independent
    // (rank equalled the sum of the summand dimensions).
    bool summands_independent() const { return independent_; }

private:
    SubspaceDescriptor() = default;
    Kind kind_ = Kind::ExplicitBasis;
    int m_ = 0, n_ = 0, dim_ = 0;
    Matrix U_, V_;                               // NuclearTangent
    std::vector<std::pair<int, int>> indices_;   // Support
    Eigen::ArrayXXd mask_;                       // Support (0/1)
    bool independent_ = true;
    struct BasisCache;
    std::shared_ptr<BasisCache> cache_;          // lazily filled, immutable view
};

// ||P_A P_B|| estimated by power iteration on M -> P_B P_A P_B M until the
// Rayleigh quotient moves by less than tol. Throws ConvergenceError after
// max_iters sweeps on a near-degenerate spectrum.
double subspace_angle(const SubspaceDescriptor& A, const SubspaceDescriptor& B,
                      double tol = 1e-8, int max_iters = 500);

// A_j[M] = sum_{i in I_j} H_i <H_i, M> over a contiguous index block, plus the
// unit-expectation rescaling (mn/gamma) A_j[M].
class GolfingBlock {
public:
    GolfingBlock(const MeasurementEnsemble& ens, int start, int count);
    int size() const { return count_; }
    Matrix apply(const Matrix& M) const;
    Matrix apply_rescaled(const Matrix& M) const;

private:
    const MeasurementEnsemble* ens_;
    int start_, count_;
};

}  // namespace cpcp
