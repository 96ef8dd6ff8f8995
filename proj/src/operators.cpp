#include "cpcp/operators.hpp"
#include "cpcp/errors.hpp"
#include "cpcp/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <mutex>

namespace cpcp {

namespace {
constexpr int kStreamChunk = 256;  // rows regenerated at a time in streamed mode
}

// --------------------------------------------------------------------------
// MeasurementEnsemble

MeasurementEnsemble::MeasurementEnsemble(int m, int n, int q, std::uint64_t seed,
                                         Storage storage) {
    if (m <= 0 || n <= 0 || q <= 0)
        throw PreconditionError("MeasurementEnsemble: dimensions must be positive");
    m_ = m;
    n_ = n;
    q_ = q;
    seed_ = seed;
    seeded_ = true;
    storage_ = storage;
    if (storage_ == Storage::Dense) {
        H_.resize(q_, m_ * n_);
        for (int i = 0; i < q_; ++i) fill_row(i, H_.row(i).data());
        build_gram();
    }
    // Streamed mode defers everything to apply/adjoint; span projection is
    // only legal when it short-circuits (q >= mn).
}

MeasurementEnsemble MeasurementEnsemble::from_matrices(const std::vector<Matrix>& mats) {
    if (mats.empty()) throw PreconditionError("MeasurementEnsemble: empty matrix list");
    MeasurementEnsemble ens;
    ens.m_ = static_cast<int>(mats[0].rows());
    ens.n_ = static_cast<int>(mats[0].cols());
    ens.q_ = static_cast<int>(mats.size());
    ens.storage_ = Storage::Dense;
    ens.seeded_ = false;
    ens.H_.resize(ens.q_, ens.m_ * ens.n_);
    for (int i = 0; i < ens.q_; ++i) {
        if (mats[i].rows() != ens.m_ || mats[i].cols() != ens.n_)
            throw PreconditionError("MeasurementEnsemble: inconsistent matrix shapes");
        ens.H_.row(i) = vec_view(mats[i]).transpose();
    }
    ens.build_gram();
    return ens;
}

void MeasurementEnsemble::fill_row(int i, double* dst) const {
    Rng rng(mix_seed({seed_, static_cast<std::uint64_t>(i)}));
    const double scale = 1.0 / std::sqrt(static_cast<double>(m_) * n_);
    const int mn = m_ * n_;
    for (int k = 0; k < mn; ++k) dst[k] = scale * rng.gaussian();
}

void MeasurementEnsemble::build_gram() {
    if (spans_everything()) return;  // projection short-circuits to identity
    Matrix G = H_ * H_.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(G, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 1e-12 * hi))
        throw PreconditionError("MeasurementEnsemble: Gram matrix is numerically singular");
    gram_llt_.compute(G);
    has_gram_ = true;
}

Vector MeasurementEnsemble::apply(const Matrix& M) const {
    return apply_rows(0, q_, M);
}

Vector MeasurementEnsemble::apply_rows(int start, int count, const Matrix& M) const {
    if (M.rows() != m_ || M.cols() != n_)
        throw PreconditionError("MeasurementEnsemble::apply: dimension mismatch");
    if (start < 0 || count <= 0 || start + count > q_)
        throw PreconditionError("MeasurementEnsemble::apply: row range out of bounds");
    const Eigen::Map<const Vector> v = vec_view(M);
    if (storage_ == Storage::Dense) return H_.middleRows(start, count) * v;

    Vector y(count);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> chunk(
        std::min(count, kStreamChunk), m_ * n_);
    for (int base = 0; base < count; base += kStreamChunk) {
        const int c = std::min(kStreamChunk, count - base);
        for (int i = 0; i < c; ++i) fill_row(start + base + i, chunk.row(i).data());
        y.segment(base, c) = chunk.topRows(c) * v;
    }
    return y;
}

Matrix MeasurementEnsemble::adjoint(const Vector& y) const {
    return adjoint_rows(0, q_, y);
}

Matrix MeasurementEnsemble::adjoint_rows(int start, int count, const Vector& y) const {
    if (y.size() != count)
        throw PreconditionError("MeasurementEnsemble::adjoint: coefficient length mismatch");
    if (start < 0 || count <= 0 || start + count > q_)
        throw PreconditionError("MeasurementEnsemble::adjoint: row range out of bounds");
    if (storage_ == Storage::Dense) {
        Vector v = H_.middleRows(start, count).transpose() * y;
        return unvec(v, m_, n_);
    }
    Vector v = Vector::Zero(m_ * n_);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> chunk(
        std::min(count, kStreamChunk), m_ * n_);
    for (int base = 0; base < count; base += kStreamChunk) {
        const int c = std::min(kStreamChunk, count - base);
        for (int i = 0; i < c; ++i) fill_row(start + base + i, chunk.row(i).data());
        v.noalias() += chunk.topRows(c).transpose() * y.segment(base, c);
    }
    return unvec(v, m_, n_);
}

Matrix MeasurementEnsemble::project_span(const Matrix& M) const {
    if (M.rows() != m_ || M.cols() != n_)
        throw PreconditionError("MeasurementEnsemble::project_span: dimension mismatch");
    if (spans_everything()) return M;
    if (!has_gram_)
        throw PreconditionError(
            "MeasurementEnsemble::project_span: unavailable in streamed storage");
    return adjoint(gram_llt_.solve(apply(M)));
}

Matrix MeasurementEnsemble::matrix_at(int i) const {
    if (i < 0 || i >= q_) throw PreconditionError("MeasurementEnsemble::matrix_at: bad index");
    if (storage_ == Storage::Dense) {
        Vector v = H_.row(i).transpose();
        return unvec(v, m_, n_);
    }
    Vector v(m_ * n_);
    fill_row(i, v.data());
    return unvec(v, m_, n_);
}

// --------------------------------------------------------------------------
// SubspaceDescriptor

struct SubspaceDescriptor::BasisCache {
    std::once_flag once;
    Matrix basis;
};

namespace {

// Completes r orthonormal columns to a full orthonormal square factor whose
// leading columns span the same space.
Matrix complete_orthonormal(const Matrix& W) {
    const int m = static_cast<int>(W.rows());
    Matrix stacked(m, W.cols() + m);
    stacked << W, Matrix::Identity(m, m);
    Eigen::HouseholderQR<Matrix> qr(stacked);
    Matrix Q = qr.householderQ() * Matrix::Identity(m, m);
    // Fix signs so the leading block spans range(W) with a consistent
    // orientation (Householder QR may flip columns).
    return Q;
}

Matrix tangent_basis(const Matrix& U, const Matrix& V) {
    const int m = static_cast<int>(U.rows());
    const int n = static_cast<int>(V.rows());
    const int r = static_cast<int>(U.cols());
    Matrix Uf = complete_orthonormal(U);
    Matrix Vf = complete_orthonormal(V);
    const int d = r * (m + n - r);
    Matrix B(m * n, d);
    int c = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i >= r && j >= r) continue;
            Matrix outer = Uf.col(i) * Vf.col(j).transpose();
            B.col(c++) = vec_view(outer);
        }
    }
    return B;
}

}  // namespace

SubspaceDescriptor SubspaceDescriptor::nuclear_tangent(const Matrix& U, const Matrix& V) {
    if (U.cols() != V.cols() || U.cols() < 1)
        throw PreconditionError("nuclear_tangent: factor widths must match and be positive");
    const int r = static_cast<int>(U.cols());
    const double ou = (U.transpose() * U - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
    const double ov = (V.transpose() * V - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
    if (ou > 1e-10 || ov > 1e-10)
        throw PreconditionError("nuclear_tangent: factors are not orthonormal");
    SubspaceDescriptor d;
    d.kind_ = Kind::NuclearTangent;
    d.m_ = static_cast<int>(U.rows());
    d.n_ = static_cast<int>(V.rows());
    d.U_ = U;
    d.V_ = V;
    d.dim_ = r * (d.m_ + d.n_ - r);
    d.cache_ = std::make_shared<BasisCache>();
    return d;
}

SubspaceDescriptor SubspaceDescriptor::support(
    int m, int n, const std::vector<std::pair<int, int>>& indices) {
    SubspaceDescriptor d;
    d.kind_ = Kind::Support;
    d.m_ = m;
    d.n_ = n;
    d.indices_ = indices;
    d.mask_ = Eigen::ArrayXXd::Zero(m, n);
    for (auto [i, j] : indices) {
        if (i < 0 || i >= m || j < 0 || j >= n)
            throw PreconditionError("support: index out of range");
        d.mask_(i, j) = 1.0;
    }
    d.dim_ = static_cast<int>(indices.size());
    d.cache_ = std::make_shared<BasisCache>();
    return d;
}

SubspaceDescriptor SubspaceDescriptor::explicit_basis(int m, int n, const Matrix& B) {
    if (B.rows() != static_cast<long>(m) * n)
        throw PreconditionError("explicit_basis: basis rows must equal m*n");
    if (B.cols() > 0) {
        const Matrix gram = B.transpose() * B;
        const double dev =
            (gram - Matrix::Identity(B.cols(), B.cols())).cwiseAbs().maxCoeff();
        if (dev > 1e-10)
            throw PreconditionError("explicit_basis: columns are not orthonormal");
    }
    SubspaceDescriptor d;
    d.kind_ = Kind::ExplicitBasis;
    d.m_ = m;
    d.n_ = n;
    d.dim_ = static_cast<int>(B.cols());
    d.cache_ = std::make_shared<BasisCache>();
    d.cache_->basis = B;
    std::call_once(d.cache_->once, [] {});  // mark filled
    return d;
}

SubspaceDescriptor SubspaceDescriptor::direct_sum(
    const std::vector<SubspaceDescriptor>& parts) {
    if (parts.empty()) throw PreconditionError("direct_sum: no summands");
    const int m = parts[0].rows(), n = parts[0].cols();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rows() != m || p.cols() != n)
            throw PreconditionError("direct_sum: summand shape mismatch");
        total += p.dim();
    }
    Matrix pooled(static_cast<long>(m) * n, total);
    int c = 0;
    for (const auto& p : parts) {
        pooled.middleCols(c, p.dim()) = p.basis();
        c += p.dim();
    }
    // Rank-revealing QR with drop tolerance doubles as the independence test.
    Eigen::ColPivHouseholderQR<Matrix> qr(pooled);
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    Matrix Q = qr.householderQ() * Matrix::Identity(pooled.rows(), rank);

    SubspaceDescriptor d;
    d.kind_ = Kind::DirectSum;
    d.m_ = m;
    d.n_ = n;
    d.dim_ = rank;
    d.independent_ = (rank == total);
    d.cache_ = std::make_shared<BasisCache>();
    d.cache_->basis = Q;
    std::call_once(d.cache_->once, [] {});
    return d;
}

Matrix SubspaceDescriptor::project(const Matrix& M) const {
    if (M.rows() != m_ || M.cols() != n_)
        throw PreconditionError("SubspaceDescriptor::project: dimension mismatch");
    switch (kind_) {
        case Kind::NuclearTangent: {
            Matrix UUtM = U_ * (U_.transpose() * M);
            Matrix MVVt = (M * V_) * V_.transpose();
            Matrix UUtMVVt = U_ * ((U_.transpose() * M) * V_) * V_.transpose();
            return UUtM + MVVt - UUtMVVt;
        }
        case Kind::Support:
            return (M.array() * mask_).matrix();
        case Kind::ExplicitBasis:
        case Kind::DirectSum: {
            const Matrix& B = cache_->basis;
            if (B.cols() == 0) return Matrix::Zero(m_, n_);
            Vector v = B * (B.transpose() * vec_view(M));
            return unvec(v, m_, n_);
        }
    }
    throw PreconditionError("SubspaceDescriptor::project: bad kind");
}

Matrix SubspaceDescriptor::project_complement(const Matrix& M) const {
    return M - project(M);
}

const Matrix& SubspaceDescriptor::basis() const {
    std::call_once(cache_->once, [this] {
        if (kind_ == Kind::NuclearTangent) {
            cache_->basis = tangent_basis(U_, V_);
        } else if (kind_ == Kind::Support) {
            Matrix B = Matrix::Zero(static_cast<long>(m_) * n_, dim_);
            for (int k = 0; k < dim_; ++k) {
                auto [i, j] = indices_[k];
                B(static_cast<long>(j) * m_ + i, k) = 1.0;  // column-major vec
            }
            cache_->basis = std::move(B);
        }
        // ExplicitBasis / DirectSum are filled at construction.
    });
    return cache_->basis;
}

double subspace_angle(const SubspaceDescriptor& A, const SubspaceDescriptor& B,
                      double tol, int max_iters) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw PreconditionError("subspace_angle: dimension mismatch");
    if (A.dim() == 0 || B.dim() == 0) return 0.0;

    Rng rng(0x5ab5bacea4417e5fULL);
    Matrix X(A.rows(), A.cols());
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.gaussian();
    X = B.project(X);
    double nx = X.norm();
    if (nx < 1e-300) return 0.0;
    X /= nx;

    double rayleigh_prev = -1.0;
    for (int it = 0; it < max_iters; ++it) {
        Matrix Y = B.project(A.project(B.project(X)));
        const double rayleigh = vec_view(X).dot(vec_view(Y));
        const double ny = Y.norm();
        if (ny < 1e-300) return 0.0;  // orthogonal subspaces
        if (std::abs(rayleigh - rayleigh_prev) < tol)
            return std::sqrt(std::max(rayleigh, 0.0));
        rayleigh_prev = rayleigh;
        X = Y / ny;
    }
    throw ConvergenceError("subspace_angle: power iteration did not settle");
}

// --------------------------------------------------------------------------
// GolfingBlock

GolfingBlock::GolfingBlock(const MeasurementEnsemble& ens, int start, int count)
    : ens_(&ens), start_(start), count_(count) {
    if (count <= 0) throw PreconditionError("GolfingBlock: empty index set");
    if (start < 0 || start + count > ens.size())
        throw PreconditionError("GolfingBlock: index range out of bounds");
}

Matrix GolfingBlock::apply(const Matrix& M) const {
    return ens_->adjoint_rows(start_, count_, ens_->apply_rows(start_, count_, M));
}

Matrix GolfingBlock::apply_rescaled(const Matrix& M) const {
    const double scale =
        static_cast<double>(ens_->rows()) * ens_->cols() / static_cast<double>(count_);
    return scale * apply(M);
}

}  // namespace cpcp
