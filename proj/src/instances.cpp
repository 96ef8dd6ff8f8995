#include "cpcp/instances.hpp"
#include "cpcp/errors.hpp"
#include "cpcp/rng.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace cpcp {

LowRankInstance gen_low_rank(int m, int n, int r, std::uint64_t seed) {
    if (m <= 0 || n <= 0) throw PreconditionError("gen_low_rank: dimensions must be positive");
    if (r < 1 || r > std::min(m, n))
        throw PreconditionError("gen_low_rank: rank out of range [1, min(m,n)]");

    Rng rng(seed);
    Matrix A(m, r), B(n, r);
    for (int i = 0; i < m * r; ++i) A.data()[i] = rng.gaussian();
    for (int i = 0; i < n * r; ++i) B.data()[i] = rng.gaussian();

    LowRankInstance inst;
    inst.L = A * B.transpose();
    Eigen::JacobiSVD<Matrix> svd(inst.L, Eigen::ComputeThinU | Eigen::ComputeThinV);
    inst.U = svd.matrixU().leftCols(r);
    inst.V = svd.matrixV().leftCols(r);
    inst.sigma = svd.singularValues().head(r);
    inst.rank = r;
    return inst;
}

LowRankInstance make_low_rank(const Matrix& U, const Vector& sigma, const Matrix& V) {
    const int r = static_cast<int>(sigma.size());
    if (U.cols() != r || V.cols() != r)
        throw PreconditionError("make_low_rank: factor widths must match sigma length");
    if (r < 1) throw PreconditionError("make_low_rank: empty factorization");
    if (sigma.minCoeff() <= 0.0) throw PreconditionError("make_low_rank: sigma must be positive");
    const double ortho_u = (U.transpose() * U - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
    const double ortho_v = (V.transpose() * V - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
    if (ortho_u > 1e-10 || ortho_v > 1e-10)
        throw PreconditionError("make_low_rank: factors are not orthonormal");

    LowRankInstance inst;
    inst.U = U;
    inst.V = V;
    inst.sigma = sigma;
    inst.rank = r;
    inst.L = U * sigma.asDiagonal() * V.transpose();
    return inst;
}

SparseInstance gen_sparse(int m, int n, double rho, double magnitude, std::uint64_t seed) {
    if (m <= 0 || n <= 0) throw PreconditionError("gen_sparse: dimensions must be positive");
    if (rho < 0.0 || rho >= 1.0) throw PreconditionError("gen_sparse: rho must lie in [0, 1)");
    if (magnitude <= 0.0) throw PreconditionError("gen_sparse: magnitude must be positive");

    Rng rng(seed);
    SparseInstance inst;
    inst.S = Matrix::Zero(m, n);
    inst.rho = rho;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            if (rng.uniform() < rho) {
                const int sign = rng.uniform() < 0.5 ? -1 : 1;
                inst.S(i, j) = magnitude * sign;
                inst.support.emplace_back(i, j);
                inst.signs.push_back(sign);
            }
        }
    }
    return inst;
}

IncoherenceScore incoherence_mu(const LowRankInstance& inst) {
    const int m = static_cast<int>(inst.U.rows());
    const int n = static_cast<int>(inst.V.rows());
    const int r = inst.rank;
    if (r < 1) throw PreconditionError("incoherence_mu: invalid instance");

    IncoherenceScore sc;
    sc.mu_row = (static_cast<double>(m) / r) * inst.U.rowwise().squaredNorm().maxCoeff();
    sc.mu_col = (static_cast<double>(n) / r) * inst.V.rowwise().squaredNorm().maxCoeff();
    const double uv_inf = (inst.U * inst.V.transpose()).cwiseAbs().maxCoeff();
    sc.mu_entry = (static_cast<double>(m) * n / r) * uv_inf * uv_inf;
    sc.mu = std::max(sc.mu_row, std::max(sc.mu_col, sc.mu_entry));
    return sc;
}

}  // namespace cpcp
