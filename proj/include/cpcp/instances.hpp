#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace cpcp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Rank-r matrix together with its thin SVD factors.
struct LowRankInstance {
    Matrix L;      // m x n
    Matrix U;      // m x r, orthonormal columns
    Matrix V;      // n x r, orthonormal columns
    Vector sigma;  // r positive singular values
    int rank = 0;
};

// Bernoulli-Rademacher sparse matrix.
struct SparseInstance {
    Matrix S;                                      // m x n
    std::vector<std::pair<int, int>> support;      // (row, col) of nonzeros
    std::vector<int> signs;                        // +/-1 per support entry
    double rho = 0.0;                              // Bernoulli parameter used
};

struct IncoherenceScore {
    double mu_row = 0.0;
    double mu_col = 0.0;
    double mu_entry = 0.0;
    double mu = 0.0;  // max of the three
};

// L = A * B^T with iid standard Gaussian factors, re-factored through a thin
// SVD so (U, sigma, V) are consistent. Deterministic given seed.
LowRankInstance gen_low_rank(int m, int n, int r, std::uint64_t seed);

// Builds an instance from explicit factors (validates orthonormality).
LowRankInstance make_low_rank(const Matrix& U, const Vector& sigma, const Matrix& V);

// Each entry independently nonzero with probability rho; nonzero value is
// magnitude * (+/-1 with equal probability).
SparseInstance gen_sparse(int m, int n, double rho, double magnitude, std::uint64_t seed);

// Tight incoherence constants of the singular factors:
//   mu_row = (m/r) max_i ||U^T e_i||^2, mu_col = (n/r) max_j ||V^T e_j||^2,
//   mu_entry = (mn/r) ||U V^T||_inf^2.
IncoherenceScore incoherence_mu(const LowRankInstance& inst);

}  // namespace cpcp
