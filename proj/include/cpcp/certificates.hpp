#pragma once
#include "cpcp/instances.hpp"
#include "cpcp/operators.hpp"

#include <cstdint>
#include <vector>

namespace cpcp {

enum class DualNorm { OperatorNorm, MaxAbs };

// One decomposable-norm term: subdifferential anchor S_i on subspace T_i with
// dual-norm ball on the complement, weighted by lambda_i.
struct DecomposableData {
    SubspaceDescriptor subspace;
    Matrix anchor;       // lies in subspace
    DualNorm dual_norm;  // OperatorNorm for tangent terms, MaxAbs for supports
    double weight;       // lambda_i > 0

    void validate() const;
};

// The two PCP terms: (tangent of L0, U V^T, operator norm, 1) and
// (support of S0, sign(S0), max-abs, lambda).
std::vector<DecomposableData> pcp_terms(const LowRankInstance& lr,
                                        const SparseInstance& sp, double lambda);

struct CertificateReport {
    std::vector<double> alphas;  // ||P_Ti Lambda - lambda_i S_i||_F per term
    std::vector<double> betas;   // ||P_Ti_perp Lambda||*(i) / lambda_i per term
    double q_residual = 0.0;     // ||P_Q_perp Lambda||_F, 0 when no ensemble
    double alpha = 0.0;          // max of alphas
    double beta = 0.0;           // max of betas
};

CertificateReport score_certificate(const Matrix& Lambda,
                                    const std::vector<DecomposableData>& terms,
                                    const MeasurementEnsemble* ens = nullptr);

struct PcpCertificate {
    Matrix Lambda;  // U V^T + WL + WS
    Matrix WL;
    Matrix WS;
};

// Support-splitting construction: WL from a golfing recursion over a Bernoulli
// partition of the support complement, WS as the least-norm solution of
// P_T WS = 0, P_Omega WS = lambda sign(S0) via its Neumann series.
// j0 <= 0 selects the default ceil(3 log2 m).
PcpCertificate build_pcp_certificate(const LowRankInstance& lr, const SparseInstance& sp,
                                     double lambda, int j0, std::uint64_t seed);

struct GolfingResult {
    Matrix Lambda_star;               // lies in span(Q) by construction
    std::vector<double> error_norms;  // ||E_j||_F after each block
    bool contraction_ok = true;       // false if any step grew the error
};

// Iterative certificate refinement over k disjoint measurement blocks of size
// gamma = floor(q / k): Lambda_j = Lambda_{j-1} - (mn/gamma) A_j E_{j-1} with
// E_j = P_S Lambda_j - Lambda_hat, S the sum of the term subspaces and
// span(Lambda_hat), starting from E_0 = -Lambda_hat.
// k <= 0 selects the default ceil(3 log2 m).
GolfingResult golfing_upgrade(const Matrix& Lambda_hat,
                              const std::vector<DecomposableData>& terms,
                              const MeasurementEnsemble& ens, int k = 0);

// Least-norm correction making the anchors exact and the span residual zero:
// Delta_0 from the stacked orthonormal-basis system P_Ti Delta = lambda_i S_i
// - P_Ti Lambda_hat, then Delta_star = P_Q sum_i (P_A P_Q_perp P_A)^i Delta_0
// with A the sum of the term subspaces. Returns Lambda_hat + Delta_star.
Matrix exact_upgrade(const Matrix& Lambda_hat, const std::vector<DecomposableData>& terms,
                     const MeasurementEnsemble& ens);

struct OptimalityVerdict {
    bool anchors_ok = false;      // P_Ti Lambda = lambda_i S_i within tol
    bool dual_norms_ok = false;   // ||P_Ti_perp Lambda||*(i) < lambda_i strictly
    bool span_ok = false;         // P_Q_perp Lambda = 0 within tol
    bool independent = false;     // pooled term bases have full rank
    bool pass = false;
    std::vector<double> anchor_residuals;
    std::vector<double> beta_margins;  // lambda_i - ||P_Ti_perp Lambda||*(i)
    double q_residual = 0.0;
};

// Reconstructs the decomposable terms from (L, S) -- tangent from L's SVD with
// singular values above 1e-6 of the largest, support from entries above 1e-6
// of the largest magnitude -- and checks the uniqueness conditions.
// lambda_sparse <= 0 selects 1/sqrt(rows).
OptimalityVerdict verify_optimality(const Matrix& L, const Matrix& S, const Matrix& Lambda,
                                    const MeasurementEnsemble* ens, double tol,
                                    double lambda_sparse = -1.0);

struct DualNormEstimate {
    double estimate = 0.0;        // Monte-Carlo mean of ||G||*
    double analytic_bound = 0.0;  // 2 sqrt(max(m,n)) or 3 sqrt(2 log max(m,n))
};

DualNormEstimate expected_dual_norm(DualNorm tag, int m, int n, int trials,
                                    std::uint64_t seed);

}  // namespace cpcp
