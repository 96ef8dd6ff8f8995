#include "cpcp/certificates.hpp"
#include "cpcp/errors.hpp"
#include "cpcp/rng.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace cpcp {

namespace {

constexpr double kNeumannTol = 1e-14;
constexpr int kNeumannMaxTerms = 10000;
constexpr double kNeumannAlarm = 1e-10;

double dual_norm_value(const Matrix& M, DualNorm tag) {
    if (tag == DualNorm::MaxAbs) return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
    Eigen::BDCSVD<Matrix> svd(M);
    return svd.singularValues().size() == 0 ? 0.0 : svd.singularValues()(0);
}

int default_depth(int m) {
    return static_cast<int>(std::ceil(3.0 * std::log2(static_cast<double>(m))));
}

}  // namespace

void DecomposableData::validate() const {
    if (weight <= 0.0) throw PreconditionError("DecomposableData: weight must be positive");
    if (anchor.rows() != subspace.rows() || anchor.cols() != subspace.cols())
        throw PreconditionError("DecomposableData: anchor shape mismatch");
    const double off = (anchor - subspace.project(anchor)).cwiseAbs().maxCoeff();
    if (off > 1e-10)
        throw PreconditionError("DecomposableData: anchor does not lie in the subspace");
    const bool tangent = subspace.kind() == SubspaceDescriptor::Kind::NuclearTangent;
    const bool support = subspace.kind() == SubspaceDescriptor::Kind::Support;
    if ((tangent && dual_norm != DualNorm::OperatorNorm) ||
        (support && dual_norm != DualNorm::MaxAbs))
        throw PreconditionError("DecomposableData: dual norm does not match subspace kind");
}

std::vector<DecomposableData> pcp_terms(const LowRankInstance& lr, const SparseInstance& sp,
                                        double lambda) {
    std::vector<DecomposableData> terms;
    DecomposableData nuclear{SubspaceDescriptor::nuclear_tangent(lr.U, lr.V),
                             lr.U * lr.V.transpose(), DualNorm::OperatorNorm, 1.0};
    terms.push_back(std::move(nuclear));
    const int m = static_cast<int>(sp.S.rows());
    const int n = static_cast<int>(sp.S.cols());
    Matrix sign = sp.S.unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
    DecomposableData ell1{SubspaceDescriptor::support(m, n, sp.support), sign,
                          DualNorm::MaxAbs, lambda};
    terms.push_back(std::move(ell1));
    return terms;
}

CertificateReport score_certificate(const Matrix& Lambda,
                                    const std::vector<DecomposableData>& terms,
                                    const MeasurementEnsemble* ens) {
    CertificateReport rep;
    for (const auto& t : terms) {
        if (Lambda.rows() != t.subspace.rows() || Lambda.cols() != t.subspace.cols())
            throw PreconditionError("score_certificate: dimension mismatch");
        rep.alphas.push_back((t.subspace.project(Lambda) - t.weight * t.anchor).norm());
        rep.betas.push_back(
            dual_norm_value(t.subspace.project_complement(Lambda), t.dual_norm) / t.weight);
    }
    if (ens) rep.q_residual = (Lambda - ens->project_span(Lambda)).norm();
    rep.alpha = rep.alphas.empty() ? 0.0
                                   : *std::max_element(rep.alphas.begin(), rep.alphas.end());
    rep.beta =
        rep.betas.empty() ? 0.0 : *std::max_element(rep.betas.begin(), rep.betas.end());
    return rep;
}

PcpCertificate build_pcp_certificate(const LowRankInstance& lr, const SparseInstance& sp,
                                     double lambda, int j0, std::uint64_t seed) {
    const int m = static_cast<int>(lr.L.rows());
    const int n = static_cast<int>(lr.L.cols());
    if (lr.rank < 1) throw PreconditionError("build_pcp_certificate: L0 must be nonzero");
    if (sp.S.rows() != m || sp.S.cols() != n)
        throw PreconditionError("build_pcp_certificate: instance shape mismatch");
    if (j0 <= 0) j0 = default_depth(m);

    SubspaceDescriptor T = SubspaceDescriptor::nuclear_tangent(lr.U, lr.V);
    SubspaceDescriptor Omega = SubspaceDescriptor::support(m, n, sp.support);
    if (!sp.support.empty()) {
        const double angle = subspace_angle(Omega, T);
        if (angle >= 1.0 - 1e-6)
            throw ConvergenceError(
                "build_pcp_certificate: ||P_Omega P_T|| too close to 1, series diverges");
    }

    // Partition the support complement into j0 Bernoulli(qb) rounds, coupled
    // to the given support: an entry is on-support exactly when it falls in no
    // round, so off-support entries draw their j0 indicators conditioned on at
    // least one inclusion. rho = 0 has no conditioning constraint; any valid
    // qb works and we fix 1/2.
    const double rho = sp.rho;
    const double qb = rho > 0.0 ? 1.0 - std::pow(rho, 1.0 / j0) : 0.5;
    if (!(qb > 0.0 && qb < 1.0))
        throw PreconditionError("build_pcp_certificate: Bernoulli partition parameter "
                                "outside (0,1)");

    Rng rng(seed);
    std::vector<Eigen::ArrayXXd> rounds(j0, Eigen::ArrayXXd::Zero(m, n));
    Matrix sign = sp.S.unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            if (sign(i, j) != 0.0) continue;  // on-support: in no round
            bool any = false;
            std::vector<bool> inc(j0);
            while (!any) {
                for (int t = 0; t < j0; ++t) {
                    inc[t] = rng.uniform() < qb;
                    any = any || inc[t];
                }
            }
            for (int t = 0; t < j0; ++t)
                if (inc[t]) rounds[t](i, j) = 1.0;
        }
    }

    const Matrix UV = lr.U * lr.V.transpose();
    Matrix Y = Matrix::Zero(m, n);
    for (int t = 0; t < j0; ++t) {
        Matrix Z = T.project(Y) - UV;
        Y -= (1.0 / qb) * (Z.array() * rounds[t]).matrix();
    }
    PcpCertificate cert;
    cert.WL = T.project_complement(Y);

    // WS = P_T_perp sum_j (P_Omega P_T P_Omega)^j [lambda sign(S0)]
    Matrix acc = Matrix::Zero(m, n);
    Matrix term = lambda * sign;
    int used = 0;
    for (; used < kNeumannMaxTerms && term.norm() >= kNeumannTol; ++used) {
        acc += term;
        term = Omega.project(T.project(term));
    }
    if (term.norm() > kNeumannAlarm)
        throw ConvergenceError("build_pcp_certificate: Neumann series did not converge");
    cert.WS = T.project_complement(acc);

    cert.Lambda = UV + cert.WL + cert.WS;
    return cert;
}

GolfingResult golfing_upgrade(const Matrix& Lambda_hat,
                              const std::vector<DecomposableData>& terms,
                              const MeasurementEnsemble& ens, int k) {
    if (terms.empty()) throw PreconditionError("golfing_upgrade: no terms");
    const int m = ens.rows(), n = ens.cols();
    if (Lambda_hat.rows() != m || Lambda_hat.cols() != n)
        throw PreconditionError("golfing_upgrade: dimension mismatch");
    if (k <= 0) k = default_depth(m);
    const int gamma = ens.size() / k;
    if (gamma < 1)
        throw PreconditionError("golfing_upgrade: fewer measurements than blocks");

    GolfingResult res;
    if (Lambda_hat.norm() == 0.0) {
        res.Lambda_star = Matrix::Zero(m, n);
        res.error_norms.assign(k, 0.0);
        return res;
    }

    std::vector<SubspaceDescriptor> parts;
    for (const auto& t : terms) parts.push_back(t.subspace);
    Matrix span_col = Lambda_hat / Lambda_hat.norm();
    Matrix B(static_cast<long>(m) * n, 1);
    B.col(0) = vec_view(span_col);
    parts.push_back(SubspaceDescriptor::explicit_basis(m, n, B));
    SubspaceDescriptor S = SubspaceDescriptor::direct_sum(parts);

    Matrix Lambda = Matrix::Zero(m, n);
    Matrix E = -Lambda_hat;
    double prev = E.norm();
    for (int j = 0; j < k; ++j) {
        GolfingBlock block(ens, j * gamma, gamma);
        Lambda -= block.apply_rescaled(E);
        E = S.project(Lambda) - Lambda_hat;
        const double err = E.norm();
        res.error_norms.push_back(err);
        if (err > prev) res.contraction_ok = false;
        prev = err;
    }
    res.Lambda_star = std::move(Lambda);
    return res;
}

Matrix exact_upgrade(const Matrix& Lambda_hat, const std::vector<DecomposableData>& terms,
                     const MeasurementEnsemble& ens) {
    if (terms.empty()) throw PreconditionError("exact_upgrade: no terms");
    const int m = ens.rows(), n = ens.cols();
    if (Lambda_hat.rows() != m || Lambda_hat.cols() != n)
        throw PreconditionError("exact_upgrade: dimension mismatch");
    const int tau = static_cast<int>(terms.size());
    if (tau > 1) {
        const double limit = 1.0 / (tau - 1);
        for (int i = 0; i < tau; ++i)
            for (int j = i + 1; j < tau; ++j)
                if (subspace_angle(terms[i].subspace, terms[j].subspace) >= limit)
                    throw PreconditionError(
                        "exact_upgrade: term subspaces violate the pairwise angle bound");
    }

    // stacked orthonormal-basis system for the least-norm Delta_0
    int total = 0;
    for (const auto& t : terms) total += t.subspace.dim();
    const long mn = static_cast<long>(m) * n;
    Matrix U(mn, total);
    Vector rhs(total);
    int c = 0;
    for (const auto& t : terms) {
        const int d = t.subspace.dim();
        U.middleCols(c, d) = t.subspace.basis();
        Matrix target = t.weight * t.anchor - t.subspace.project(Lambda_hat);
        rhs.segment(c, d) = t.subspace.basis().transpose() * vec_view(target);
        c += d;
    }
    Matrix gram = U.transpose() * U;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw PreconditionError("exact_upgrade: stacked Gram system is singular");
    Vector x = U * ldlt.solve(rhs);
    Matrix Delta0 = unvec(x, m, n);

    std::vector<SubspaceDescriptor> parts;
    for (const auto& t : terms) parts.push_back(t.subspace);
    SubspaceDescriptor A = tau == 1 ? parts[0] : SubspaceDescriptor::direct_sum(parts);

    // Delta_star = P_Q sum_i (P_A P_Q_perp P_A)^i Delta_0
    Matrix acc = Matrix::Zero(m, n);
    Matrix term = Delta0;
    int used = 0;
    for (; used < kNeumannMaxTerms && term.norm() >= kNeumannTol; ++used) {
        acc += term;
        term = A.project(term - ens.project_span(term));
    }
    if (term.norm() > kNeumannAlarm)
        throw ConvergenceError("exact_upgrade: Neumann series did not converge");
    return Lambda_hat + ens.project_span(acc);
}

OptimalityVerdict verify_optimality(const Matrix& L, const Matrix& S, const Matrix& Lambda,
                                    const MeasurementEnsemble* ens, double tol,
                                    double lambda_sparse) {
    if (!L.allFinite() || !S.allFinite() || !Lambda.allFinite())
        throw PreconditionError("verify_optimality: inputs must be finite");
    const int m = static_cast<int>(L.rows());
    const int n = static_cast<int>(L.cols());
    if (lambda_sparse <= 0.0) lambda_sparse = 1.0 / std::sqrt(static_cast<double>(m));

    std::vector<DecomposableData> terms;
    Eigen::BDCSVD<Matrix> svd(L, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    int r = 0;
    if (sv.size() > 0 && sv(0) > 0.0)
        while (r < sv.size() && sv(r) > 1e-6 * sv(0)) ++r;
    if (r > 0) {
        terms.push_back({SubspaceDescriptor::nuclear_tangent(svd.matrixU().leftCols(r),
                                                             svd.matrixV().leftCols(r)),
                         svd.matrixU().leftCols(r) * svd.matrixV().leftCols(r).transpose(),
                         DualNorm::OperatorNorm, 1.0});
    }
    const double s_max = S.cwiseAbs().maxCoeff();
    if (s_max > 0.0) {
        std::vector<std::pair<int, int>> supp;
        Matrix sign = Matrix::Zero(m, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                if (std::abs(S(i, j)) > 1e-6 * s_max) {
                    supp.emplace_back(i, j);
                    sign(i, j) = S(i, j) > 0 ? 1.0 : -1.0;
                }
        terms.push_back({SubspaceDescriptor::support(m, n, supp), sign, DualNorm::MaxAbs,
                         lambda_sparse});
    }

    OptimalityVerdict v;
    v.anchors_ok = true;
    v.dual_norms_ok = true;
    for (const auto& t : terms) {
        const double a = (t.subspace.project(Lambda) - t.weight * t.anchor).norm();
        const double b =
            dual_norm_value(t.subspace.project_complement(Lambda), t.dual_norm);
        v.anchor_residuals.push_back(a);
        v.beta_margins.push_back(t.weight - b);
        if (a > tol) v.anchors_ok = false;
        if (!(b < t.weight)) v.dual_norms_ok = false;
    }
    if (terms.empty()) {
        // vacuous pair: report the full weights as margins
        v.beta_margins = {1.0, lambda_sparse};
    }
    if (ens) {
        v.q_residual = (Lambda - ens->project_span(Lambda)).norm();
        v.span_ok = v.q_residual <= tol;
    } else {
        v.span_ok = true;
    }
    if (terms.size() >= 2) {
        std::vector<SubspaceDescriptor> parts;
        for (const auto& t : terms) parts.push_back(t.subspace);
        v.independent = SubspaceDescriptor::direct_sum(parts).summands_independent();
    } else {
        v.independent = true;
    }
    v.pass = v.anchors_ok && v.dual_norms_ok && v.span_ok && v.independent;
    return v;
}

DualNormEstimate expected_dual_norm(DualNorm tag, int m, int n, int trials,
                                    std::uint64_t seed) {
    if (trials < 1) throw PreconditionError("expected_dual_norm: trials must be >= 1");
    Rng rng(seed);
    double sum = 0.0;
    Matrix G(m, n);
    for (int t = 0; t < trials; ++t) {
        for (long i = 0; i < G.size(); ++i) G.data()[i] = rng.gaussian();
        sum += dual_norm_value(G, tag);
    }
    DualNormEstimate est;
    est.estimate = sum / trials;
    const double d = static_cast<double>(std::max(m, n));
    est.analytic_bound = tag == DualNorm::OperatorNorm
                             ? 2.0 * std::sqrt(d)
                             : 3.0 * std::sqrt(2.0 * std::log(d));
    return est;
}

}  // namespace cpcp
