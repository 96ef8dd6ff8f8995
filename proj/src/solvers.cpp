#include "cpcp/solvers.hpp"
#include "cpcp/errors.hpp"
#include "cpcp/rng.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>

namespace cpcp {

void SolverConfig::validate() const {
    if (mu0_scale <= 0.0) throw PreconditionError("SolverConfig: mu0_scale must be positive");
    if (continuation_factor <= 0.0 || continuation_factor >= 1.0)
        throw PreconditionError("SolverConfig: continuation_factor must lie in (0,1)");
    if (mu_min_ratio <= 0.0 || mu_min_ratio >= 1.0)
        throw PreconditionError("SolverConfig: mu_min_ratio must lie in (0,1)");
    if (max_iters < 1) throw PreconditionError("SolverConfig: max_iters must be >= 1");
    if (rel_tol <= 0.0) throw PreconditionError("SolverConfig: rel_tol must be positive");
    if (step_safety <= 0.0 || step_safety > 1.0)
        throw PreconditionError("SolverConfig: step_safety must lie in (0,1]");
    if (stage_max_iters < 0)
        throw PreconditionError("SolverConfig: stage_max_iters must be >= 0");
}

Matrix soft_threshold(const Matrix& M, double tau) {
    if (tau < 0.0) throw PreconditionError("soft_threshold: tau must be nonnegative");
    return M.unaryExpr([tau](double x) {
        const double mag = std::abs(x) - tau;
        return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
    });
}

namespace {

// svt plus the nuclear norm of the result (saves re-factorizing for the
// objective inside the solver loop).
Matrix svt_impl(const Matrix& M, double tau, double* nuclear_out) {
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector s = svd.singularValues();
    double nuclear = 0.0;
    for (long i = 0; i < s.size(); ++i) {
        s(i) = std::max(s(i) - tau, 0.0);
        nuclear += s(i);
    }
    if (nuclear_out) *nuclear_out = nuclear;
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

// Shared accelerated-proximal-gradient core. The observation enters through
// two callables: resid_norm(X) = ||Q[X]-d||_2 and grad(X) = Q*(Q[X]-d).
template <class ResidNorm, class Grad>
SolveResult apg_core(int m, int n, double norm_d, double lambda, double lip_max,
                     const SolverConfig& cfg, ResidNorm&& resid_norm, Grad&& grad) {
    SolveResult res;
    res.L = Matrix::Zero(m, n);
    res.S = Matrix::Zero(m, n);
    if (norm_d == 0.0) {
        res.status = SolveStatus::Converged;
        return res;
    }

    const double mu0 = cfg.mu0_scale * norm_d;
    const double mu_final = mu0 * cfg.mu_min_ratio;
    double mu = mu0;
    Matrix L = res.L, S = res.S;
    int it = 0;
    double min_resid = std::numeric_limits<double>::infinity();
    bool diverged = false;
    bool converged = false;
    res.residual_history.reserve(cfg.max_iters);

    while (it < cfg.max_iters) {
        // fresh momentum at every continuation stage
        Matrix YL = L, YS = S;
        double t_mom = 1.0;
        double obj_prev = std::numeric_limits<double>::infinity();
        bool stage_done = false;
        int k = 0;
        while (it < cfg.max_iters && (cfg.stage_max_iters == 0 || k < cfg.stage_max_iters)) {
            Matrix G = grad(YL + YS) / mu;
            const double step = cfg.step_safety * mu / lip_max;
            double nuclear = 0.0;
            Matrix Ln = svt_impl(YL - step * G, step, &nuclear);
            Matrix Sn = soft_threshold(YS - step * G, step * lambda);

            const double rn = resid_norm(Ln + Sn);
            const double obj =
                nuclear + lambda * Sn.cwiseAbs().sum() + rn * rn / (2.0 * mu);

            const double t_new = (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom)) / 2.0;
            if (obj > obj_prev) {
                // objective went up: drop the momentum
                YL = Ln;
                YS = Sn;
                t_mom = 1.0;
            } else {
                const double w = (t_mom - 1.0) / t_new;
                YL = Ln + w * (Ln - L);
                YS = Sn + w * (Sn - S);
                t_mom = t_new;
            }
            obj_prev = obj;

            const double dd = std::sqrt((Ln - L).squaredNorm() + (Sn - S).squaredNorm());
            const double sc =
                std::max(1.0, std::sqrt(Ln.squaredNorm() + Sn.squaredNorm()));
            L = std::move(Ln);
            S = std::move(Sn);
            ++it;
            ++k;
            res.residual_history.push_back(rn / norm_d);
            min_resid = std::min(min_resid, rn);
            if (it > 100 && rn > 10.0 * min_resid && rn > 1e-12 * norm_d) {
                diverged = true;
                break;
            }
            if (dd / sc < cfg.rel_tol) {
                stage_done = true;
                break;
            }
        }
        if (diverged) break;
        if (mu <= mu_final * (1.0 + 1e-12)) {
            converged = stage_done;
            break;
        }
        mu = std::max(mu * cfg.continuation_factor, mu_final);
    }

    res.L = std::move(L);
    res.S = std::move(S);
    res.iterations = it;
    res.final_mu = mu;
    res.status = diverged      ? SolveStatus::Diverged
                 : converged   ? SolveStatus::Converged
                               : SolveStatus::MaxIters;
    return res;
}

}  // namespace

Matrix svt(const Matrix& M, double tau) {
    if (tau < 0.0) throw PreconditionError("svt: tau must be nonnegative");
    return svt_impl(M, tau, nullptr);
}

SolveResult solve_cpcp(const MeasurementEnsemble& ens, const Vector& d, SolverConfig cfg) {
    cfg.validate();
    if (d.size() != ens.size())
        throw PreconditionError("solve_cpcp: measurement vector length must equal q");
    const int m = ens.rows(), n = ens.cols();
    const double lambda = cfg.lambda > 0.0 ? cfg.lambda : 1.0 / std::sqrt(double(m));

    // Largest eigenvalue of the joint-block map is 2 ||Q* Q||; estimate the
    // operator factor by 30 power iterations from a fixed seed.
    Rng rng(12345);
    Matrix X(m, n);
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.gaussian();
    X /= X.norm();
    double nv = 1.0;
    for (int i = 0; i < 30; ++i) {
        Matrix Y = ens.adjoint(ens.apply(X));
        nv = Y.norm();
        X = Y / nv;
    }
    const double lip_max = 2.0 * nv;

    return apg_core(
        m, n, d.norm(), lambda, lip_max, cfg,
        [&](const Matrix& Z) { return (ens.apply(Z) - d).norm(); },
        [&](const Matrix& Z) { return ens.adjoint(ens.apply(Z) - d); });
}

SolveResult solve_pcp(const Matrix& M, SolverConfig cfg) {
    cfg.validate();
    if (!M.allFinite()) throw PreconditionError("solve_pcp: input must be finite");
    const int m = static_cast<int>(M.rows()), n = static_cast<int>(M.cols());
    const double lambda = cfg.lambda > 0.0 ? cfg.lambda : 1.0 / std::sqrt(double(m));
    // identity observation: ||Q* Q|| = 1
    return apg_core(
        m, n, M.norm(), lambda, 2.0, cfg,
        [&](const Matrix& Z) { return (Z - M).norm(); },
        [&](const Matrix& Z) { return Matrix(Z - M); });
}

}  // namespace cpcp
