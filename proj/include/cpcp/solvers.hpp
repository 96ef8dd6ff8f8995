#pragma once
#include "cpcp/operators.hpp"

#include <vector>

namespace cpcp {

struct SolverConfig {
    // <= 0 means "use 1/sqrt(m)" resolved at solve time
    double lambda = -1.0;
    double mu0_scale = 0.99;          // mu0 = mu0_scale * ||d||_2
    double continuation_factor = 0.9; // mu shrink per outer stage
    double mu_min_ratio = 1e-8;       // final mu = mu0 * mu_min_ratio
    int max_iters = 5000;
    double rel_tol = 1e-7;
    double step_safety = 0.99;
    // Extra continuation knob: cap on inner iterations per stage before the
    // smoothing parameter is forced down. 0 = unlimited (stages end only on
    // rel_tol). Compressive runs at desk scale want ~120 here.
    int stage_max_iters = 0;

    void validate() const;
};

enum class SolveStatus { Converged, MaxIters, Diverged };

struct SolveResult {
    Matrix L;
    Matrix S;
    int iterations = 0;
    double final_mu = 0.0;
    std::vector<double> residual_history;  // ||Q[L+S]-d|| / ||d|| per iteration
    SolveStatus status = SolveStatus::Converged;
};

// prox of tau*||.||_1: entrywise shrinkage
Matrix soft_threshold(const Matrix& M, double tau);
// prox of tau*||.||_*: shrinkage of the singular values
Matrix svt(const Matrix& M, double tau);

// min ||L||_* + lambda ||S||_1 s.t. Q[L+S] = d, solved through the smoothed
// objective ||L||_* + lambda ||S||_1 + 1/(2 mu) ||Q[L+S]-d||^2 with mu driven
// down by continuation; inner loop is accelerated proximal gradient with a
// shared gradient for both blocks.
SolveResult solve_cpcp(const MeasurementEnsemble& ens, const Vector& d, SolverConfig cfg);

// Full-observation variant (L + S = M), same scheme with the identity
// observation; no ensemble is formed.
SolveResult solve_pcp(const Matrix& M, SolverConfig cfg);

}  // namespace cpcp
