#pragma once
#include "cpcp/certificates.hpp"
#include "cpcp/instances.hpp"
#include "cpcp/solvers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cpcp {

struct SweepConfig {
    int m = 30;
    int n = 30;
    int p = 0;  // withheld measurements; q = m*n - p
    std::vector<int> rank_grid;
    std::vector<double> sparsity_grid;
    int trials = 10;
    double success_tol = 1e-3;
    SolverConfig solver;
    std::uint64_t master_seed = 0;
    std::string output_dir;
    bool full_scale = false;  // permit streamed ensembles past the memory cap
    std::uint64_t mem_cap_bytes = 4ULL << 30;

    void validate() const;
};

struct SweepCell {
    int rank = 0;
    double sparsity = 0.0;
    int successes = 0;
    int trials = 0;
    double mean_rel_err_L = 0.0;
    double mean_rel_err_S = 0.0;
    double mean_iters = 0.0;
};

struct SweepResult {
    // ordered: outer loop over rank_grid, inner over sparsity_grid
    std::vector<SweepCell> cells;
    SweepConfig config_echo;
};

// Fixed 64-bit mixing of (master_seed, rank index, sparsity index, trial),
// making every cell reproducible independent of sweep order.
std::uint64_t sweep_child_seed(std::uint64_t master_seed, int r_idx, int rho_idx,
                               int trial);

SweepResult run_sweep(const SweepConfig& cfg);

// CSV columns exactly:
// rank,sparsity,successes,trials,mean_rel_err_L,mean_rel_err_S,mean_iters
void emit_csv(const SweepResult& res, const std::string& path);
std::vector<SweepCell> parse_sweep_csv(const std::string& path);

// Plain-text P2; width = |rank_grid|, height = |sparsity_grid|, maxval 255,
// pixel = round-half-up(255 * successes / trials), rows in descending
// sparsity so white marks certain recovery.
void emit_pgm(const SweepResult& res, const std::string& path);

// Per trial: build the support-splitting certificate, score it, refine it
// against a fresh ensemble of dimension q = mn - p, score again, attempt the
// exact correction, and run the optimality check; one CSV row per trial.
void run_certificate_audit(int m, int n, int r, double rho, int p, int trials,
                           std::uint64_t seed, const std::string& out_path);

struct LemmaCheckRow {
    std::string check;
    int gamma = 0;
    int passes = 0;
    int trials = 0;
};

// Statistical verifiers for the block-isometry and off-space leakage bounds
// at the 15x15 / dim-20 configuration, across a gamma grid; returns the rows
// and writes them as CSV.
std::vector<LemmaCheckRow> run_lemma_checks(std::uint64_t seed,
                                            const std::string& out_path);

// Dense matrix CSV: header line "m,n", then m lines of n comma-separated
// values (row-major).
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const Matrix& M, const std::string& path);

}  // namespace cpcp
