// Command-line front end: phase-transition sweeps, certificate audits, lemma
// verifiers, and one-off solves.
#include "cpcp/certificates.hpp"
#include "cpcp/errors.hpp"
#include "cpcp/experiments.hpp"
#include "cpcp/rng.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;

std::string json_scalar(const json& v) {
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) {
        std::ostringstream ss;
        ss.precision(17);
        ss << v.get<double>();
        return ss.str();
    }
    throw cpcp::IOError("config: unsupported JSON value type");
}

// Expands `--config FILE` into ordinary command-line options. The file is a
// JSON object, either flat (keys for the subcommand given on the command
// line) or with one section per subcommand; arrays become comma lists.
// Explicit command-line options win over config values.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + i);
            break;
        }
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw cpcp::IOError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw cpcp::IOError("config: " + std::string(e.what()));
    }
    if (!j.is_object()) throw cpcp::IOError("config: top level must be a JSON object");

    std::string sub = (!args.empty() && args[0][0] != '-') ? args[0] : "";
    json section;
    if (!sub.empty() && j.contains(sub) && j[sub].is_object()) {
        section = j[sub];
    } else if (sub.empty() && j.size() == 1 && j.begin().value().is_object()) {
        sub = j.begin().key();
        args.insert(args.begin(), sub);
        section = j.begin().value();
    } else {
        section = j;  // flat keys for the named subcommand
    }

    std::vector<std::string> extra;
    for (auto it = section.begin(); it != section.end(); ++it) {
        const std::string opt = "--" + it.key();
        bool overridden = false;
        for (const auto& a : args)
            if (a == opt || a.rfind(opt + "=", 0) == 0) overridden = true;
        if (overridden) continue;
        if (it.value().is_boolean()) {
            if (it.value().get<bool>()) extra.push_back(opt);
        } else if (it.value().is_array()) {
            std::string joined;
            for (const auto& v : it.value()) {
                if (!joined.empty()) joined += ',';
                joined += json_scalar(v);
            }
            extra.push_back(opt);
            extra.push_back(joined);
        } else {
            extra.push_back(opt);
            extra.push_back(json_scalar(it.value()));
        }
    }
    args.insert(args.begin() + (sub.empty() ? 0 : 1), extra.begin(), extra.end());
    return args;
}

cpcp::SolverConfig tuned_solver(int p, int max_iters, double tol) {
    cpcp::SolverConfig s;
    s.rel_tol = tol;
    if (p > 0) {
        // compressive runs stall without a per-stage cap
        s.stage_max_iters = 120;
        s.max_iters = max_iters > 0 ? max_iters : 20000;
    } else {
        s.max_iters = max_iters > 0 ? max_iters : 5000;
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compressive principal component pursuit toolkit"};
    app.require_subcommand(1);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "phase-transition sweep over (rank, sparsity)");
    int sw_m = 30, sw_n = 30, sw_p = 0, sw_trials = 10, sw_maxit = 0;
    std::vector<int> sw_ranks;
    std::vector<double> sw_sparsities;
    std::uint64_t sw_seed = 0;
    std::uint64_t sw_cap = 4ULL << 30;
    double sw_tol = 1e-7;
    std::string sw_out;
    bool sw_full = false;
    sweep->add_option("--m", sw_m, "rows");
    sweep->add_option("--n", sw_n, "columns");
    sweep->add_option("--p", sw_p, "withheld measurements (q = m*n - p)");
    sweep->add_option("--ranks", sw_ranks, "rank grid")->delimiter(',');
    sweep->add_option("--sparsities", sw_sparsities, "sparsity grid")->delimiter(',');
    sweep->add_option("--trials", sw_trials, "trials per cell");
    sweep->add_option("--seed", sw_seed, "master seed");
    sweep->add_option("--out", sw_out, "output directory")->required();
    sweep->add_flag("--full-scale", sw_full, "allow streamed ensembles past the memory cap");
    sweep->add_option("--mem-cap", sw_cap, "ensemble memory cap in bytes");
    sweep->add_option("--max-iters", sw_maxit, "solver iteration budget");
    sweep->add_option("--tol", sw_tol, "solver relative tolerance");

    // audit
    auto* audit = app.add_subcommand("audit", "certificate pipeline audit");
    int au_m = 40, au_n = 40, au_r = 2, au_p = 0, au_trials = 10;
    double au_rho = 0.02;
    std::uint64_t au_seed = 0;
    std::string au_out;
    audit->add_option("--m", au_m, "rows");
    audit->add_option("--n", au_n, "columns");
    audit->add_option("--r", au_r, "planted rank");
    audit->add_option("--rho", au_rho, "sparse fraction");
    audit->add_option("--p", au_p, "withheld measurements");
    audit->add_option("--trials", au_trials, "trials");
    audit->add_option("--seed", au_seed, "seed");
    audit->add_option("--out", au_out, "output CSV")->required();

    // lemmas
    auto* lemmas = app.add_subcommand("lemmas", "statistical bound verifiers");
    std::uint64_t le_seed = 0;
    std::string le_out;
    lemmas->add_option("--seed", le_seed, "seed");
    lemmas->add_option("--out", le_out, "output CSV")->required();

    // solve
    auto* solve = app.add_subcommand("solve", "decompose one matrix from CSV");
    std::string so_input;
    int so_p = 0, so_maxit = 0;
    std::uint64_t so_seed = 0;
    double so_tol = 1e-7;
    solve->add_option("--input", so_input, "matrix CSV (header m,n then rows)")->required();
    solve->add_option("--p", so_p, "withheld measurements");
    solve->add_option("--seed", so_seed, "ensemble seed");
    solve->add_option("--max-iters", so_maxit, "solver iteration budget");
    solve->add_option("--tol", so_tol, "solver relative tolerance");

    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const cpcp::IOError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sweep->parsed()) {
            cpcp::SweepConfig cfg;
            cfg.m = sw_m;
            cfg.n = sw_n;
            cfg.p = sw_p;
            if (sw_ranks.empty()) {
                const int step = (sw_n + 19) / 20;
                for (int r = 1; r <= sw_n / 2; r += step) sw_ranks.push_back(r);
            }
            if (sw_sparsities.empty())
                for (double s = 0.02; s <= 0.5 + 1e-12; s += 0.03) sw_sparsities.push_back(s);
            cfg.rank_grid = sw_ranks;
            cfg.sparsity_grid = sw_sparsities;
            cfg.trials = sw_trials;
            cfg.master_seed = sw_seed;
            cfg.output_dir = sw_out;
            cfg.full_scale = sw_full;
            cfg.mem_cap_bytes = sw_cap;
            cfg.solver = tuned_solver(sw_p, sw_maxit, sw_tol);

            std::error_code ec;
            std::filesystem::create_directories(sw_out, ec);
            if (ec) throw cpcp::IOError("sweep: cannot create " + sw_out);
            cpcp::SweepResult res = cpcp::run_sweep(cfg);
            cpcp::emit_csv(res, sw_out + "/sweep.csv");
            cpcp::emit_pgm(res, sw_out + "/sweep.pgm");
            std::cout << "sweep: " << res.cells.size() << " cells -> " << sw_out
                      << "/sweep.{csv,pgm}\n";
        } else if (audit->parsed()) {
            cpcp::run_certificate_audit(au_m, au_n, au_r, au_rho, au_p, au_trials,
                                        au_seed, au_out);
            std::cout << "audit: " << au_trials << " trials -> " << au_out << "\n";
        } else if (lemmas->parsed()) {
            auto rows = cpcp::run_lemma_checks(le_seed, le_out);
            for (const auto& r : rows)
                std::cout << r.check << " gamma=" << r.gamma << ": " << r.passes << "/"
                          << r.trials << "\n";
        } else if (solve->parsed()) {
            cpcp::Matrix M = cpcp::read_matrix_csv(so_input);
            const int m = static_cast<int>(M.rows()), n = static_cast<int>(M.cols());
            if (so_p < 0 || so_p >= m * n)
                throw cpcp::PreconditionError("solve: p must lie in [0, m*n)");
            cpcp::SolverConfig scfg = tuned_solver(so_p, so_maxit, so_tol);
            cpcp::SolveResult res;
            if (so_p == 0) {
                res = cpcp::solve_pcp(M, scfg);
            } else {
                cpcp::MeasurementEnsemble ens(m, n, m * n - so_p, so_seed);
                res = cpcp::solve_cpcp(ens, ens.apply(M), scfg);
            }
            const std::string stem =
                std::filesystem::path(so_input).replace_extension().string();
            cpcp::write_matrix_csv(res.L, stem + ".L.csv");
            cpcp::write_matrix_csv(res.S, stem + ".S.csv");
            Eigen::BDCSVD<cpcp::Matrix> svd(res.L);
            const double smax = svd.singularValues()(0);
            int rank = 0;
            for (long i = 0; i < svd.singularValues().size(); ++i)
                if (svd.singularValues()(i) > 1e-6 * smax) ++rank;
            const int nnz =
                static_cast<int>((res.S.cwiseAbs().array() > 1e-10).count());
            std::printf("solve: iters=%d rank(L)=%d nnz(S)=%d final_resid=%.3e -> %s.{L,S}.csv\n",
                        res.iterations, rank, nnz,
                        res.residual_history.empty() ? 0.0 : res.residual_history.back(),
                        stem.c_str());
        }
    } catch (const cpcp::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cpcp::IOError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
