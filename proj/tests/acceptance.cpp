// Runs the shipped configurations and prints one PASS/FAIL line per acceptance criterion.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "smpheat/smpheat.hpp"

namespace fs = std::filesystem;
using smpheat::Report;
using smpheat::RunConfig;

namespace {

fs::path g_out;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw smpheat::Error("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig load(const std::string& name, const std::string& experiment, const fs::path& out) {
    RunConfig cfg = smpheat::parse_config(slurp(fs::path(SMPHEAT_CONFIG_DIR) / (name + ".cfg")));
    cfg.experiment = experiment;
    cfg.out = out.string();
    return cfg;
}

struct Run {
    std::string name;
    bool ok = false;
    double seconds = 0.0;
    std::string error;
    Report report{""};
};

Run run(const std::string& name, const std::string& experiment) {
    Run r;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
        r.report = smpheat::run_experiment(load(name, experiment, g_out / name));
        r.ok = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Every listed quantity is present and passed; an empty list means every assertion of the run.
bool rows_pass(const Run& r, const std::vector<std::string>& quantities, std::string& why) {
    if (!r.ok) {
        why += r.name + ": " + r.error + "; ";
        return false;
    }
    bool ok = true;
    if (quantities.empty()) {
        for (const auto& row : r.report.rows())
            if (row.status == Report::Row::Status::Fail) {
                why += r.name + ": " + row.quantity + " = " + smpheat::format_number(row.value) + "; ";
                ok = false;
            }
        return ok;
    }
    for (const auto& q : quantities) {
        const auto* row = r.report.find(q);
        if (!row) {
            why += r.name + ": missing " + q + "; ";
            ok = false;
        } else if (row->status != Report::Row::Status::Pass) {
            why += r.name + ": " + q + " = " + smpheat::format_number(row->value) + "; ";
            ok = false;
        }
    }
    return ok;
}

std::string value(const Run& r, const std::string& q) {
    const auto* row = r.ok ? r.report.find(q) : nullptr;
    return q + "=" + (row ? smpheat::format_number(row->value) : std::string("n/a"));
}

struct Criterion {
    int id;
    std::string title;
    bool pass;
    double seconds;
    double budget;
    std::string detail;
};

void print(const Criterion& c) {
    char timing[96];
    std::snprintf(timing, sizeof timing, "%.1f s of %.0f s", c.seconds, c.budget);
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.title << "  [" << timing << "]  " << c.detail
              << '\n';
}

/// Reruns an experiment at reduced size with 1 and 3 threads (and a second single-thread run)
/// and compares every emitted file byte by byte.
bool deterministic(const std::string& name, const std::string& experiment, std::string& why) {
    std::vector<fs::path> dirs;
    const std::size_t threads[] = {1, 3, 1};
    for (int k = 0; k < 3; ++k) {
        const fs::path dir = g_out / "determinism" / (name + "_" + std::to_string(k));
        fs::remove_all(dir);
        RunConfig cfg = load(name, experiment, dir);
        cfg.paths = std::min<std::size_t>(cfg.paths, 256);
        cfg.threads = threads[k];
        try {
            smpheat::run_experiment(cfg);
        } catch (const std::exception& e) {
            why += name + ": " + e.what() + "; ";
            return false;
        }
        dirs.push_back(dir);
    }
    bool ok = true;
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
        ++files;
        const auto file = entry.path().filename();
        const std::string ref = slurp(entry.path());
        for (std::size_t k = 1; k < dirs.size(); ++k)
            if (!fs::exists(dirs[k] / file) || slurp(dirs[k] / file) != ref) {
                why += name + "/" + file.string() + " differs; ";
                ok = false;
            }
    }
    if (files == 0) {
        why += name + ": no output; ";
        ok = false;
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    g_out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::create_directories(g_out);
    std::vector<Criterion> results;
    auto add = [&](Criterion c) {
        print(c);
        std::cout.flush();
        results.push_back(std::move(c));
    };

    {
        const Run r = run("rates_heat", "rates");
        std::string why;
        const bool ok = rows_pass(r, {"slope", "r_squared"}, why);
        add({1, "spike-variation rate on the heat model", ok && r.seconds <= 120, r.seconds, 120,
             value(r, "slope") + " " + value(r, "r_squared") + " " + why});
    }
    {
        const Run a = run("variation_tanh", "variation-check");
        const Run b = run("variation_affine", "variation-check");
        std::string why;
        bool ok = rows_pass(a, {"state_slope", "cost_slope"}, why);
        ok = rows_pass(b, {"state_residual_max_exact"}, why) && ok;
        const double t = a.seconds + b.seconds;
        add({2, "convex expansion remainder", ok && t <= 120, t, 120,
             value(a, "state_slope") + " " + value(a, "cost_slope") + " " + value(b, "state_residual_max_exact") +
                 " " + why});
    }
    {
        std::string why, detail;
        bool ok = true;
        double t = 0.0;
        for (const std::string name : {"duality_zero", "duality_semigroup", "duality_full"}) {
            const Run r = run(name, "duality-check");
            ok = rows_pass(r, {"abs_gap"}, why) && ok;
            if (name == "duality_semigroup") {
                ok = rows_pass(r, {"gap_scaling_slope"}, why) && ok;
                detail += value(r, "gap_scaling_slope") + " ";
            }
            detail += name + ":" + value(r, "abs_gap") + " ";
            t += r.seconds;
        }
        add({3, "forward-backward duality identity", ok && t <= 300, t, 300, detail + why});
    }
    {
        const Run r = run("adjoint", "adjoint");
        std::string why4, why5;
        const bool ok4 = rows_pass(r, {"oracle_relative_p_error", "estimate_constant"}, why4);
        const bool ok5 =
            rows_pass(r, {"q_trace_finite", "q_trace_relative_change", "drift_partial_sums_cauchy_decreasing"}, why5);
        add({4, "adjoint regression vs representation oracle", ok4 && r.seconds <= 120, r.seconds, 120,
             value(r, "oracle_relative_p_error") + " " + value(r, "estimate_constant") + " " + why4});
        add({5, "weighted trace-norm regularity of Q", ok5 && r.seconds <= 300, r.seconds, 300,
             value(r, "q_trace_relative_change") + " " + value(r, "drift_partial_sums_cauchy_decreasing") + " " +
                 why5});
    }
    {
        const Run a = run("gradient_tanh", "optimize");
        const Run b = run("gradient_quadratic", "optimize");
        std::string why;
        bool ok = rows_pass(a, {"gateaux_max_relative_error", "fd_median_relative_error"}, why);
        ok = rows_pass(b, {"gateaux_max_relative_error", "fd_median_relative_error"}, why) && ok;
        const double t = a.seconds + b.seconds;
        add({6, "gradient density consistency", ok && t <= 180, t, 180,
             "tanh:" + value(a, "gateaux_max_relative_error") + " tanh:" + value(a, "fd_median_relative_error") +
                 " quadratic:" + value(b, "gateaux_max_relative_error") + " " + why});
    }
    {
        const Run r = run("optimize_quadratic", "optimize");
        std::string why;
        const bool ok = rows_pass(
            r, {"converged", "sup_error_to_minimizer", "vi_min_at_optimum", "vi_min_after_perturbation"}, why);
        add({7, "optimality on the separable quadratic model", ok && r.seconds <= 300, r.seconds, 300,
             value(r, "sup_error_to_minimizer") + " " + value(r, "vi_min_at_optimum") + " " +
                 value(r, "vi_min_after_perturbation") + " " + why});
    }
    {
        const Run r = run("schatten", "schatten-test");
        std::string why;
        const bool ok = rows_pass(r, {"dual_form_max_relative_error", "trace_bound_violations",
                                      "product_left_violations", "product_right_violations"},
                                  why);
        add({8, "Schatten suite", ok && r.seconds <= 10, r.seconds, 10,
             value(r, "dual_form_max_relative_error") + " " + why});
    }
    {
        const Run r = run("gronwall", "gronwall-check");
        std::string why;
        const bool ok = rows_pass(r, {"beta_half_half_error", "gronwall_alpha0_relative_error", "scaled_hs_sup",
                                      "scaled_hs_limit_relative_error"},
                                  why);
        add({9, "estimates suite", ok && r.seconds <= 10, r.seconds, 10,
             value(r, "beta_half_half_error") + " " + value(r, "gronwall_alpha0_relative_error") + " " +
                 value(r, "scaled_hs_sup") + " " + why});
    }
    {
        const auto start = std::chrono::steady_clock::now();
        const std::vector<std::pair<std::string, std::string>> runs = {
            {"simulate", "simulate"},           {"rates_heat", "rates"},
            {"variation_tanh", "variation-check"}, {"adjoint", "adjoint"},
            {"duality_full", "duality-check"},  {"gradient_tanh", "optimize"},
            {"optimize_quadratic", "optimize"}, {"schatten", "schatten-test"},
            {"gronwall", "gronwall-check"}};
        std::string why;
        bool ok = true;
        for (const auto& [name, experiment] : runs) ok = deterministic(name, experiment, why) && ok;
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        add({10, "byte-identical outputs across reruns and thread counts", ok && t <= 600, t, 600,
             std::to_string(runs.size()) + " configurations " + why});
    }

    std::size_t passed = 0;
    for (const auto& c : results) passed += c.pass ? 1 : 0;
    std::cout << passed << "/" << results.size() << " acceptance criteria passed\n";
    return passed == results.size() ? 0 : 1;
}
