#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace smpheat;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("smpheat_cli_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig small_run(const std::string& experiment, const fs::path& out) {
    RunConfig c = parse_config(
        "model.K = 8\nmodel.M = 8\nmodel.N = 4\nmodel.n_x = 32\nmodel.n_steps = 16\n"
        "run.paths = 200\ncontrol.u_bar = 0.2\nschatten.instances = 50\n");
    c.experiment = experiment;
    c.out = out.string();
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SMPHEAT_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, SchattenReportListsDualForm) {
    const auto out = scratch("schatten");
    const Report rep = run_experiment(small_run("schatten-test", out));
    EXPECT_TRUE(rep.passed());
    EXPECT_EQ(exit_code(rep), 0);
    ASSERT_NE(rep.find("dual_form_max_relative_error"), nullptr);
    EXPECT_NE(slurp(out / "report.txt").find("dual_form_max_relative_error"), std::string::npos);
    EXPECT_EQ(slurp(out / "results.csv").rfind("# schema=1\n", 0), 0u);
}

TEST(Cli, ResultsAreByteIdenticalAcrossRerunsAndThreads) {
    for (const std::string experiment : {"simulate", "adjoint", "duality-check"}) {
        const auto a = scratch(experiment + "_a"), b = scratch(experiment + "_b"), c = scratch(experiment + "_c");
        RunConfig ca = small_run(experiment, a), cb = small_run(experiment, b), cc = small_run(experiment, c);
        ca.threads = 1;
        cb.threads = 3;
        cc.threads = 1;
        run_experiment(ca);
        run_experiment(cb);
        run_experiment(cc);
        for (const auto& entry : fs::directory_iterator(a)) {
            const auto name = entry.path().filename();
            EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << experiment << " " << name;
            EXPECT_EQ(slurp(entry.path()), slurp(c / name)) << experiment << " " << name;
        }
    }
}

TEST(Cli, UnwritableOutputDirectory) {
    const auto blocker = scratch("blocker");
    std::ofstream(blocker) << "file";
    EXPECT_THROW(run_experiment(small_run("gronwall-check", blocker / "sub")), Error);
}

TEST(Cli, ExitCodes) {
    const auto out = scratch("exe");
    EXPECT_EQ(run_cli("schatten-test --out " + out.string()), 0);

    const auto cfg = scratch("mismatch.cfg");
    std::ofstream(cfg) << "model.K = 8\nmodel.M = 8\nmodel.N = 4\nmodel.n_x = 32\nmodel.n_steps = 16\n"
                          "duality.adjoint_N = 2\n";
    EXPECT_EQ(run_cli("duality-check --paths 64 --config " + cfg.string() + " --out " + out.string()), 1);

    const auto bad = scratch("bad.cfg");
    std::ofstream(bad) << "model.alpha = 0.6\n";
    EXPECT_EQ(run_cli("simulate --config " + bad.string() + " --out " + out.string()), 1);

    const auto strict = scratch("strict.cfg");
    std::ofstream(strict) << "model.K = 8\nmodel.M = 8\nmodel.N = 4\nmodel.n_x = 32\nmodel.n_steps = 16\n"
                             "variation.min_slope = 50\n";
    EXPECT_EQ(run_cli("variation-check --paths 32 --config " + strict.string() + " --out " + out.string()), 2);
}
