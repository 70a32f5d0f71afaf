#include <algorithm>
#include <string>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace smpheat;

namespace {
std::vector<std::string> violations_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}
}  // namespace

TEST(Config, Defaults) {
    const RunConfig c = parse_config("# nothing but a comment\n\n");
    EXPECT_EQ(c.model.K, 16u);
    EXPECT_EQ(c.model.n_x, 64u);
    EXPECT_EQ(c.paths, 4096u);
    EXPECT_DOUBLE_EQ(c.model.alpha, 0.25);
    EXPECT_EQ(c.seed, 1u);
}

TEST(Config, ValuesAndPresets) {
    const RunConfig c = parse_config(
        "model.preset = heat\n"
        "model.K = 8   # trailing comment\n"
        "model.x0 = 1, 0.5\n"
        "run.paths = 100\n"
        "variation.eps = 0.5, 0.25, 0.125\n"
        "duality.scaling = true\n");
    EXPECT_FALSE(c.model.drift_enabled);
    EXPECT_EQ(c.model.K, 8u);
    ASSERT_EQ(c.model.x0.size(), 2);
    EXPECT_DOUBLE_EQ(c.model.x0(1), 0.5);
    EXPECT_EQ(c.paths, 100u);
    EXPECT_EQ(c.eps.size(), 3u);
    EXPECT_TRUE(c.duality_scaling);
}

TEST(Config, AlphaOutOfRange) {
    const auto v = violations_of("model.alpha = 0.6\n");
    ASSERT_FALSE(v.empty());
    EXPECT_TRUE(mentions(v, "alpha must lie in [0, 0.5)"));
}

TEST(Config, DuplicateKeyNamesBothLines) {
    const auto v = violations_of("run.seed = 3\nmodel.K = 8\nrun.seed = 4\n");
    EXPECT_TRUE(mentions(v, "duplicate key 'run.seed' on lines 1 and 3"));
}

TEST(Config, SyntaxAndUnknownKeys) {
    const auto v = violations_of("model.K = 8\nthis line has no equals\nmodel.bogus = 1\nnodot = 2\nmodel.T =\n");
    EXPECT_TRUE(mentions(v, "line 2: syntax error"));
    EXPECT_TRUE(mentions(v, "line 3: unknown key 'model.bogus'"));
    EXPECT_TRUE(mentions(v, "line 4: syntax error"));
    EXPECT_TRUE(mentions(v, "line 5: syntax error"));
}

TEST(Config, AllSemanticViolationsReported) {
    const auto v = violations_of("model.u_min = 1\nmodel.u_max = 0\nmodel.K = 128\nmodel.alpha = -0.1\n");
    EXPECT_TRUE(mentions(v, "u_min must be below u_max"));
    EXPECT_TRUE(mentions(v, "K must not exceed n_x"));
    EXPECT_TRUE(mentions(v, "alpha must lie in [0, 0.5)"));
}

TEST(Config, BadValuesAndPresets) {
    EXPECT_TRUE(mentions(violations_of("model.K = eight\n"), "line 1: model.K"));
    EXPECT_TRUE(mentions(violations_of("model.preset = nonsense\n"), "unknown model preset"));
    EXPECT_TRUE(mentions(violations_of("run.experiment = dance\n"), "unknown experiment"));
}
