// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "audiokv/cli.hpp"
#include "audiokv/error.hpp"
#include "audiokv/json_io.hpp"
#include "audiokv/spectral.hpp"
#include "oracles.hpp"

using namespace audiokv;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    CliRun r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<double> read_column(const std::string& text) {
    std::vector<double> values;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        values.push_back(std::stod(line));
    }
    return values;
}

// One fixture per test binary; the scratch directory is per test.
class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new std::filesystem::path(oracle::scratch_dir("cli"));
        const CliRun r = run({"gen-fixture", "--profile", "spike-plateau", "--seed", "5", "--output-path",
                           (*dir_ / "t.akv").string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static std::string path(const std::string& name) { return (*dir_ / name).string(); }
    static std::string trace() { return path("t.akv"); }
    static std::string alignment() { return path("t.akv.alignment.json"); }

private:
    static std::filesystem::path* dir_;
};

std::filesystem::path* CliTest::dir_ = nullptr;

}  // namespace

TEST(ParseRatioList, Separators) {
    EXPECT_EQ(parse_ratio_list("0.4,0.6 0.8"), (std::vector<double>{0.4, 0.6, 0.8}));
    EXPECT_EQ(parse_ratio_list(" 1.0 "), (std::vector<double>{1.0}));
    EXPECT_THROW(parse_ratio_list(""), ConfigError);
    EXPECT_THROW(parse_ratio_list(" , "), ConfigError);
    EXPECT_THROW(parse_ratio_list("0.4,abc"), ConfigError);
    EXPECT_THROW(parse_ratio_list("1.2"), ConfigError);
    EXPECT_THROW(parse_ratio_list("0"), ConfigError);
}

TEST(ExitCodes, MappingOfExceptions) {
    std::ostringstream err;
    try {
        throw FormatError("bad");
    } catch (...) {
        EXPECT_EQ(report_current_exception(err), kExitUsage);
    }
    try {
        throw std::logic_error("bug");
    } catch (...) {
        EXPECT_EQ(report_current_exception(err), kExitInternal);
    }
    EXPECT_NE(err.str().find("internal error: bug"), std::string::npos);
}

TEST(ExitCodes, UsageErrors) {
    EXPECT_EQ(run({}).code, kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run({"compare", "--no-such-flag"}).code, kExitUsage);
    EXPECT_EQ(run({"--help"}).code, kExitOk);
    EXPECT_EQ(run({"gen-fixture", "--profile", "noisy", "--output-path", "/tmp/x.akv"}).code, kExitUsage);
    EXPECT_EQ(run({"gen-fixture"}).code, kExitUsage);
}

TEST_F(CliTest, MissingTraceNamesThePath) {
    const std::string missing = path("nope.akv");
    const CliRun r = run({"compare", "--trace-path", missing, "--alignment-path", alignment()});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find(missing), std::string::npos);
    const CliRun s = run({"score-heads", "--trace-path", missing, "--alignment-path", alignment(),
                       "--output-path", path("s.json")});
    EXPECT_EQ(s.code, kExitUsage);
    EXPECT_NE(s.err.find(missing), std::string::npos);
}

TEST_F(CliTest, EmptyRatioListIsAUsageError) {
    const CliRun r = run({"compare", "--trace-path", trace(), "--alignment-path", alignment(),
                       "--retention-ratios", ""});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("empty"), std::string::npos);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, GenFixtureIsByteIdentical) {
    for (const char* name : {"a.akv", "b.akv"}) {
        ASSERT_EQ(run({"gen-fixture", "--seed", "42", "--output-path", path(name)}).code, 0);
    }
    EXPECT_EQ(read_file(path("a.akv")), read_file(path("b.akv")));
    EXPECT_EQ(read_file(path("a.akv.alignment.json")), read_file(path("b.akv.alignment.json")));
    EXPECT_EQ(read_file(path("a.akv.tokens.json")), read_file(path("b.akv.tokens.json")));
}

TEST_F(CliTest, SparseFixtureLoads) {
    ASSERT_EQ(run({"gen-fixture", "--profile", "uniform", "--sparse-top-m", "50", "--output-path",
                   path("sparse.akv")})
                  .code,
              0);
    const CliRun r = run({"simulate", "--trace-path", path("sparse.akv"), "--policy", "snapkv",
                       "--output-path", path("sparse_result.json")});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, ScoreHeadsWritesJsonAndSummary) {
    const CliRun r = run({"score-heads", "--trace-path", trace(), "--alignment-path", alignment(),
                       "--output-path", path("scores.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const HeadScoreMatrix s = load_scores(path("scores.json"));
    EXPECT_EQ(s.num_layers, 4u);
    EXPECT_EQ(s.num_heads, 5u);
    EXPECT_GT(s.num_samples, 0u);
    EXPECT_NE(r.out.find("layer 3:"), std::string::npos);

    const CliRun a = run({"allocate", "--scores-path", path("scores.json"), "--budget", "4000"});
    ASSERT_EQ(a.code, 0) << a.err;
    const BudgetPlan plan = plan_from_json(a.out);
    EXPECT_EQ(plan.total(), 4000u);
    EXPECT_EQ(plan.window, 32u);
    EXPECT_EQ(plan.base, 100u);
    EXPECT_EQ(run({"allocate", "--scores-path", path("scores.json"), "--budget", "10"}).code, kExitUsage);
}

TEST_F(CliTest, SmoothAlphaZeroAndConstantColumns) {
    Rng rng(3);
    const auto x = oracle::random_signal(rng, 50);
    std::string csv;
    for (const double v : x) {
        csv += std::to_string(v) + ",2.5\n";
    }
    write_file(path("signal.csv"), csv);
    const CliRun r = run({"smooth", "--input-path", path("signal.csv"), "--mix-alpha", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        EXPECT_NEAR(std::stod(line.substr(0, comma)), std::stod(std::to_string(x[i])), 1e-9);
        EXPECT_NEAR(std::stod(line.substr(comma + 1)), 2.5, 1e-9);
        ++i;
    }
    EXPECT_EQ(i, x.size());

    const CliRun s = run({"smooth", "--input-path", path("signal.csv"), "--output-path", path("smoothed.csv")});
    ASSERT_EQ(s.code, 0) << s.err;
    std::istringstream smoothed(read_file(path("smoothed.csv")));
    while (std::getline(smoothed, line)) {
        EXPECT_NEAR(std::stod(line.substr(line.find(',') + 1)), 2.5, 1e-9);
    }
}

TEST_F(CliTest, SmoothMatchesTheOraclePipeline) {
    std::vector<double> x(64);
    std::string csv;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = (i >= 20 && i < 44 ? 1.0 : 0.1) + (i == 10 ? 3.0 : 0.0);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g\n", x[i]);
        csv += buf;
    }
    write_file(path("plateau.csv"), csv);
    const CliRun r = run({"smooth", "--input-path", path("plateau.csv"), "--transition-bins", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto got = read_column(r.out);
    const auto expect = oracle::sss(x, 0.7, 0.5, 3);
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_NEAR(got[i], expect[i], 1e-9);
    }
}

TEST_F(CliTest, SmoothRejectsJunk) {
    write_file(path("junk.csv"), "1.0\nabc\n");
    EXPECT_EQ(run({"smooth", "--input-path", path("junk.csv")}).code, kExitUsage);
    write_file(path("ragged.csv"), "1.0,2.0\n3.0\n");
    EXPECT_EQ(run({"smooth", "--input-path", path("ragged.csv")}).code, kExitUsage);
}

TEST_F(CliTest, CompareIsDeterministic) {
    const std::vector<std::string> base{"compare", "--trace-path", trace(), "--alignment-path", alignment()};
    auto first = base;
    first.insert(first.end(), {"--output-path", path("r1.csv"), "--json-path", path("r1.json")});
    auto second = base;
    second.insert(second.end(), {"--output-path", path("r2.csv")});
    ASSERT_EQ(run(first).code, 0);
    ASSERT_EQ(run(second).code, 0);
    const std::string csv = read_file(path("r1.csv"));
    EXPECT_EQ(csv, read_file(path("r2.csv")));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
    EXPECT_EQ(run(base).out, csv);
    EXPECT_FALSE(read_file(path("r1.json")).empty());
}

TEST_F(CliTest, FullRatioGivesPerfectOverlap) {
    const CliRun r = run({"compare", "--trace-path", trace(), "--alignment-path", alignment(),
                       "--retention-ratios", "1.0"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream fields(line);
        std::string policy, ratio, overlap, mass;
        std::getline(fields, policy, ',');
        std::getline(fields, ratio, ',');
        std::getline(fields, overlap, ',');
        std::getline(fields, mass, ',');
        EXPECT_EQ(overlap, "1.000000") << policy;
        EXPECT_EQ(mass, "1.000000") << policy;
        ++rows;
    }
    EXPECT_EQ(rows, 4);
}

TEST_F(CliTest, AudioKvBeatsSnapKvOnMassAtEveryDefaultRatio) {
    const CliRun r = run({"compare", "--trace-path", trace(), "--alignment-path", alignment()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::map<std::string, double> mass;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::stringstream fields(line);
        std::string policy, ratio, overlap, m;
        std::getline(fields, policy, ',');
        std::getline(fields, ratio, ',');
        std::getline(fields, overlap, ',');
        std::getline(fields, m, ',');
        mass[policy + "@" + ratio] = std::stod(m);
    }
    for (const char* ratio : {"0.4", "0.6", "0.8"}) {
        EXPECT_GT(mass[std::string("audiokv@") + ratio], mass[std::string("snapkv@") + ratio]) << ratio;
    }
}

TEST_F(CliTest, ConfigFilePrecedence) {
    write_file(path("cfg.json"), R"({"retention_ratios": [1.0], "window": 16, "mix_alpha": 0.25})");
    // Config beats defaults: one ratio, so one row per policy.
    const CliRun a = run({"compare", "--trace-path", trace(), "--alignment-path", alignment(), "--config",
                       path("cfg.json")});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 5);
    EXPECT_NE(a.out.find("snapkv,1,"), std::string::npos);
    // Flags beat the config.
    const CliRun b = run({"compare", "--trace-path", trace(), "--alignment-path", alignment(), "--config",
                       path("cfg.json"), "--retention-ratios", "0.4,0.6"});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(std::count(b.out.begin(), b.out.end(), '\n'), 9);
    EXPECT_NE(b.out.find("snapkv,0.6,"), std::string::npos);

    write_file(path("bad_cfg.json"), R"({"window": "wide"})");
    EXPECT_EQ(run({"compare", "--trace-path", trace(), "--alignment-path", alignment(), "--config",
                   path("bad_cfg.json")})
                  .code,
              kExitUsage);
    write_file(path("empty_cfg.json"), R"({"retention_ratios": []})");
    EXPECT_EQ(run({"compare", "--trace-path", trace(), "--alignment-path", alignment(), "--config",
                   path("empty_cfg.json")})
                  .code,
              kExitUsage);
}

TEST_F(CliTest, SimulateWritesResultAndReport) {
    const CliRun r = run({"simulate", "--trace-path", trace(), "--alignment-path", alignment(), "--policy",
                       "audiokv", "--ratio", "0.6", "--output-path", path("result.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("policy,ratio", 0), 0u);
    EXPECT_NE(r.out.find("audiokv,0.6,"), std::string::npos);
    const std::string json = read_file(path("result.json"));
    EXPECT_NE(json.find("\"retained\""), std::string::npos);
    for (const char* policy : {"h2o", "adakv", "pyramidkv", "snapkv+sss"}) {
        const CliRun p = run({"simulate", "--trace-path", trace(), "--policy", policy, "--output-path",
                           path("result.json")});
        EXPECT_EQ(p.code, 0) << policy << ": " << p.err;
    }
    EXPECT_EQ(run({"simulate", "--trace-path", trace(), "--policy", "lru", "--output-path",
                   path("result.json")})
                  .code,
              kExitUsage);
    EXPECT_EQ(run({"simulate", "--trace-path", trace(), "--policy", "audiokv", "--output-path",
                   path("result.json")})
                  .code,
              kExitUsage);
}
