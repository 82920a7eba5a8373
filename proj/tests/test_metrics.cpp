// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "audiokv/error.hpp"
#include "audiokv/fixtures.hpp"
#include "audiokv/head_scoring.hpp"
#include "audiokv/metrics.hpp"

using namespace audiokv;

namespace {

AttentionTrace trace_of(const std::vector<std::vector<float>>& rows) {
    std::vector<DecodingStep> steps;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        DecodingStep s;
        s.step_index = t;
        s.context_length = rows[t].size();
        s.attention = rows[t];
        steps.push_back(std::move(s));
    }
    return AttentionTrace::create({1, 1, 0, 0, 0.0}, std::move(steps));
}

EvictionResult result_of(std::size_t context, std::vector<std::vector<std::size_t>> retained,
                         std::size_t layers = 1) {
    EvictionResult r;
    r.policy_name = "test";
    r.num_layers = layers;
    r.num_heads = retained.size() / layers;
    r.context_length = context;
    r.retained = std::move(retained);
    return r;
}

// One head; evict after step 0 (context 4), two future steps.
AttentionTrace three_step_trace() {
    return trace_of({{0.25f, 0.25f, 0.25f, 0.25f},
                     {0.1f, 0.4f, 0.1f, 0.3f, 0.1f},
                     {0.1f, 0.3f, 0.2f, 0.2f, 0.1f, 0.1f}});
}

std::vector<Policy> all_policies() {
    return {Policy::snapkv, Policy::snapkv_sss, Policy::audiokv_no_sss, Policy::audiokv,
            Policy::h2o,    Policy::adakv,      Policy::pyramidkv};
}

}  // namespace

TEST(OracleOverlap, HandComputedThreeStepFixture) {
    // Future mass over the first four indices: [0.2, 0.7, 0.3, 0.5]; top-2 = {1, 3}.
    const auto trace = three_step_trace();
    EXPECT_DOUBLE_EQ(oracle_overlap(result_of(4, {{1, 2}}), trace, 2), 0.5);
    EXPECT_DOUBLE_EQ(oracle_overlap(result_of(4, {{1, 3}}), trace, 2), 1.0);
    EXPECT_DOUBLE_EQ(oracle_overlap(result_of(4, {{0, 2}}), trace, 2), 0.0);
    // Horizon 1 uses only the next step: [0.1, 0.4, 0.1, 0.3], top-2 = {1, 3}.
    EXPECT_DOUBLE_EQ(oracle_overlap(result_of(4, {{0, 1, 2}}), trace, 1), 2.0 / 3.0);
}

TEST(OracleOverlap, HorizonErrors) {
    const auto trace = three_step_trace();
    EXPECT_THROW(oracle_overlap(result_of(4, {{1, 2}}), trace, 3), HorizonError);
    EXPECT_THROW(oracle_overlap(result_of(4, {{1, 2}}), trace, 0), HorizonError);
    EXPECT_THROW(oracle_overlap(result_of(6, {{1, 2}}), trace, 1), HorizonError);
    EXPECT_THROW(oracle_overlap(result_of(7, {{1, 2}}), trace, 1), DimensionMismatchError);
}

TEST(RetainedMass, Examples) {
    ObservationWindow w;
    w.num_layers = 1;
    w.num_heads = 2;
    w.context_length = 4;
    w.aggregated = {0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.0, 0.0};
    // Head 0 keeps 0.2 + 0.4 of 1.0; head 1 has no mass and counts as 1.
    EXPECT_NEAR(retained_mass(result_of(4, {{1, 3}, {0}}), w), (0.6 + 1.0) / 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(retained_mass(result_of(4, {{0, 1, 2, 3}, {0, 1, 2, 3}}), w), 1.0);
    EXPECT_THROW(retained_mass(result_of(5, {{0}, {0}}), w), DimensionMismatchError);
}

TEST(RetainedMass, MatchesDirectSummationOnAFixture) {
    const Fixture f = generate_fixture(kProfileSpikePlateau, 5);
    const auto w = build_observation_window(f.trace, 32, 32);
    const auto r = select_snapkv(w, 200, 7, 32);
    double expect = 0.0;
    for (std::size_t slot = 0; slot < r.retained.size(); ++slot) {
        double all = 0.0;
        double kept = 0.0;
        for (std::size_t i = 0; i < w.context_length; ++i) {
            all += w.row(slot)[i];
            if (std::binary_search(r.retained[slot].begin(), r.retained[slot].end(), i)) {
                kept += w.row(slot)[i];
            }
        }
        expect += kept / all;
    }
    EXPECT_NEAR(retained_mass(r, w), expect / static_cast<double>(r.retained.size()), 1e-12);
}

TEST(CoverageEntropy, Examples) {
    std::vector<std::size_t> spread;
    for (std::size_t i = 0; i < 100; i += 10) {
        spread.push_back(i);
    }
    EXPECT_NEAR(index_entropy(spread, 100, 10), std::log(10.0), 1e-12);
    const std::vector<std::size_t> clumped{40, 41, 42, 43, 49};
    EXPECT_EQ(index_entropy(clumped, 100, 10), 0.0);
    // Context 10 in 2 bins: {0, 1, 2} and {7} give counts 3 and 1.
    const std::vector<std::size_t> hand{0, 1, 2, 7};
    EXPECT_NEAR(index_entropy(hand, 10, 2), -(0.75 * std::log(0.75) + 0.25 * std::log(0.25)), 1e-12);
    // Three bins over context 10: indices 3 and 6 land in bins 0 and 1.
    const std::vector<std::size_t> edges{3, 6, 9};
    EXPECT_NEAR(index_entropy(edges, 10, 3), std::log(3.0), 1e-12);
    EXPECT_THROW(index_entropy(hand, 10, 1), ConfigError);

    const auto r = result_of(100, {spread, clumped});
    EXPECT_NEAR(coverage_entropy(r, 10), std::log(10.0) / 2.0, 1e-12);
}

TEST(MemoryFootprint, Examples) {
    KvGeometry geom;
    geom.head_dim = 64;
    geom.bytes_per_element = 2;
    std::vector<std::size_t> hundred(100);
    std::iota(hundred.begin(), hundred.end(), std::size_t{0});
    EXPECT_EQ(memory_footprint(result_of(100, {hundred}), geom), 25600u);
    EXPECT_EQ(memory_footprint(result_of(100, {{}}), geom), 0u);
    const std::vector<std::size_t> forty(hundred.begin(), hundred.begin() + 40);
    EXPECT_EQ(memory_footprint(result_of(100, {hundred, hundred}), geom) * 2,
              memory_footprint(result_of(100, {forty, forty}), geom) * 5);
    geom.head_dim = 0;
    EXPECT_THROW(memory_footprint(result_of(100, {hundred}), geom), ConfigError);
}

TEST(MemoryFootprint, LinearInRetainedCountAcrossRatios) {
    const Fixture f = generate_fixture(kProfileSpikePlateau, 2);
    const HeadScoreMatrix scores = score_trace(f.trace, f.words, 0.95);
    const SimulationConfig cfg;
    const KvGeometry geom;
    const std::size_t le = resolve_eviction_point(f.trace, cfg).context_length;
    const std::size_t n = f.trace.num_head_slots();
    const std::size_t per_entry = 2 * geom.head_dim * geom.bytes_per_element;
    for (const Policy p : all_policies()) {
        for (const double ratio : {0.4, 0.6, 0.8, 1.0}) {
            const auto r = run_policy(f.trace, p, ratio, scores, cfg);
            const std::size_t bytes = memory_footprint(r, geom);
            EXPECT_EQ(bytes, r.total_retained() * per_entry);
            const double ideal = ratio * static_cast<double>(n * le * per_entry);
            EXPECT_LE(std::abs(static_cast<double>(bytes) - ideal), static_cast<double>(n * per_entry))
                << policy_name(p) << " " << ratio;
        }
    }
}

TEST(Simulator, EvictionPointDefaults) {
    const Fixture f = generate_fixture(kProfileSpikePlateau, 0);
    SimulationConfig cfg;
    const EvictionPoint p = resolve_eviction_point(f.trace, cfg);
    EXPECT_EQ(p.step, 32u);
    EXPECT_EQ(p.context_length, f.trace.context_length(31));
    EXPECT_EQ(p.horizon, f.trace.num_steps() - 32);
    cfg.eviction_step = 10;
    EXPECT_THROW(resolve_eviction_point(f.trace, cfg), ConfigError);
    cfg.eviction_step = f.trace.num_steps();
    EXPECT_THROW(resolve_eviction_point(f.trace, cfg), HorizonError);
    cfg.eviction_step = 36;
    cfg.horizon = f.trace.num_steps();
    EXPECT_THROW(resolve_eviction_point(f.trace, cfg), HorizonError);
}

TEST(Simulator, CapacityForRatio) {
    EXPECT_EQ(capacity_for_ratio(0.4, 819), 327u);
    EXPECT_EQ(capacity_for_ratio(0.6, 100), 60u);
    EXPECT_EQ(capacity_for_ratio(1.0, 819), 819u);
    EXPECT_THROW(capacity_for_ratio(0.0, 10), ConfigError);
    EXPECT_THROW(capacity_for_ratio(1.5, 10), ConfigError);
}

TEST(Simulator, PolicyNamesRoundTrip) {
    for (const Policy p : all_policies()) {
        EXPECT_EQ(parse_policy(policy_name(p)), p);
    }
    EXPECT_THROW(parse_policy("lru"), ConfigError);
    EXPECT_EQ(ablation_policies().size(), 4u);
}

TEST(RunComparison, EmptyPolicyListGivesNoReports) {
    const Fixture f = generate_fixture(kProfileUniform, 0);
    const std::vector<Policy> none;
    const std::vector<double> ratios{0.4};
    EXPECT_TRUE(run_comparison(f.trace, none, ratios, HeadScoreMatrix::zeros(4, 5), SimulationConfig{},
                               KvGeometry{})
                    .empty());
}

TEST(RunComparison, FullBudgetIsPerfect) {
    for (const auto profile : {kProfileSpikePlateau, kProfileSpecializedHeads, kProfileUniform}) {
        const Fixture f = generate_fixture(profile, 1);
        const HeadScoreMatrix scores = score_trace(f.trace, f.words, 0.95);
        const auto policies = all_policies();
        const std::vector<double> ratios{1.0};
        const auto reports = run_comparison(f.trace, policies, ratios, scores, SimulationConfig{}, KvGeometry{});
        ASSERT_EQ(reports.size(), policies.size());
        for (const auto& r : reports) {
            EXPECT_DOUBLE_EQ(r.oracle_overlap, 1.0) << r.policy_name;
            EXPECT_DOUBLE_EQ(r.mass_retained, 1.0) << r.policy_name;
        }
    }
}

TEST(RunComparison, OrderingAndCsv) {
    const Fixture f = generate_fixture(kProfileSpikePlateau, 3);
    const HeadScoreMatrix scores = score_trace(f.trace, f.words, 0.95);
    const auto policies = ablation_policies();
    const std::vector<double> ratios{0.4, 0.8};
    const auto reports = run_comparison(f.trace, policies, ratios, scores, SimulationConfig{}, KvGeometry{});
    ASSERT_EQ(reports.size(), 8u);
    EXPECT_EQ(reports[0].policy_name, "snapkv");
    EXPECT_EQ(reports[1].policy_name, "snapkv");
    EXPECT_DOUBLE_EQ(reports[1].retention_ratio, 0.8);
    EXPECT_EQ(reports[7].policy_name, "audiokv");
    const std::string csv = reports_to_csv(reports);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "policy,ratio,overlap,mass,entropy,bytes");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
    EXPECT_EQ(csv, reports_to_csv(run_comparison(f.trace, policies, ratios, scores,
                                                 SimulationConfig{}, KvGeometry{})));
}

TEST(RunComparison, QualityIsMonotoneInRatio) {
    const std::vector<double> ratios{0.4, 0.6, 0.8, 1.0};
    const auto policies = all_policies();
    for (const auto profile : {kProfileSpikePlateau, kProfileSpecializedHeads, kProfileUniform}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const Fixture f = generate_fixture(profile, seed);
            const HeadScoreMatrix scores = score_trace(f.trace, f.words, 0.95);
            const auto reports = run_comparison(f.trace, policies, ratios, scores, SimulationConfig{}, KvGeometry{});
            for (std::size_t p = 0; p < policies.size(); ++p) {
                for (std::size_t i = 1; i < ratios.size(); ++i) {
                    const auto& lo = reports[p * ratios.size() + i - 1];
                    const auto& hi = reports[p * ratios.size() + i];
                    EXPECT_GE(hi.oracle_overlap, lo.oracle_overlap)
                        << profile << " seed " << seed << " " << hi.policy_name << " " << hi.retention_ratio;
                    EXPECT_GE(hi.mass_retained, lo.mass_retained)
                        << profile << " seed " << seed << " " << hi.policy_name << " " << hi.retention_ratio;
                    EXPECT_GT(hi.memory_bytes, lo.memory_bytes);
                }
            }
        }
    }
}

TEST(RunComparison, AudioKvKeepsMoreMassThanSnapKvOnPlantedFixtures) {
    const std::vector<Policy> policies{Policy::snapkv, Policy::audiokv};
    const std::vector<double> ratios{0.4};
    double gap = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Fixture f = generate_fixture(kProfileSpikePlateau, seed);
        const HeadScoreMatrix scores = score_trace(f.trace, f.words, 0.95);
        const auto reports = run_comparison(f.trace, policies, ratios, scores, SimulationConfig{}, KvGeometry{});
        EXPECT_GT(reports[1].mass_retained, reports[0].mass_retained) << "seed " << seed;
        gap += reports[1].mass_retained - reports[0].mass_retained;
    }
    EXPECT_GT(gap / 10.0, 0.0);
}
