// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "lotpool/errors.hpp"
#include "lotpool/model.hpp"
#include "lotpool/pools.hpp"
#include "lotpool/pruning.hpp"
#include "support/oracles.hpp"
#include "support/small_run.hpp"

using namespace lotpool;

namespace {

GreedyResult run_greedy(const oracle::GreedyInstance& g, const CoefficientPool& coeffs, PruneMode mode,
                        int threads = 1) {
    std::vector<const ParamSet*> cands;
    std::vector<int> ids;
    for (std::size_t i = 0; i < g.candidates.size(); ++i) {
        cands.push_back(&g.candidates[i]);
        ids.push_back(static_cast<int>(i) + 1);
    }
    Scorer score = [&g](const ParamSet& p, const Mask* m) {
        if (!m) return oracle::distance_score(g.target, p, nullptr);
        const auto bits = oracle::flat_bits(*m);
        return oracle::distance_score(g.target, p, &bits);
    };
    return greedy_interpolate(g.start, g.start_mask, cands, ids, coeffs, g.keep, mode, score, threads);
}

}  // namespace

TEST(Candidates, AdjacencyOrder) {
    EXPECT_EQ(order_candidates(6, 3).order, (std::vector<int>{2, 4, 1, 5, 0, 6}));
    EXPECT_EQ(order_candidates(6, 3, 2).order, (std::vector<int>{2, 4}));
    EXPECT_EQ(order_candidates(6, 0).order, (std::vector<int>{1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(order_candidates(6, 6).order, (std::vector<int>{5, 4, 3, 2, 1, 0}));
    EXPECT_EQ(order_candidates(6, 3, std::nullopt, CandidateSet::nearest_below).order, (std::vector<int>{2, 4, 5, 6}));
    EXPECT_THROW(order_candidates(6, 7), DomainError);
    EXPECT_THROW(order_candidates(6, 3, 7), DomainError);
}

TEST(Coefficients, StandardAndAblationPools) {
    const auto& s = CoefficientPool::standard().values();
    EXPECT_EQ(s, (std::vector<double>{0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95}));
    EXPECT_EQ(CoefficientPool::of_size(1).values(), (std::vector<double>{0.5}));
    EXPECT_EQ(CoefficientPool::of_size(3).values(), (std::vector<double>{0.05, 0.5, 0.95}));
    EXPECT_EQ(CoefficientPool::of_size(7).values(), (std::vector<double>{0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95}));
    EXPECT_EQ(CoefficientPool::of_size(11).values(), s);
    EXPECT_THROW(CoefficientPool::of_size(5), DomainError);
    EXPECT_EQ(CoefficientPool::parse("0.3,0.5").values(), (std::vector<double>{0.3, 0.5}));
    EXPECT_THROW(CoefficientPool({0.0}), DomainError);
    EXPECT_THROW(CoefficientPool({1.0}), DomainError);
    EXPECT_THROW(CoefficientPool({0.5, 0.5}), DomainError);
    EXPECT_THROW(CoefficientPool({}), DomainError);
    EXPECT_THROW(CoefficientPool::parse("0.5,x"), DomainError);
}

TEST(Greedy, MatchesExhaustiveEnumeration) {
    Rng rng(2024);
    const CoefficientPool coeffs = CoefficientPool::standard();
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = oracle::random_greedy_instance(rng, 2);
        const auto [consistent, best] = oracle::enumerate_greedy(g, coeffs.values());
        ASSERT_EQ(consistent.size(), 1u) << "trial " << trial;
        const GreedyResult r = run_greedy(g, coeffs, PruneMode::during);
        EXPECT_EQ(r.params, consistent[0].params);
        EXPECT_EQ(oracle::flat_bits(r.mask), consistent[0].bits);
        ASSERT_EQ(r.log.size(), 2u);
        for (std::size_t c = 0; c < 2; ++c) {
            EXPECT_EQ(r.log[c].alpha, coeffs.values()[consistent[0].alpha_index[c]]);
            EXPECT_EQ(r.log[c].accepted, consistent[0].accepted[c]);
        }
        EXPECT_LE(r.score, best);
    }
}

TEST(Greedy, ScoreNeverDecreasesAndSparsityHolds) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = oracle::random_greedy_instance(rng, 4);
        const GreedyResult r = run_greedy(g, CoefficientPool::standard(), PruneMode::during);
        double score = r.log.front().val_before;
        for (const auto& rec : r.log) {
            EXPECT_EQ(rec.val_before, score);
            if (rec.accepted) {
                EXPECT_GE(rec.val_after, rec.val_before);
                score = rec.val_after;
            } else {
                EXPECT_LT(rec.val_after, rec.val_before);
            }
            EXPECT_DOUBLE_EQ(rec.density, static_cast<double>(g.keep) / 6.0);
        }
        EXPECT_EQ(r.score, score);
        EXPECT_EQ(r.mask.kept(), g.keep);
    }
}

TEST(Greedy, PruneAfterPrunesOnceAtTheEnd) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = oracle::random_greedy_instance(rng, 3);
        const GreedyResult r = run_greedy(g, CoefficientPool::standard(), PruneMode::after);
        EXPECT_EQ(r.mask.kept(), g.keep);
        bool any = false;
        for (const auto& rec : r.log) any = any || rec.accepted;
        if (!any) {
            EXPECT_EQ(r.params, g.start);
            continue;
        }
        // Replay the unpruned search, then prune once.
        ParamSet state = g.start;
        for (std::size_t c = 0; c < g.candidates.size(); ++c)
            if (r.log[c].accepted) state = oracle::blend(state, g.candidates[c], r.log[c].alpha);
        const auto bits = oracle::keep_largest(state, g.keep);
        EXPECT_EQ(r.params, oracle::zero_outside(state, bits));
    }
}

TEST(Greedy, ThreadCountDoesNotChangeResults) {
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const auto g = oracle::random_greedy_instance(rng, 3);
        const GreedyResult a = run_greedy(g, CoefficientPool::standard(), PruneMode::during, 1);
        const GreedyResult b = run_greedy(g, CoefficientPool::standard(), PruneMode::during, 4);
        EXPECT_EQ(a.params, b.params);
        EXPECT_EQ(a.mask, b.mask);
        EXPECT_EQ(to_json_lines(a.log), to_json_lines(b.log));
    }
}

TEST(Greedy, TwoAcceptedMidpointsEqualPrunedAverage) {
    ParamSet a, b;
    a.add("W_1", Tensor({1, 4}, {4.0f, 0.0f, 2.0f, 0.0f}));
    b.add("W_1", Tensor({1, 4}, {0.0f, 3.0f, 0.0f, 1.0f}));
    Mask ma;
    ma.add("W_1", {1, 4}, {1, 0, 1, 0});
    const Scorer flat = [](const ParamSet&, const Mask*) { return 0.0; };
    const GreedyResult r = greedy_interpolate(a, ma, {&b}, {1}, CoefficientPool({0.5}), 2, PruneMode::during, flat);
    // (a + b) / 2 = [2, 1.5, 1, 0.5]; the two largest survive.
    EXPECT_EQ(r.params[0].tensor, Tensor({1, 4}, {2.0f, 1.5f, 0.0f, 0.0f}));
    EXPECT_TRUE(r.log[0].accepted);
}

class PoolsOnRun : public ::testing::Test {
  protected:
    const test::SmallRun& s = test::small_run();
};

TEST_F(PoolsOnRun, InterpolationNeverLowersValidationAccuracy) {
    for (int t = 0; t <= s.run.last_iteration(); ++t) {
        const PoolOutcome o = pool_interpolate(s.run, t, CoefficientPool::standard(), s.val);
        const Checkpoint& orig = s.run.checkpoints[static_cast<std::size_t>(t)];
        EXPECT_DOUBLE_EQ(o.original_val_accuracy, evaluate(orig.params, &orig.mask, s.val).accuracy);
        EXPECT_GE(o.val_accuracy, o.original_val_accuracy) << "t=" << t;
        EXPECT_EQ(o.result.mask.kept(), orig.mask.kept());
        EXPECT_DOUBLE_EQ(o.val_accuracy, evaluate(o.result.params, &o.result.mask, s.val).accuracy);
        EXPECT_EQ(o.log.size(), static_cast<std::size_t>(s.run.last_iteration()));
        EXPECT_EQ(apply_mask(o.result.params, o.result.mask), o.result.params);
    }
}

TEST_F(PoolsOnRun, SingleHalfCoefficientIsTheAverageRecipe) {
    for (int t : {1, 3}) {
        const PoolOutcome a = pool_interpolate(s.run, t, CoefficientPool({0.5}), s.val);
        const PoolOutcome b = pool_average(s.run, t, s.val);
        EXPECT_EQ(a.result.params, b.result.params);
        EXPECT_EQ(a.result.mask, b.result.mask);
        EXPECT_EQ(to_json_lines(a.log), to_json_lines(b.log));
    }
}

TEST_F(PoolsOnRun, PruneAfterKeepsTargetDensity) {
    PoolOptions o;
    o.prune_mode = PruneMode::after;
    const PoolOutcome r = pool_interpolate(s.run, 2, CoefficientPool::standard(), s.val, o);
    EXPECT_EQ(r.result.mask.kept(), s.run.checkpoints[2].mask.kept());
}

TEST_F(PoolsOnRun, DenseStrengtheningStaysDense) {
    const PoolOutcome r = strengthen_dense(s.run, CoefficientPool::standard(), s.val);
    EXPECT_DOUBLE_EQ(r.result.mask.density(), 1.0);
    EXPECT_GE(r.val_accuracy, r.original_val_accuracy);
}

TEST_F(PoolsOnRun, LimitAndThreadsOptions) {
    PoolOptions o;
    o.limit = 2;
    const PoolOutcome r = pool_interpolate(s.run, 2, CoefficientPool::standard(), s.val, o);
    ASSERT_EQ(r.log.size(), 2u);
    EXPECT_EQ(r.log[0].candidate, 1);
    EXPECT_EQ(r.log[1].candidate, 3);
    o.threads = 3;
    EXPECT_EQ(pool_interpolate(s.run, 2, CoefficientPool::standard(), s.val, o).result, r.result);
}

TEST_F(PoolsOnRun, SearchLogIsJsonLines) {
    const PoolOutcome r = pool_interpolate(s.run, 1, CoefficientPool::standard(), s.val);
    std::istringstream in(to_json_lines(r.log));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("candidate").get<int>(), r.log[n].candidate);
        EXPECT_EQ(j.at("alpha").get<double>(), r.log[n].alpha);
        EXPECT_EQ(j.at("accepted").get<bool>(), r.log[n].accepted);
        ++n;
    }
    EXPECT_EQ(n, r.log.size());
}

TEST(PruneMode, StringRoundTrip) {
    EXPECT_EQ(prune_mode_from_string(to_string(PruneMode::after)), PruneMode::after);
    EXPECT_EQ(to_string(PruneMode::during), "during");
    EXPECT_THROW(prune_mode_from_string("sometimes"), DomainError);
}
