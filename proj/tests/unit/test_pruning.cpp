// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "lotpool/errors.hpp"
#include "lotpool/mask.hpp"
#include "lotpool/pruning.hpp"
#include "support/oracles.hpp"

using namespace lotpool;

namespace {

ParamSet one_weight(std::vector<float> values) {
    ParamSet p;
    const std::size_t n = values.size();
    p.add("W_1", Tensor({1, n}, std::move(values)));
    p.add("b_1", Tensor({n}, 7.0f));
    return p;
}

}  // namespace

TEST(Mask, FullMaskCoversWeightsOnly) {
    Rng rng(1);
    const ParamSet p = oracle::random_mlp_params(rng, {3, 4, 2});
    const Mask m = Mask::full_for(p);
    EXPECT_EQ(m.num_entries(), 2u);
    EXPECT_EQ(m.total(), 20u);
    EXPECT_EQ(m.kept(), 20u);
    EXPECT_DOUBLE_EQ(m.density(), 1.0);
    EXPECT_NO_THROW(require_aligned(p, m));
}

TEST(Mask, ApplyZerosWeightsAndKeepsBiases) {
    const ParamSet p = one_weight({1, 2, 3});
    Mask m;
    m.add("W_1", {1, 3}, {1, 0, 1});
    const ParamSet q = apply_mask(p, m);
    EXPECT_EQ(q[0].tensor.data()[1], 0.0f);
    EXPECT_EQ(q[0].tensor.data()[2], 3.0f);
    EXPECT_EQ(q[1].tensor, p[1].tensor);
    EXPECT_NEAR(density_of(q), 2.0 / 3.0, 1e-12);
    EXPECT_THROW(m.add("W_2", {2}, {1, 2}), DomainError);
}

TEST(Mask, MisalignedMaskIsRejected) {
    const ParamSet p = one_weight({1, 2, 3});
    Mask wrong;
    wrong.add("W_1", {3, 1}, {1, 1, 1});
    EXPECT_THROW(apply_mask(p, wrong), AlignmentError);
    EXPECT_THROW(prune_fraction(p, wrong, 0.5), AlignmentError);
}

TEST(Pruning, FractionRemovesFloorOfKept) {
    const ParamSet p = one_weight({0.5f, -4.0f, 0.1f, 3.0f, -0.2f});
    const Mask m = prune_fraction(p, Mask::full_for(p), 0.5);  // floor(2.5) = 2
    EXPECT_EQ(oracle::flat_bits(m), (std::vector<std::uint8_t>{1, 1, 0, 1, 0}));
    const Mask m2 = prune_fraction(p, m, 0.5);  // floor(1.5) = 1 of the 3 kept
    EXPECT_EQ(oracle::flat_bits(m2), (std::vector<std::uint8_t>{0, 1, 0, 1, 0}));
    EXPECT_TRUE(m2.subset_of(m));
}

TEST(Pruning, TiesPruneEarlierPositionFirst) {
    const ParamSet p = one_weight({1.0f, -1.0f, 1.0f, 1.0f});
    EXPECT_EQ(oracle::flat_bits(prune_fraction(p, Mask::full_for(p), 0.5)), (std::vector<std::uint8_t>{0, 0, 1, 1}));
    EXPECT_EQ(oracle::flat_bits(prune_to_count(p, 1).mask), (std::vector<std::uint8_t>{0, 0, 0, 1}));
}

TEST(Pruning, MaskedPositionsAreIgnoredEvenIfLarge) {
    const ParamSet p = one_weight({100.0f, 1.0f, 2.0f, 3.0f});
    Mask m;
    m.add("W_1", {1, 4}, {0, 1, 1, 1});
    EXPECT_EQ(oracle::flat_bits(prune_fraction(p, m, 0.34)), (std::vector<std::uint8_t>{0, 0, 1, 1}));
}

TEST(Pruning, DegenerateRequestsThrow) {
    const ParamSet p = one_weight({1.0f, 2.0f});
    EXPECT_THROW(prune_fraction(p, Mask::full_for(p), 0.0), DomainError);
    EXPECT_THROW(prune_fraction(p, Mask::full_for(p), 1.0), DomainError);
    Mask one;
    one.add("W_1", {1, 2}, {0, 1});
    EXPECT_NO_THROW(prune_fraction(p, one, 0.5));  // floor(0.5) = 0 removed
    Mask none;
    none.add("W_1", {1, 2}, {0, 0});
    EXPECT_THROW(prune_fraction(p, none, 0.5), DegenerateMaskError);
    EXPECT_THROW(prune_to_count(p, 0), DegenerateMaskError);
    EXPECT_THROW(prune_to_count(p, 3), DomainError);
    EXPECT_THROW(prune_to_density(p, 1.5), DomainError);
}

TEST(Pruning, DensityRoundsHalfUp) {
    EXPECT_EQ(kept_count_for_density(0.5, 5), 3u);
    EXPECT_EQ(kept_count_for_density(0.8, 10), 8u);
    EXPECT_EQ(kept_count_for_density(0.64, 1000), 640u);
    EXPECT_EQ(kept_count_for_density(1.0, 7), 7u);
}

TEST(Pruning, DensityOneIsIdentity) {
    Rng rng(4);
    const ParamSet p = oracle::random_mlp_params(rng, {4, 5, 2});
    const Pruned r = prune_to_density(p, 1.0);
    EXPECT_EQ(r.params, p);
    EXPECT_EQ(r.mask, Mask::full_for(p));
}

TEST(Pruning, ToDensityMatchesFullSort) {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const ParamSet p = oracle::random_params(rng, {{1 + rng.below(20), 1 + rng.below(20)}, {4}, {3, 1 + rng.below(9)}});
        const double d = 0.05 + 0.9 * rng.uniform();
        const Pruned r = prune_to_density(p, d);
        const std::size_t keep = kept_count_for_density(d, p.weight_count());
        const auto want = oracle::keep_largest(p, keep);
        ASSERT_EQ(oracle::flat_bits(r.mask), want) << "trial " << trial;
        EXPECT_EQ(r.params, oracle::zero_outside(p, want));
        EXPECT_EQ(r.mask.kept(), keep);
    }
}

TEST(Pruning, FractionMatchesFullSortOverKeptSet) {
    Rng rng(78);
    for (int trial = 0; trial < 30; ++trial) {
        const ParamSet p = oracle::random_params(rng, {{8, 9}, {9}, {9, 4}});
        const Mask m = oracle::random_mask(rng, p, 0.7);
        const auto eligible = oracle::flat_bits(m);
        std::size_t kept = 0;
        for (auto b : eligible) kept += b;
        const std::size_t remove = static_cast<std::size_t>(0.2 * static_cast<double>(kept));
        const Mask got = prune_fraction(p, m, 0.2);
        EXPECT_EQ(oracle::flat_bits(got), oracle::keep_largest(p, kept - remove, &eligible));
        EXPECT_TRUE(got.subset_of(m));
    }
}

TEST(Pruning, WithinKeepsLargestSurvivors) {
    Rng rng(79);
    const ParamSet p = oracle::random_params(rng, {{10, 10}, {10}});
    const Mask m = oracle::random_mask(rng, p, 0.6);
    const auto eligible = oracle::flat_bits(m);
    const std::size_t keep = m.kept() / 2;
    const Mask got = prune_within(p, m, keep);
    EXPECT_EQ(got.kept(), keep);
    EXPECT_EQ(oracle::flat_bits(got), oracle::keep_largest(p, keep, &eligible));
    EXPECT_EQ(prune_within(p, m, m.kept()), m);
    EXPECT_THROW(prune_within(p, m, m.kept() + 1), DomainError);
    EXPECT_THROW(prune_within(p, m, 0), DegenerateMaskError);
}
