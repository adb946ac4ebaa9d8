#include <gtest/gtest.h>

#include <cmath>

#include "solgen/voms_ctw.hpp"

using namespace solgen;

namespace {

Bits bits_of(std::string_view s) {
    Bits b;
    for (char c : s) b.push_back(c == '1' ? 1 : 0);
    return b;
}

double ctw_prob(std::uint32_t depth, std::string_view s) {
    const auto b = bits_of(s);
    return std::exp(ctw_log_probability(depth, b));
}

}  // namespace

TEST(Kt, ClosedFormValues) {
    EXPECT_NEAR(std::exp(kt_log(2, 0)), 3.0 / 8.0, 1e-15);
    EXPECT_NEAR(std::exp(kt_log(1, 1)), 1.0 / 8.0, 1e-15);
    EXPECT_NEAR(std::exp(kt_log(0, 0)), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(kt_predictive(1, 0, 0), 0.75);
}

TEST(Kt, SequentialProductMatchesClosedForm) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::uint64_t a = 0, b = 0;
        double log_p = 0;
        for (int t = 0; t < 200; ++t) {
            const int bit = bernoulli(rng, 0.3) ? 1 : 0;
            log_p += std::log(kt_predictive(a, b, bit));
            (bit ? b : a) += 1;
        }
        EXPECT_NEAR(log_p, kt_log(a, b), 1e-9);
    }
}

TEST(Ctw, DepthOneTwoBitValues) {
    EXPECT_NEAR(ctw_prob(1, "00"), 3.0 / 8.0, 1e-15);
    EXPECT_NEAR(ctw_prob(1, "01"), 1.0 / 8.0, 1e-15);
    EXPECT_NEAR(ctw_prob(1, "10"), 3.0 / 16.0, 1e-15);
    EXPECT_NEAR(ctw_prob(1, "11"), 5.0 / 16.0, 1e-15);
    EXPECT_NEAR(ctw_prob(0, "00"), 3.0 / 8.0, 1e-15);
}

TEST(Ctw, MatchesBruteForceMixture) {
    for (std::uint32_t depth = 0; depth <= 3; ++depth) {
        for (std::size_t len = 1; len <= 8; ++len) {
            for (std::uint32_t code = 0; code < (1u << len); ++code) {
                Bits b(len);
                for (std::size_t i = 0; i < len; ++i) b[i] = (code >> i) & 1u;
                EXPECT_NEAR(ctw_log_probability(depth, b), std::log(brute_force_mixture(depth, b)), 1e-9)
                    << depth << " " << code;
            }
        }
    }
}

TEST(Ctw, PredictiveSumsToOneAndMatchesUpdate) {
    Rng rng(8);
    CtwPredictor ctw(6);
    double log_p = 0;
    for (int t = 0; t < 300; ++t) {
        const double p0 = ctw.probability(0), p1 = ctw.probability(1);
        ASSERT_NEAR(p0 + p1, 1.0, 1e-12);
        const int bit = bernoulli(rng, 0.7) ? 0 : 1;
        const double p = ctw.update(bit);
        ASSERT_NEAR(p, bit ? p1 : p0, 1e-12);
        log_p += std::log(p);
    }
    EXPECT_NEAR(log_p, ctw.log_probability(), 1e-9);
}

TEST(Ctw, NodeCountBoundedByLengthTimesDepth) {
    Rng rng(2);
    CtwPredictor ctw(24);
    for (int t = 0; t < 256; ++t) ctw.update(bernoulli(rng, 0.5) ? 1 : 0);
    EXPECT_LE(ctw.node_count(), 1u + 256u * 24u);
    ctw.reset();
    EXPECT_EQ(ctw.node_count(), 1u);
    EXPECT_NEAR(ctw.probability(0), 0.5, 1e-15);
}

TEST(KtPredictor, OrderZeroAndOrderOne) {
    KtPredictor k0(0);
    EXPECT_DOUBLE_EQ(k0.update(0), 0.5);
    EXPECT_DOUBLE_EQ(k0.update(0), 0.75);
    KtPredictor k1(1);
    EXPECT_DOUBLE_EQ(k1.update(1), 0.5);   // context 0 (padding)
    EXPECT_DOUBLE_EQ(k1.update(1), 0.5);   // context 1, fresh
    EXPECT_DOUBLE_EQ(k1.update(1), 0.75);  // context 1 saw one 1
    EXPECT_THROW(KtPredictor(21), std::invalid_argument);
}

TEST(BruteForce, RefusesLargeInputs) {
    const Bits b(17, 0);
    EXPECT_THROW(brute_force_mixture(2, b), std::invalid_argument);
    EXPECT_THROW(brute_force_mixture(4, Bits{0}), std::invalid_argument);
}

TEST(SuffixTree, ValidatesLeafSets) {
    EXPECT_NO_THROW(SuffixTree(1, {VomsLeaf{1, 0, 0.5}, VomsLeaf{1, 1, 0.5}}));
    EXPECT_THROW(SuffixTree(1, {VomsLeaf{1, 0, 0.5}}), std::invalid_argument);  // incomplete
    EXPECT_THROW(SuffixTree(2, {VomsLeaf{0, 0, 0.5}, VomsLeaf{1, 1, 0.5}}), std::invalid_argument);
    EXPECT_THROW(SuffixTree(0, {VomsLeaf{1, 0, 0.5}, VomsLeaf{1, 1, 0.5}}), std::invalid_argument);
    EXPECT_THROW(SuffixTree(0, {VomsLeaf{0, 0, 1.5}}), std::invalid_argument);
}

TEST(SuffixTree, FindLeafUsesMostRecentBitFirst) {
    // Contexts read lag 1 first: "0", "10", "11".
    const SuffixTree t(2, {VomsLeaf{1, 0b0, 0.1}, VomsLeaf{2, 0b01, 0.2}, VomsLeaf{2, 0b11, 0.3}});
    const Bits h = bits_of("011");
    EXPECT_DOUBLE_EQ(t.find_leaf(h, 0).theta, 0.1);  // padding zeros
    EXPECT_DOUBLE_EQ(t.find_leaf(h, 2).theta, 0.2);  // lag1=1, lag2=0
    EXPECT_DOUBLE_EQ(t.find_leaf(h, 3).theta, 0.3);  // lag1=1, lag2=1
    EXPECT_EQ(t.leaves()[1].context(), "10");
}

TEST(SampleTree, ForcedSplitsGiveFullTree) {
    Rng rng(1);
    const double alphas[] = {0.999999999, 0.999999999};
    const auto t = sample_tree(2, alphas, rng);
    EXPECT_EQ(t.leaf_count(), 4u);
    EXPECT_EQ(t.depth(), 2u);
    EXPECT_THROW(sample_tree(2, std::span<const double>(std::array<double, 1>{1.0}), rng), std::invalid_argument);
    EXPECT_THROW(sample_tree(33, rng), std::invalid_argument);
}

TEST(SampleTree, DeterministicForSeed) {
    Rng a(77), b(77);
    const auto ta = sample_tree(24, a), tb = sample_tree(24, b);
    EXPECT_EQ(ta.leaves(), tb.leaves());
    EXPECT_EQ(sample_sequence(ta, 64, a).bits, sample_sequence(tb, 64, b).bits);
}

TEST(SampleTree, DepthPmfKnownValues) {
    const auto pmf = tree_depth_pmf(2);
    EXPECT_DOUBLE_EQ(pmf[0], 0.5);
    EXPECT_DOUBLE_EQ(pmf[1], 0.125);
    EXPECT_DOUBLE_EQ(pmf[2], 0.375);
    double s = 0;
    for (double p : tree_depth_pmf(24)) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(SampleTree, EmpiricalDepthFollowsPmf) {
    Rng rng(4);
    const auto pmf = tree_depth_pmf(3);
    std::array<int, 4> hits{};
    const int n = 40000;
    for (int i = 0; i < n; ++i) ++hits[sample_tree(3, rng).depth()];
    for (std::size_t d = 0; d < 4; ++d) {
        EXPECT_NEAR(hits[d] / double(n), pmf[d], 4 * std::sqrt(pmf[d] * (1 - pmf[d]) / n)) << d;
    }
}

TEST(SampleSequence, ConstantTreeEmitsByTheta) {
    Rng rng(3);
    const SuffixTree zeros(0, {VomsLeaf{0, 0, 1.0}});
    const auto s = sample_sequence(zeros, 32, rng);
    EXPECT_EQ(s.bits, Bits(32, 0));
    EXPECT_EQ(s.p_zero, std::vector<double>(32, 1.0));
    // Alternating process: after 0 emit 1, after 1 emit 0.
    const SuffixTree alt(1, {VomsLeaf{1, 0, 0.0}, VomsLeaf{1, 1, 1.0}});
    EXPECT_EQ(sample_sequence(alt, 6, rng).bits, bits_of("101010"));
}

TEST(Arcsine, MeanAndVariance) {
    Rng rng(6);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_arcsine(rng);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, 0.5, 4 * std::sqrt(0.125 / n));
    EXPECT_NEAR(var, 0.125, 0.002);
}
