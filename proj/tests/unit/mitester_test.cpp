#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "citest/instances.hpp"
#include "citest/mitester.hpp"

using namespace citest;

TEST(Buckets, IntervalArithmetic) {
    EXPECT_EQ(bucket_of(0.5, 6), 0);
    EXPECT_EQ(bucket_of(0.1, 6), 2);
    EXPECT_EQ(bucket_of(1.0, 6), 0);
    EXPECT_EQ(bucket_of(std::exp(-1.0), 6), 0);
    EXPECT_EQ(bucket_of(std::exp(-6.5), 6), 6);
    EXPECT_EQ(bucket_of(0.0, 6), 6);
}

TEST(LearnBuckets, PointMassAndZeros) {
    std::vector<std::size_t> s(5000, 3);
    auto f = learn_buckets(s, 5, 0.01, 0.1);
    EXPECT_DOUBLE_EQ(f[3], 1.0);
    EXPECT_DOUBLE_EQ(f[0], 0.0);
    EXPECT_THROW(learn_buckets({1, 2}, 5, 0.01, 0.1), InsufficientSamples);
}

TEST(LearnBuckets, UniformFactorTwo) {
    const double tau = 0.05, zeta = 0.01;
    const auto n = static_cast<std::size_t>(std::ceil(8.0 * std::log(4.0 * 10 / zeta) / tau));
    int good = 0;
    for (std::uint64_t t = 0; t < 300; ++t) {
        auto f = learn_buckets(sample(Dist::uniform(10), n, t), 10, tau, zeta);
        bool ok = true;
        for (double v : f) ok = ok && v >= 0.05 && v <= 0.2;
        good += ok;
    }
    EXPECT_GE(good, 297);
}

TEST(Grid2D, PartitionsEveryCell) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        auto qa = random_marginal(1 + rng() % 20, 0.99, rng).probs();
        auto qc = random_marginal(1 + rng() % 20, 0.99, rng).probs();
        auto g = build_grid_2d(qa, qc, 1e4, 0.3);
        std::set<Index> seen;
        std::size_t total = 0;
        for (const auto& [key, s] : g.categories) {
            EXPECT_FALSE(s.empty());
            total += s.size();
            for (auto i : s.indices()) {
                seen.insert(i);
                EXPECT_EQ(g.bucket_a[i / qc.size()], key.first);
                EXPECT_EQ(g.bucket_c[i % qc.size()], key.second);
            }
        }
        EXPECT_EQ(total, qa.size() * qc.size());
        EXPECT_EQ(seen.size(), total);
    }
}

TEST(Grid2D, BucketRatioWithinE) {
    std::vector<double> q{0.3, 0.2, 0.2, 0.15, 0.1, 0.05};
    auto g = build_grid_2d(q, {1.0}, 1e3, 0.3);
    for (std::size_t a = 0; a < q.size(); ++a)
        for (std::size_t b = 0; b < q.size(); ++b)
            if (g.bucket_a[a] == g.bucket_a[b] && g.bucket_a[a] < g.k_a) EXPECT_LE(q[a] / q[b], std::exp(1.0));
}

TEST(Grid2D, HellingerSplitsOverCategories) {
    auto m = planted_far_mi(6, 5, 0.3, 4);
    const auto p = m.joint.probs();
    const auto q = m.joint.product_of_marginals().probs();
    auto g = build_grid_2d(m.joint.marginal_a().probs(), m.joint.marginal_c().probs(), 1e3, 0.3);
    double sum = 0.0;
    for (const auto& [key, s] : g.categories)
        for (auto i : s.indices()) sum += 0.5 * std::pow(std::sqrt(p[i]) - std::sqrt(q[i]), 2);
    EXPECT_NEAR(sum, hellinger_sq(p, q), 1e-12);
}

TEST(Grid2D, HeavyCategoryBound) {
    auto m = planted_far_mi(6, 5, 0.3, 4);
    const auto qa = m.joint.marginal_a().probs(), qc = m.joint.marginal_c().probs();
    const auto p = m.joint.probs();
    const auto q = m.joint.product_of_marginals().probs();
    auto g = build_grid_2d(qa, qc, 1e3, 0.3);
    for (const auto& [key, s] : g.categories) {
        if (key.first == g.k_a || key.second == g.k_c) continue;
        double h = 0.0, l2 = 0.0, qmax = 0.0;
        for (auto i : s.indices()) {
            h += 0.5 * std::pow(std::sqrt(p[i]) - std::sqrt(q[i]), 2);
            l2 += (p[i] - q[i]) * (p[i] - q[i]);
            qmax = std::max(qmax, q[i]);
        }
        EXPECT_LE(h, std::exp(6.0) * l2 / qmax + 1e-15);
    }
}

TEST(ProductSimulation, PairsFirstAWithSecondC) {
    auto out = simulate_product_samples({{1, 1}, {2, 2}});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0], (Pair{1, 2}));
    EXPECT_THROW(simulate_product_samples({{1, 1}}), OddSampleCount);
    auto pm = simulate_product_samples(std::vector<Pair>(10, Pair{3, 4}));
    for (const auto& x : pm) EXPECT_EQ(x, (Pair{3, 4}));
}

TEST(ProductSimulation, MatchesProductOfMarginals) {
    Joint2 j(2, 3, {0.1, 0.2, 0.1, 0.3, 0.05, 0.25});
    const auto want = j.product_of_marginals().probs();
    Rng rng(5);
    const std::size_t n = 1000000;
    auto out = simulate_product_samples(sample_pairs(j, 2 * n, rng));
    std::vector<double> cnt(6, 0.0);
    for (const auto& x : out) cnt[j.index(x.a, x.c)] += 1;
    for (std::size_t i = 0; i < 6; ++i)
        EXPECT_LT(std::abs(cnt[i] - n * want[i]), 5 * std::sqrt(n * want[i] * (1 - want[i])));
}

TEST(MiPlan, GapsAndBuckets) {
    auto p = mi_plan(16, 16, 0.4, {});
    EXPECT_GE(p.k_a, 1);
    EXPECT_GT(p.budget_p, 0u);
    PartitionGrid2D g;
    g.k_a = g.k_c = p.k_a;
    g.k_ac = p.k_ac;
    EXPECT_NEAR(mi_gamma(0, 0, g, 256, 0.4), std::sqrt(0.4 * std::exp(-2.0) / (std::exp(6.0) * p.k_ac)), 1e-15);
    EXPECT_NEAR(mi_gamma(g.k_a, 0, g, 256, 0.4), 0.4 / (4.0 * p.k_ac * 16.0), 1e-15);
    EXPECT_THROW(mi_plan(4, 4, 1.5, {}), InvalidThreshold);
}

namespace {

struct Rates {
    int null_no = 0, far_no = 0;
};

Rates run_mi(int trials, const MiConstants& k) {
    Rates r;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(40, t));
        for (int far = 0; far < 2; ++far) {
            Joint2 j = far ? planted_far_mi(16, 16, 0.4, derive_seed(41, t)).joint : random_product(16, 16, 0.5, rng);
            auto plan = mi_plan(16, 16, 0.4, k);
            auto p = joint2_stream(j, rng, plan.budget_p);
            auto qs = joint2_stream(j, rng, 2 * plan.budget_q);
            ProductStream q(*qs);
            auto v = mi_test(*p, q, 16, 16, 0.4, rng, k);
            (far ? r.far_no : r.null_no) += v.outcome == Outcome::No;
        }
    }
    return r;
}

}  // namespace

TEST(MiTest, ProductVersusPlanted) {
    MiConstants k;
    k.sample_scale = 0.1;
    auto r = run_mi(30, k);
    EXPECT_LE(r.null_no, 10);
    EXPECT_GE(r.far_no, 20);
}

TEST(MiTest, VectorOverloadIsDeterministic) {
    Rng rng(1);
    Joint2 j = random_product(6, 6, 0.5, rng);
    MiConstants k;
    k.sample_scale = 0.05;
    auto plan = mi_plan(6, 6, 0.4, k);
    auto sp = sample_pairs(j, plan.budget_p, rng);
    auto sq = simulate_product_samples(sample_pairs(j, 2 * plan.budget_q, rng));
    auto a = mi_test(sp, sq, 6, 6, 0.4, 9, k);
    auto b = mi_test(sp, sq, 6, 6, 0.4, 9, k);
    EXPECT_EQ(a.outcome, b.outcome);
    EXPECT_EQ(a.samples_used, b.samples_used);
    EXPECT_EQ(a.categories.size(), b.categories.size());
}
