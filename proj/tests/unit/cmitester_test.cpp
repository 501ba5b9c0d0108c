#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "citest/cmitester.hpp"
#include "citest/instances.hpp"

using namespace citest;

namespace {

BSet all_of(std::size_t n, bool v = true) { return BSet(n, v); }

// Samples with b uniform over d_b and a, c uniform bits; c copies a when `far`.
GeneratorStream<Triplet> bit_stream(std::size_t d_b, bool far, Rng& rng) {
    return GeneratorStream<Triplet>(
        [&rng, d_b, far] {
            const auto b = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, d_b - 1)(rng));
            const auto a = static_cast<std::uint32_t>(rng() & 1u);
            const auto c = far ? a : static_cast<std::uint32_t>(rng() & 1u);
            return Triplet{a, b, c};
        },
        std::size_t{1} << 40);
}

}  // namespace

TEST(PairingMoments, FrozenValues) {
    const double want[3][3] = {{0.1, 0.00468268826949546, 0.00469038703830272},
                               {0.5, 0.0919698602928606, 0.0955301397071394},
                               {1.0, 0.283833820809153, 0.32424926878627}};
    for (const auto& w : want) {
        auto m = pairing_moments(w[0]);
        EXPECT_NEAR(m.e1, w[1], 1e-12);
        EXPECT_NEAR(m.e2, w[2], 1e-12);
        EXPECT_LE(m.e1, m.e2);
        EXPECT_LE(m.e2, 0.75 * w[0] * w[0]);
    }
    auto z = pairing_moments(0.0);
    EXPECT_EQ(z.e1, 0.0);
    EXPECT_EQ(z.e2, 0.0);
    EXPECT_THROW(pairing_moments(-1.0), InvalidThreshold);
}

TEST(PairingMoments, MatchSimulation) {
    Rng rng(3);
    const Dims3 d{1, 1, 1};
    for (double x : {0.1, 0.5, 1.0}) {
        const int reps = 100000;
        double s1 = 0, s2 = 0;
        for (int r = 0; r < reps; ++r) {
            const auto n = static_cast<std::size_t>(poissonize(x, rng));
            std::vector<Triplet> v(n, Triplet{0, 0, 0});
            const double k = static_cast<double>(sim_abc(v, d, all_of(1), rng).total());
            s1 += k;
            s2 += k * k;
        }
        const auto m = pairing_moments(x);
        const double mean = s1 / reps, sq = s2 / reps;
        const double var = sq - mean * mean;
        EXPECT_LT(std::abs(mean - m.e1), 3 * std::sqrt(var / reps) + 1e-12);
        EXPECT_LT(std::abs(sq - m.e2), 3 * std::sqrt((m.e2 * 16) / reps) + 1e-12);
    }
}

TEST(SimAbc, CountsFloorHalf) {
    Rng rng(1);
    const Dims3 d{3, 4, 3};
    EXPECT_EQ(sim_abc(std::vector<Triplet>{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}, d, all_of(4), rng).total(), 0);
    std::vector<Triplet> two{{0, 1, 0}, {2, 1, 2}};
    for (int t = 0; t < 20; ++t) {
        auto c = sim_abc(two, d, all_of(4), rng);
        EXPECT_EQ(c.total(), 1);
        EXPECT_EQ(c.get(d.flat({0, 1, 0})) + c.get(d.flat({2, 1, 2})), 1);
    }
    std::vector<Triplet> five(5, Triplet{1, 3, 1});
    EXPECT_EQ(sim_abc(five, d, all_of(4), rng).total(), 2);
    BSet none = all_of(4, false);
    EXPECT_EQ(sim_abc(five, d, none, rng).total(), 0);
    EXPECT_EQ(sim_abc_ci(five, d, none, rng).total(), 0);
}

TEST(SimAbcCi, CrossesCoordinates) {
    Rng rng(2);
    const Dims3 d{3, 1, 3};
    std::vector<Triplet> two{{1, 0, 1}, {2, 0, 2}};
    int first = 0;
    for (int t = 0; t < 2000; ++t) {
        auto c = sim_abc_ci(two, d, all_of(1), rng);
        ASSERT_EQ(c.total(), 1);
        const bool a = c.get(d.flat({1, 0, 2})) == 1, b = c.get(d.flat({2, 0, 1})) == 1;
        ASSERT_TRUE(a != b);
        first += a;
    }
    EXPECT_NEAR(first / 2000.0, 0.5, 5 * std::sqrt(0.25 / 2000));
}

TEST(SimAbcCi, ConditionalProduct) {
    Rng rng(4);
    Joint3 j(2, 1, 2, {0.4, 0.1, 0.2, 0.3});
    const Dims3 d{2, 1, 2};
    const double pa0 = 0.5, pc0 = 0.6;
    const double want[4] = {pa0 * pc0, pa0 * (1 - pc0), (1 - pa0) * pc0, (1 - pa0) * (1 - pc0)};
    std::vector<double> cnt(4, 0.0);
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
        auto c = sim_abc_ci(sample_triplets(j, 2, rng), d, all_of(1), rng);
        for (const auto& [f, n] : c.entries()) cnt[f] += static_cast<double>(n);
    }
    for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(cnt[i] - reps * want[i]), 5 * std::sqrt(reps * want[i] * (1 - want[i])));
}

TEST(SimAbcCi, ConditionalMarginalUnderSimAbc) {
    Rng rng(5);
    Joint3 j(2, 1, 2, {0.4, 0.1, 0.2, 0.3});
    const Dims3 d{2, 1, 2};
    std::vector<double> cnt(4, 0.0);
    double total = 0;
    for (int r = 0; r < 50000; ++r) {
        auto c = sim_abc(sample_triplets(j, 3, rng), d, all_of(1), rng);
        for (const auto& [f, n] : c.entries()) cnt[f] += static_cast<double>(n);
        total += static_cast<double>(c.total());
    }
    for (int i = 0; i < 4; ++i) {
        const double p = j.probs()[i];
        EXPECT_LT(std::abs(cnt[i] - total * p), 5 * std::sqrt(total * p * (1 - p)));
    }
}

TEST(SimAbcCiLarge, PassthroughAndAbort) {
    Rng rng(6);
    std::vector<Triplet> v;
    for (std::uint32_t i = 0; i < 50; ++i) v.push_back({i % 3, 0, i % 2});
    auto out = sim_abc_ci_large(v, all_of(2, false), rng);
    EXPECT_FALSE(out.aborted);
    EXPECT_EQ(out.samples.size(), 10u);

    // Five draws, all at b = 1: the single queued phase-two draw meets a four-element queue.
    std::vector<Triplet> w(5, Triplet{0, 1, 0});
    EXPECT_FALSE(sim_abc_ci_large(w, all_of(2), rng).aborted);
    // b = 1 appears only once; whenever it lands in phase two its queue is empty.
    std::vector<Triplet> x{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {1, 1, 1}};
    int aborts = 0;
    for (int t = 0; t < 500; ++t) {
        auto r = sim_abc_ci_large(x, all_of(2), rng);
        if (r.aborted) {
            ++aborts;
            EXPECT_TRUE(r.samples.empty());
        } else {
            EXPECT_EQ(r.samples[0].b, 0u);
        }
    }
    EXPECT_GT(aborts, 50);
    EXPECT_LT(aborts, 150);
}

TEST(SimAbcCiLarge, EmitsMarkovReference) {
    Rng rng(7);
    Joint3 j(2, 2, 2, {0.12, 0.08, 0.05, 0.20, 0.03, 0.17, 0.25, 0.10});
    const auto ref = j.markov_reference().probs();
    std::vector<double> cnt(8, 0.0);
    double n = 0;
    for (int r = 0; r < 20; ++r) {
        auto out = sim_abc_ci_large(sample_triplets(j, 50000, rng), all_of(2), rng);
        ASSERT_FALSE(out.aborted);
        for (const auto& t : out.samples) cnt[j.index(t.a, t.b, t.c)] += 1;
        n += static_cast<double>(out.samples.size());
    }
    for (int i = 0; i < 8; ++i) EXPECT_LT(std::abs(cnt[i] - n * ref[i]), 5 * std::sqrt(n * ref[i] * (1 - ref[i])));
}

TEST(RegimeSplit, TiesGoLarge) {
    auto r = split_regimes({0.25, 0.1, 0.05}, 5.0);
    EXPECT_DOUBLE_EQ(r.nu, 0.1);
    EXPECT_EQ(r.b_small, (BSet{false, false, true}));
    EXPECT_EQ(r.b_large, (BSet{true, true, false}));
}

TEST(Grid3D, ExampleAndCoverage) {
    const Dims3 d{2, 3, 2};
    std::vector<double> pab(6, 0.5), pbc(6, 0.5), pb{0.9, 0.05, 0.05};
    pab[1] = 1e-9;
    BSet bl{true, true, false};
    auto g = build_grid_3d(pab, pbc, pb, bl, d, 1e3, 0.01, 0.3);
    EXPECT_EQ(g.bucket_ab[0], 0);
    EXPECT_EQ(g.bucket_b[0], 0);
    EXPECT_EQ(g.bucket_ab[1], g.k_a);
    EXPECT_EQ(g.bucket_b[2], -1);
    std::set<Index> seen;
    for (const auto& [key, s] : g.categories)
        for (auto f : s.indices()) {
            EXPECT_TRUE(seen.insert(f).second);
            EXPECT_TRUE(bl[(f / d.c) % d.b]);
        }
    EXPECT_EQ(seen.size(), 2u * 2u * 2u);
    EXPECT_TRUE(g.categories.count({0, 0, 0}));
}

TEST(Grid3D, HellingerSplitsOverCategories) {
    auto m = planted_far_cmi(4, 3, 4, 0.3, 2);
    const Dims3 d{4, 3, 4};
    const auto p = m.joint.probs();
    const auto q = m.joint.markov_reference().probs();
    auto g = build_grid_3d(m.joint.marginal_ab(), m.joint.marginal_bc(), m.joint.marginal_b(), all_of(3), d, 1e3,
                           0.01, 0.3);
    double sum = 0.0;
    for (const auto& [key, s] : g.categories)
        for (auto f : s.indices()) sum += 0.5 * std::pow(std::sqrt(p[f]) - std::sqrt(q[f]), 2);
    EXPECT_NEAR(sum, hellinger_sq(p, q), 1e-12);
}

TEST(CmiPlan, TheoreticalPresetIsLarger) {
    const Dims3 d{8, 12, 8};
    auto a = cmi_plan(d, 0.5, {});
    auto b = cmi_plan(d, 0.5, CmiConstants::paper());
    EXPECT_GT(b.n_s, a.n_s);
    EXPECT_GE(a.n_l, a.n_s);
    EXPECT_DOUBLE_EQ(a.nu, 1.0 / (2.0 * a.n_s));
    EXPECT_THROW(cmi_plan(d, 0.0, {}), InvalidThreshold);
}

TEST(CmiSmall, EmptyRegimeIsYes) {
    Rng rng(1);
    auto s = bit_stream(4, true, rng);
    auto v = cmi_small_test(s, all_of(4, false), 0.25, 100, {2, 4, 2}, rng);
    EXPECT_EQ(v.outcome, Outcome::Yes);
    EXPECT_EQ(s.used(), 0u);
}

TEST(CmiSmall, AbortsWhenPoissonSizesOverflow) {
    Rng rng(2);
    int aborts = 0;
    for (int t = 0; t < 200; ++t) {
        auto s = bit_stream(4, false, rng);
        auto v = cmi_small_test(s, all_of(4), 0.25, 2.0, {2, 4, 2}, rng);
        if (v.outcome == Outcome::Abort) {
            ++aborts;
            EXPECT_EQ(s.used(), 0u);
        }
    }
    EXPECT_GT(aborts, 0);
}

TEST(CmiSmall, SeparatesMarkovFromCorrelatedSlices) {
    // p_b = 1/N_S on every slice; the written threshold sits far below the noise floor here,
    // so it is scaled to half the expected far statistic.
    const std::size_t d_b = 1000000;
    const double n_s = static_cast<double>(d_b);
    const Dims3 d{2, d_b, 2};
    const double e1 = pairing_moments(n_s / 8.0 / static_cast<double>(d_b)).e1;
    const double far_mean = static_cast<double>(d_b) * e1 * e1 / 4.0;
    CmiConstants k;
    const double written = std::pow(n_s / 8.0 * 0.25, 4.0) / (2.0 * std::pow(4.0, 7.0) * 2.0 * std::pow(n_s, 3.0) * 2.0);
    k.small_threshold_scale = far_mean / 2.0 / written;
    const BSet bs = all_of(d_b);
    int null_no = 0, far_no = 0;
    const int trials = 15;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(9, t));
        auto s0 = bit_stream(d_b, false, rng);
        auto v0 = cmi_small_test(s0, bs, 0.25, n_s, d, rng, k);
        EXPECT_NEAR(v0.threshold, far_mean / 2.0, 1e-9 * far_mean);
        null_no += v0.outcome == Outcome::No;
        auto s1 = bit_stream(d_b, true, rng);
        far_no += cmi_small_test(s1, bs, 0.25, n_s, d, rng, k).outcome == Outcome::No;
    }
    EXPECT_LE(null_no, trials / 3);
    EXPECT_GE(far_no, 2 * trials / 3);
}

TEST(CmiLarge, EmptyRegimeIsYes) {
    Rng rng(1);
    auto s = bit_stream(4, true, rng);
    auto v = cmi_large_test(s, all_of(4, false), 0.25, 0.01, {2, 4, 2}, rng);
    EXPECT_EQ(v.outcome, Outcome::Yes);
    EXPECT_TRUE(v.categories.empty());
}

namespace {

Outcome run_cmi(const Joint3& j, std::uint64_t seed, Regime regime = Regime::Both) {
    Rng rng(seed);
    const Dims3 d{j.d_a(), j.d_b(), j.d_c()};
    CmiConstants k;
    auto s = joint3_stream(j, rng, cmi_plan(d, 0.5, k).budget);
    return cmi_test(*s, d, 0.5, rng, k, regime).outcome;
}

}  // namespace

TEST(CmiTest, MarkovVersusPlanted) {
    int null_no = 0, far_no = 0, aborts = 0;
    const int trials = 12;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(70, t));
        const auto o0 = run_cmi(random_markov(8, 12, 8, 0.5, rng), derive_seed(71, t));
        const auto o1 = run_cmi(planted_far_cmi(8, 12, 8, 0.5, derive_seed(72, t)).joint, derive_seed(73, t));
        null_no += o0 == Outcome::No;
        far_no += o1 == Outcome::No;
        aborts += (o0 == Outcome::Abort) + (o1 == Outcome::Abort);
    }
    EXPECT_LE(null_no + aborts, trials / 3);
    EXPECT_GE(far_no, 2 * trials / 3);
}

TEST(CmiTest, SmallOnlySkipsLargeRegime) {
    Rng rng(5);
    auto j = planted_far_cmi(8, 12, 8, 0.5, 1).joint;
    // Every p_b sits far above nu, so the small regime is empty and the large regime is not run.
    EXPECT_EQ(run_cmi(j, 3, Regime::Small), Outcome::Yes);
    EXPECT_EQ(run_cmi(j, 3, Regime::Large), Outcome::No);
}

TEST(CmiTest, VectorOverload) {
    Rng rng(6);
    auto j = random_markov(2, 3, 2, 0.5, rng);
    EXPECT_THROW(cmi_test(sample_triplets(j, 10, rng), {2, 3, 2}, 0.5, 1), InsufficientSamples);
}
