#include "citest/mitester.hpp"

#include <cmath>
#include <string>

namespace citest {

MiConstants MiConstants::paper() {
    MiConstants k;
    k.equiv = EquivConstants::paper();
    k.c_mixed = 10.0;
    k.c_heavy = 1e5;
    k.c_total = 1e2;
    k.gamma_scale = 1.0;
    k.b_scale = 1.0;
    return k;
}

EquivConstants MiConstants::scaled_equiv() const {
    EquivConstants e = equiv;
    e.c_eq *= sample_scale;
    e.c_norm *= sample_scale;
    return e;
}

double mi_b(int i, int j, std::size_t size) {
    const double e = std::exp(-(i + j) + 2.0);
    return std::min(std::sqrt(static_cast<double>(size)) * e, std::sqrt(e));
}

double mi_gamma(int i, int j, const PartitionGrid2D& g, std::size_t size, double eps) {
    if (i < g.k_a && j < g.k_c) return std::sqrt(eps * std::exp(-(i + j + 2.0)) / (std::exp(6.0) * g.k_ac));
    return eps / (4.0 * g.k_ac * std::sqrt(static_cast<double>(size)));
}

namespace {

double k_ac_of(std::size_t d_a, std::size_t d_c, double eps) {
    const double l = std::ceil(std::log(static_cast<double>(d_a * d_c) / eps)) + 1.0;
    return l * l;
}

}  // namespace

MiPlan mi_plan(std::size_t d_a, std::size_t d_c, double eps, const MiConstants& k) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidThreshold("eps must lie in (0,1)");
    MiPlan p;
    const double da = static_cast<double>(std::max(d_a, d_c));
    const double dc = static_cast<double>(std::min(d_a, d_c));
    p.k_ac = k_ac_of(d_a, d_c, eps);
    p.n_mixed = k.sample_scale * k.c_mixed * p.k_ac * p.k_ac *
                std::min(std::pow(da, 0.75) * std::pow(dc, 0.25) / eps,
                         std::pow(da, 2.0 / 3.0) * std::pow(dc, 1.0 / 3.0) / std::pow(eps, 4.0 / 3.0));
    p.n_heavy = k.c_heavy * p.k_ac * std::sqrt(da * dc) / eps;
    p.n_formula = k.c_total * p.k_ac * std::log(p.k_ac) * std::max(p.n_heavy, p.n_mixed);
    p.k_a = p.k_c = std::max(1, static_cast<int>(std::ceil(std::log(std::max(p.n_mixed, 1.0)))));
    p.delta = 1.0 / (1e3 * p.k_ac);
    p.n_learn = static_cast<std::size_t>(
        std::ceil(8.0 * p.n_mixed * std::log(1e3 * static_cast<double>(d_a * d_c))));

    // Worst case per category: the largest sub-support.
    PartitionGrid2D g;
    g.k_a = p.k_a;
    g.k_c = p.k_c;
    g.k_ac = p.k_ac;
    const std::size_t host = d_a * d_c;
    const auto full = SubSupport::full(host);
    const auto eq = k.scaled_equiv();
    std::size_t cap = 0;
    for (int i = 0; i <= p.k_a; ++i)
        for (int j = 0; j <= p.k_c; ++j) {
            const double gamma = k.gamma_scale * mi_gamma(i, j, g, host, eps);
            const double b = k.b_scale * mi_b(i, j, host);
            cap = std::max(cap, equiv_l2_required(b, gamma, full, p.delta, eq));
        }
    const std::size_t cats = static_cast<std::size_t>((p.k_a + 1) * (p.k_c + 1));
    p.budget_p = cats * cap;
    p.budget_q = cats * cap + 2 * p.n_learn;
    return p;
}

std::vector<double> learn_buckets(const std::vector<std::size_t>& samples, std::size_t d, double tau,
                                  double zeta) {
    if (!(tau > 0.0) || !(zeta > 0.0 && zeta < 1.0)) throw InvalidThreshold("need tau > 0, zeta in (0,1)");
    const double need = 8.0 * std::log(4.0 * static_cast<double>(d) / zeta) / tau;
    if (static_cast<double>(samples.size()) < need)
        throw InsufficientSamples("learn_buckets needs " + std::to_string(static_cast<long long>(std::ceil(need))) +
                                  " samples");
    std::vector<double> f(d, 0.0);
    for (auto s : samples) {
        if (s >= d) throw DimensionMismatch("sample outside support");
        f[s] += 1.0;
    }
    for (auto& v : f) v /= static_cast<double>(samples.size());
    return f;
}

int bucket_of(double q, int k_last) {
    for (int i = 0; i < k_last; ++i)
        if (q >= std::exp(-(i + 1.0))) return i;
    return k_last;
}

PartitionGrid2D build_grid_2d(const std::vector<double>& q_hat_a, const std::vector<double>& q_hat_c,
                              double m, double eps) {
    PartitionGrid2D g;
    g.k_a = g.k_c = std::max(1, static_cast<int>(std::ceil(std::log(std::max(m, 1.0)))));
    g.k_ac = k_ac_of(q_hat_a.size(), q_hat_c.size(), eps);
    for (double q : q_hat_a) g.bucket_a.push_back(bucket_of(q, g.k_a));
    for (double q : q_hat_c) g.bucket_c.push_back(bucket_of(q, g.k_c));

    const std::size_t dc = q_hat_c.size();
    std::map<std::pair<int, int>, std::vector<Index>> cells;
    for (std::size_t a = 0; a < q_hat_a.size(); ++a)
        for (std::size_t c = 0; c < dc; ++c)
            cells[{g.bucket_a[a], g.bucket_c[c]}].push_back(a * dc + c);
    for (auto& [key, idx] : cells) g.categories.emplace(key, SubSupport(q_hat_a.size() * dc, std::move(idx)));
    return g;
}

std::vector<Pair> simulate_product_samples(const std::vector<Pair>& samples) {
    if (samples.size() % 2 != 0) throw OddSampleCount("product simulation needs an even sample count");
    std::vector<Pair> out;
    out.reserve(samples.size() / 2);
    for (std::size_t i = 0; i < samples.size(); i += 2) out.push_back({samples[i].a, samples[i + 1].c});
    return out;
}

std::vector<Pair> ProductStream::take(std::size_t n) {
    auto v = simulate_product_samples(inner_.take(2 * n));
    used_ += n;
    return v;
}

namespace {

std::vector<Index> flatten_pairs(const std::vector<Pair>& v, std::size_t d_a, std::size_t d_c) {
    std::vector<Index> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (x.a >= d_a || x.c >= d_c) throw DimensionMismatch("sample outside A x C");
        out.push_back(static_cast<Index>(x.a) * d_c + x.c);
    }
    return out;
}

}  // namespace

Verdict mi_test(SampleStream<Pair>& p, SampleStream<Pair>& q, std::size_t d_a, std::size_t d_c,
                double eps, Rng& rng, const MiConstants& k) {
    const auto plan = mi_plan(d_a, d_c, eps, k);
    const auto eq = k.scaled_equiv();
    const std::size_t used0 = p.used() + q.used();
    Verdict v;

    // Step 1: learn the reference marginals from the product stream.
    std::vector<double> qa(d_a, 0.0), qc(d_c, 0.0);
    for (const auto& s : q.take(plan.n_learn)) {
        if (s.a >= d_a) throw DimensionMismatch("sample outside A");
        qa[s.a] += 1.0;
    }
    for (const auto& s : q.take(plan.n_learn)) {
        if (s.c >= d_c) throw DimensionMismatch("sample outside C");
        qc[s.c] += 1.0;
    }
    for (auto& x : qa) x /= static_cast<double>(plan.n_learn);
    for (auto& x : qc) x /= static_cast<double>(plan.n_learn);
    const auto grid = build_grid_2d(qa, qc, plan.n_mixed, eps);

    // Step 2: one equivalence test per non-empty category, on fresh samples.
    for (const auto& [key, s] : grid.categories) {
        const auto [i, j] = key;
        CategoryDiag d;
        d.i = i;
        d.j = j;
        d.kind = (i < grid.k_a && j < grid.k_c) ? "heavy" : "mixed";
        d.size = s.size();
        d.gamma = k.gamma_scale * mi_gamma(i, j, grid, s.size(), eps);
        d.b = k.b_scale * mi_b(i, j, s.size());
        const std::size_t m = equiv_l2_required(d.b, d.gamma, s, plan.delta, eq);
        const auto sp = flatten_pairs(p.take(m), d_a, d_c);
        const auto sq = flatten_pairs(q.take(m), d_a, d_c);
        const auto r = equiv_l2(sp, sq, s, d.b, d.gamma, plan.delta, rng, eq);
        d.samples = 2 * m;
        d.repetitions = r.repetitions;
        d.far_votes = r.far_votes;
        d.statistic = r.last_z;
        d.threshold = r.threshold;
        d.far = r.outcome == EquivOutcome::Far;
        if (r.norm_rejections > 0) d.note = "norm-check rejections: " + std::to_string(r.norm_rejections);
        v.categories.push_back(d);
        v.statistic = std::max(v.statistic, static_cast<double>(r.far_votes) / r.repetitions);
        if (d.far) {
            v.outcome = Outcome::No;
            break;
        }
    }
    v.samples_used = p.used() + q.used() - used0;
    return v;
}

Verdict mi_test(const std::vector<Pair>& samples_p, const std::vector<Pair>& samples_q, std::size_t d_a,
                std::size_t d_c, double eps, std::uint64_t seed, const MiConstants& k) {
    Rng rng(seed);
    PoolStream<Pair> p(samples_p, rng);
    PoolStream<Pair> q(samples_q, rng);
    return mi_test(p, q, d_a, d_c, eps, rng, k);
}

}  // namespace citest
