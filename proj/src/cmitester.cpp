#include "citest/cmitester.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "citest/mitester.hpp"

namespace citest {

PairingMoments pairing_moments(double x) {
    if (!(x >= 0.0)) throw InvalidThreshold("x_b must be non-negative");
    PairingMoments m;
    m.x = x;
    const double odd = std::exp(-x) * std::sinh(x);
    m.e1 = x / 2.0 - odd / 2.0;
    m.e2 = x * x / 4.0 - x * std::exp(-2.0 * x) / 4.0 + odd / 4.0;
    return m;
}

namespace {

void check_bset(const BSet& s, std::size_t d_b) {
    if (s.size() != d_b) throw DimensionMismatch("B membership mask has wrong size");
}

void check_triplet(const Triplet& t, const Dims3& d) {
    if (t.a >= d.a || t.b >= d.b || t.c >= d.c) throw DimensionMismatch("triplet outside A x B x C");
}

template <bool CrossPair>
CountTensor pair_by_b(std::span<const Triplet> samples, const Dims3& d, const BSet& b_small, Rng& rng) {
    check_bset(b_small, d.b);
    CountTensor out({d.a, d.b, d.c});
    std::vector<std::vector<Triplet>> by_b(d.b);
    for (const auto& t : samples) {
        check_triplet(t, d);
        if (b_small[t.b]) by_b[t.b].push_back(t);
    }
    for (auto& group : by_b) {
        if (group.size() < 2) continue;
        std::shuffle(group.begin(), group.end(), rng);
        for (std::size_t i = 0; i + 1 < group.size(); i += 2) {
            Triplet t = group[i];
            if constexpr (CrossPair) t.c = group[i + 1].c;
            out.add(d.flat(t));
        }
    }
    return out;
}

}  // namespace

CountTensor sim_abc(std::span<const Triplet> samples, const Dims3& d, const BSet& b_small, Rng& rng) {
    return pair_by_b<false>(samples, d, b_small, rng);
}

CountTensor sim_abc_ci(std::span<const Triplet> samples, const Dims3& d, const BSet& b_small, Rng& rng) {
    return pair_by_b<true>(samples, d, b_small, rng);
}

CiLargeOutput sim_abc_ci_large(std::span<const Triplet> samples, const BSet& b_large, Rng& rng) {
    std::vector<Triplet> s(samples.begin(), samples.end());
    std::shuffle(s.begin(), s.end(), rng);
    const std::size_t n2 = s.size() / 5;
    const std::size_t n1 = s.size() - n2;

    std::vector<std::vector<std::uint32_t>> queue(b_large.size());
    std::vector<std::size_t> head(b_large.size(), 0);
    for (std::size_t i = 0; i < n1; ++i) {
        if (s[i].b >= b_large.size()) throw DimensionMismatch("triplet outside B");
        queue[s[i].b].push_back(s[i].a);
    }
    CiLargeOutput out;
    out.samples.reserve(n2);
    for (std::size_t i = n1; i < s.size(); ++i) {
        Triplet t = s[i];
        if (t.b >= b_large.size()) throw DimensionMismatch("triplet outside B");
        if (b_large[t.b]) {
            if (head[t.b] == queue[t.b].size()) {
                out.aborted = true;
                out.samples.clear();
                return out;
            }
            t.a = queue[t.b][head[t.b]++];
        }
        out.samples.push_back(t);
    }
    return out;
}

RegimeSplit split_regimes(const std::vector<double>& p_hat_b, double n_s) {
    if (!(n_s > 0.0)) throw InvalidThreshold("N_S must be positive");
    RegimeSplit r;
    r.nu = 1.0 / (2.0 * n_s);
    for (double p : p_hat_b) {
        r.b_small.push_back(p < r.nu);
        r.b_large.push_back(!(p < r.nu));
    }
    return r;
}

namespace {

int log_buckets(double x) { return std::max(1, static_cast<int>(std::ceil(std::log(std::max(x, 1.0))))); }

double k_abc_of(const Dims3& d, double eps) {
    const double l = std::log(static_cast<double>(d.volume()) / eps);
    return std::max(1.0, l * l * l);
}

}  // namespace

PartitionGrid3D build_grid_3d(const std::vector<double>& p_hat_ab, const std::vector<double>& p_hat_bc,
                              const std::vector<double>& p_hat_b, const BSet& b_large, const Dims3& d,
                              double m, double nu, double eps_l) {
    if (p_hat_ab.size() != d.a * d.b || p_hat_bc.size() != d.b * d.c || p_hat_b.size() != d.b)
        throw DimensionMismatch("marginal tables do not match dimensions");
    check_bset(b_large, d.b);
    if (!(nu > 0.0 && nu < 1.0)) throw InvalidThreshold("nu must lie in (0,1)");
    PartitionGrid3D g;
    g.k_a = g.k_c = log_buckets(m);
    g.k_b = log_buckets(1.0 / nu);
    g.k_abc = k_abc_of(d, eps_l);
    for (double p : p_hat_ab) g.bucket_ab.push_back(bucket_of(p, g.k_a));
    for (double p : p_hat_bc) g.bucket_bc.push_back(bucket_of(p, g.k_c));
    g.b_per_k.assign(static_cast<std::size_t>(g.k_b) + 1, 0);
    for (std::size_t b = 0; b < d.b; ++b) {
        if (!b_large[b]) {
            g.bucket_b.push_back(-1);
            continue;
        }
        const int k = bucket_of(p_hat_b[b], g.k_b);
        g.bucket_b.push_back(k);
        ++g.b_per_k[static_cast<std::size_t>(k)];
    }

    std::map<std::tuple<int, int, int>, std::vector<Index>> cells;
    for (std::size_t a = 0; a < d.a; ++a)
        for (std::size_t b = 0; b < d.b; ++b) {
            if (g.bucket_b[b] < 0) continue;
            for (std::size_t c = 0; c < d.c; ++c)
                cells[{g.bucket_ab[a * d.b + b], g.bucket_bc[b * d.c + c], g.bucket_b[b]}].push_back(
                    (a * d.b + b) * d.c + c);
        }
    for (auto& [key, idx] : cells) {
        std::sort(idx.begin(), idx.end());
        g.categories.emplace(key, SubSupport(d.volume(), std::move(idx)));
    }
    return g;
}

double cmi_gamma(int i, int j, int k, const PartitionGrid3D& g, std::size_t size, double eps_l) {
    const double s = std::sqrt(static_cast<double>(size));
    if (i < g.k_a && j < g.k_c) return std::sqrt(eps_l * std::exp(k - (i + j + 3.0)) / (std::exp(9.0) * g.k_abc));
    if (i == g.k_a && j == g.k_c) {
        const double bk = static_cast<double>(std::max<std::size_t>(1, g.b_per_k.at(static_cast<std::size_t>(k))));
        return std::exp(k + 1.0) * eps_l / (2.0 * bk * s);
    }
    return eps_l / (4.0 * g.k_abc * s);
}

double cmi_b(int i, int j, int k, std::size_t size) {
    const double e = std::exp(k + 4.0 - (i + j));
    return std::exp(9.0) * std::min(std::sqrt(static_cast<double>(size)) * e, std::sqrt(e));
}

double cmi_eps_l(std::size_t size, double eps_l) { return eps_l / std::sqrt(static_cast<double>(size)); }

CmiConstants CmiConstants::paper() {
    CmiConstants k;
    k.equiv = EquivConstants::paper();
    k.c_small = 1e10;
    k.c_large = 1e6;
    k.c_m = 1.0;
    k.learn_scale = 1.0;
    k.gamma_scale = 1.0;
    k.b_scale = 1.0;
    k.small_threshold_scale = 1.0;
    k.sample_scale = 1.0;
    return k;
}

EquivConstants CmiConstants::scaled_equiv() const {
    EquivConstants e = equiv;
    e.c_eq *= sample_scale;
    e.c_norm *= sample_scale;
    e.c_l2 *= sample_scale;
    return e;
}

namespace {

double n_small_of(const Dims3& d, double eps_s, const CmiConstants& k) {
    const double a = static_cast<double>(d.a), b = static_cast<double>(d.b), c = static_cast<double>(d.c);
    return k.sample_scale * k.c_small *
           std::min(std::pow(a, 0.25) * std::pow(b, 7.0 / 8.0) * std::pow(c, 0.25) / eps_s,
                    std::pow(a, 2.0 / 7.0) * std::pow(b, 6.0 / 7.0) * std::pow(c, 2.0 / 7.0) /
                        std::pow(eps_s, 8.0 / 7.0));
}

// Learning scale M of the large regime: max of the heavy, mixed and light requirements.
double m_of(const Dims3& d, double eps_l, double nu, double k_abc, const CmiConstants& k) {
    const double a = static_cast<double>(d.a), b = static_cast<double>(d.b), c = static_cast<double>(d.c);
    const double c_eq = k.equiv.c_eq;
    const double heavy = 1e7 * c_eq * k_abc * std::sqrt(a * b * c) / eps_l;
    const double mixed = 1e3 * c_eq * k_abc * k_abc *
                         std::min(std::pow(a, 0.75) * std::pow(b, 0.75) * std::pow(c, 0.25) / eps_l,
                                  std::pow(a, 2.0 / 3.0) * std::pow(b, 2.0 / 3.0) * std::pow(c, 1.0 / 3.0) /
                                      std::pow(eps_l, 4.0 / 3.0));
    const double light = 10.0 * std::max(c_eq * k_abc * std::sqrt(a) * std::pow(b, 0.75) * std::sqrt(c) / eps_l,
                                         std::log(1e3 * k_abc) / nu);
    return k.sample_scale * k.c_m * std::max({heavy, mixed, light});
}

std::size_t learn_size(double m, double k_abc, const CmiConstants& k) {
    return static_cast<std::size_t>(std::ceil(k.learn_scale * 8.0 * m * k_abc));
}

std::vector<Index> flatten(const std::vector<Triplet>& v, const Dims3& d) {
    std::vector<Index> out;
    out.reserve(v.size());
    for (const auto& t : v) {
        check_triplet(t, d);
        out.push_back(d.flat(t));
    }
    return out;
}

struct SimAbort {};

// Reference draws from P_AB P_BC / P_B on B_L, five raw draws per emitted sample, simulated in chunks.
class CiLargeStream final : public SampleStream<Triplet> {
public:
    CiLargeStream(SampleStream<Triplet>& inner, const BSet& b_large, Rng& rng)
        : inner_(inner), b_large_(b_large), rng_(rng) {}
    std::vector<Triplet> take(std::size_t n) override {
        if (n == 0) return {};
        if (buf_.size() - head_ < n) {
            buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
            head_ = 0;
            const std::size_t chunk = std::max(n - buf_.size(), kMinChunk);
            auto out = sim_abc_ci_large(inner_.take(5 * chunk), b_large_, rng_);
            if (out.aborted) throw SimAbort{};
            buf_.insert(buf_.end(), out.samples.begin(), out.samples.end());
        }
        std::vector<Triplet> v(buf_.begin() + static_cast<std::ptrdiff_t>(head_),
                               buf_.begin() + static_cast<std::ptrdiff_t>(head_ + n));
        head_ += n;
        used_ += n;
        return v;
    }

private:
    static constexpr std::size_t kMinChunk = 4096;
    std::vector<Triplet> buf_;
    std::size_t head_ = 0;
    SampleStream<Triplet>& inner_;
    const BSet& b_large_;
    Rng& rng_;
};

// Draws from `s` until `want` samples with b in B_L are collected or `max_draws` are spent.
std::vector<Triplet> take_in_bl(SampleStream<Triplet>& s, const BSet& b_large, std::size_t want,
                                std::size_t max_draws) {
    std::vector<Triplet> out;
    std::size_t drawn = 0;
    while (out.size() < want && drawn < max_draws) {
        const std::size_t batch = std::min(max_draws - drawn, want - out.size());
        for (const auto& t : s.take(batch))
            if (t.b < b_large.size() && b_large[t.b]) out.push_back(t);
        drawn += batch;
    }
    return out;
}

}  // namespace

CmiPlan cmi_plan(const Dims3& d, double eps, const CmiConstants& k) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidThreshold("eps must lie in (0,1)");
    if (d.a == 0 || d.b == 0 || d.c == 0) throw DimensionMismatch("empty axis");
    CmiPlan p;
    const double half = eps / 2.0;
    const double a = static_cast<double>(d.a), b = static_cast<double>(d.b), c = static_cast<double>(d.c);
    p.n_s = std::max(2.0, n_small_of(d, half, k));
    const double l = std::log(a * b * c / half);
    p.n_l = std::max(p.n_s, k.sample_scale * k.c_large * k.equiv.c_eq * std::pow(l, 7.0) *
                                std::max({std::min(std::pow(a, 0.75) * std::pow(b, 0.75) * std::pow(c, 0.25) / half,
                                                   std::pow(a * b, 2.0 / 3.0) * std::pow(c, 1.0 / 3.0) /
                                                       std::pow(half, 4.0 / 3.0)),
                                          std::sqrt(a * c) * std::pow(b, 0.75) / half, p.n_s}));
    p.nu = 1.0 / (2.0 * p.n_s);
    p.n_nu = static_cast<std::size_t>(std::ceil(32.0 * std::log(1e3 * b) * p.n_s));
    p.k_abc = k_abc_of(d, half);
    p.m = m_of(d, half, p.nu, p.k_abc, k);
    p.n_learn = learn_size(p.m, p.k_abc, k);
    p.delta = 1.0 / (1e3 * p.k_abc);

    // Worst case per category: the full host support at every bucket triple.
    PartitionGrid3D g;
    g.k_a = g.k_c = log_buckets(p.m);
    g.k_b = log_buckets(1.0 / p.nu);
    g.k_abc = p.k_abc;
    g.b_per_k.assign(static_cast<std::size_t>(g.k_b) + 1, 1);
    const auto full = SubSupport::full(d.volume());
    const auto eq = k.scaled_equiv();
    std::size_t cap = 0;
    for (int i = 0; i <= g.k_a; ++i)
        for (int j = 0; j <= g.k_c; ++j)
            for (int kk = 0; kk <= g.k_b; ++kk) {
                const double gamma = k.gamma_scale * cmi_gamma(i, j, kk, g, full.size(), half);
                const double bb = k.b_scale * cmi_b(i, j, kk, full.size());
                cap = std::max(cap, equiv_l2_required(bb, gamma, full, p.delta, eq));
            }
    const std::size_t cats = static_cast<std::size_t>((g.k_a + 1) * (g.k_b + 1) * (g.k_c + 1));
    // P side, plus five raw draws per reference draw, plus learning and regime sets, doubled for B_L filtering.
    p.budget = 2 * (6 * cats * cap) + 3 * p.n_learn + p.n_nu + static_cast<std::size_t>(std::ceil(p.n_s));
    return p;
}

Verdict cmi_small_test(SampleStream<Triplet>& s, const BSet& b_small, double eps_s, double n_s, const Dims3& d,
                       Rng& rng, const CmiConstants& k) {
    check_bset(b_small, d.b);
    if (!(eps_s > 0.0 && eps_s < 1.0)) throw InvalidThreshold("eps_S must lie in (0,1)");
    Verdict v;
    const double nt = n_s / 8.0;
    v.threshold = k.small_threshold_scale * std::pow(nt * eps_s, 4.0) /
                  (2.0 * std::pow(4.0, 7.0) * static_cast<double>(d.a) * std::pow(static_cast<double>(d.b), 3.0) *
                   static_cast<double>(d.c));
    if (std::none_of(b_small.begin(), b_small.end(), [](bool x) { return x; })) {
        v.note = "empty small regime";
        return v;
    }
    std::int64_t m[4];
    std::int64_t sum = 0;
    for (auto& x : m) sum += (x = poissonize(nt, rng));
    if (static_cast<double>(sum) > n_s) {
        v.outcome = Outcome::Abort;
        v.note = "Poisson sizes exceed N_S";
        return v;
    }
    const std::size_t used0 = s.used();
    ZSplit z;
    auto draw = [&](std::int64_t n) { return s.take(static_cast<std::size_t>(n)); };
    z.x = sim_abc(draw(m[0]), d, b_small, rng);
    z.x2 = sim_abc(draw(m[1]), d, b_small, rng);
    z.y = sim_abc_ci(draw(m[2]), d, b_small, rng);
    z.y2 = sim_abc_ci(draw(m[3]), d, b_small, rng);
    const auto zs = z_statistic(z);
    v.statistic = static_cast<double>(zs);
    v.outcome = v.statistic > v.threshold ? Outcome::No : Outcome::Yes;
    v.samples_used = s.used() - used0;
    return v;
}

Verdict cmi_large_test(SampleStream<Triplet>& s, const BSet& b_large, double eps_l, double nu, const Dims3& d,
                       Rng& rng, const CmiConstants& k) {
    check_bset(b_large, d.b);
    if (!(eps_l > 0.0 && eps_l < 1.0)) throw InvalidThreshold("eps_L must lie in (0,1)");
    Verdict v;
    if (std::none_of(b_large.begin(), b_large.end(), [](bool x) { return x; })) {
        v.note = "empty large regime";
        return v;
    }
    const std::size_t used0 = s.used();
    const double k_abc = k_abc_of(d, eps_l);
    const double m = m_of(d, eps_l, nu, k_abc, k);
    const double delta = 1.0 / (1e3 * k_abc);
    const auto eq = k.scaled_equiv();

    // Step 1: learn the AB, BC and B marginals and partition.
    const std::size_t n_learn = learn_size(m, k_abc, k);
    std::vector<double> pab(d.a * d.b, 0.0), pbc(d.b * d.c, 0.0), pb(d.b, 0.0);
    for (const auto& t : s.take(n_learn)) {
        check_triplet(t, d);
        pab[t.a * d.b + t.b] += 1.0;
    }
    for (const auto& t : s.take(n_learn)) {
        check_triplet(t, d);
        pbc[t.b * d.c + t.c] += 1.0;
    }
    for (const auto& t : s.take(n_learn)) {
        check_triplet(t, d);
        pb[t.b] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(n_learn);
    for (auto& x : pab) x *= inv;
    for (auto& x : pbc) x *= inv;
    for (auto& x : pb) x *= inv;
    const auto grid = build_grid_3d(pab, pbc, pb, b_large, d, m, nu, eps_l);

    // Step 2: reference distribution and simulated reference stream.
    auto q_hat = [&](Index f) {
        const std::size_t c = f % d.c, b = (f / d.c) % d.b, a = f / (d.c * d.b);
        return pb[b] > 0.0 ? pab[a * d.b + b] * pbc[b * d.c + c] / pb[b] : 0.0;
    };
    CiLargeStream sq(s, b_large, rng);

    // Step 3: per-category equivalence tests.
    try {
        for (const auto& [key, L] : grid.categories) {
            const auto [i, j, kk] = key;
            CategoryDiag c;
            c.i = i;
            c.j = j;
            c.k = kk;
            c.size = L.size();
            const bool heavy = i < grid.k_a && j < grid.k_c;
            const bool light = i == grid.k_a && j == grid.k_c;
            c.kind = heavy ? "heavy" : (light ? "light" : "mixed");
            c.gamma = k.gamma_scale * cmi_gamma(i, j, kk, grid, L.size(), eps_l);
            c.b = k.b_scale * cmi_b(i, j, kk, L.size());

            if (heavy) {
                double qn = 0.0;
                for (auto f : L.indices()) qn += q_hat(f) * q_hat(f);
                qn = std::sqrt(qn);
                const double eta = cmi_eps_l(L.size(), eps_l);
                if (qn < eta / (10.0 * std::exp(9.0))) {
                    c.kind = "small-norm";
                    const std::size_t need = equiv_small_required(L, eta, delta, eq);
                    const auto sp = flatten(s.take(need), d);
                    const auto r = equiv_small(sp, L, std::exp(9.0) * qn, eta, delta, rng, eq);
                    c.samples = need;
                    c.repetitions = r.repetitions;
                    c.far_votes = r.not_equal_votes;
                    c.statistic = r.last_c;
                    c.threshold = r.tau / 4.0;
                    c.far = r.outcome == SmallOutcome::NotEqual;
                    if (!r.promise_met) c.note = "norm promise not met";
                    v.categories.push_back(c);
                    if (c.far) {
                        v.outcome = Outcome::No;
                        break;
                    }
                    continue;
                }
            }

            const std::size_t need = equiv_l2_required(c.b, c.gamma, L, delta, eq);
            std::vector<Triplet> tp, tq;
            if (light) {
                tp = take_in_bl(s, b_large, need, 8 * need);
                tq = take_in_bl(sq, b_large, need, 8 * need);
                const double floor_n = 8.0 * std::log(1e3 * k_abc);
                if (tp.size() < need || tq.size() < need) {
                    c.samples = tp.size() + tq.size();
                    c.note = static_cast<double>(std::min(tp.size(), tq.size())) < floor_n
                                 ? "B_L stream below minimum size"
                                 : "B_L stream short of requirement";
                    v.categories.push_back(c);
                    continue;
                }
            } else {
                tp = s.take(need);
                tq = sq.take(need);
            }
            const auto sp = flatten(tp, d);
            const auto sqf = flatten(tq, d);
            const auto r = equiv_l2(sp, sqf, L, c.b, c.gamma, delta, rng, eq);
            c.samples = 2 * need;
            c.repetitions = r.repetitions;
            c.far_votes = r.far_votes;
            c.statistic = r.last_z;
            c.threshold = r.threshold;
            c.far = r.outcome == EquivOutcome::Far;
            if (r.norm_rejections > 0) c.note = "norm-check rejections: " + std::to_string(r.norm_rejections);
            v.categories.push_back(c);
            v.statistic = std::max(v.statistic, static_cast<double>(r.far_votes) / r.repetitions);
            if (c.far) {
                v.outcome = Outcome::No;
                break;
            }
        }
    } catch (const SimAbort&) {
        v.outcome = Outcome::Abort;
        v.note = "empty queue in reference simulation";
    }
    v.samples_used = s.used() - used0;
    return v;
}

Verdict cmi_test(SampleStream<Triplet>& s, const Dims3& d, double eps, Rng& rng, const CmiConstants& k,
                 Regime regime) {
    const auto plan = cmi_plan(d, eps, k);
    const std::size_t used0 = s.used();

    std::vector<double> pb(d.b, 0.0);
    for (const auto& t : s.take(plan.n_nu)) {
        check_triplet(t, d);
        pb[t.b] += 1.0;
    }
    for (auto& x : pb) x /= static_cast<double>(plan.n_nu);
    const auto split = split_regimes(pb, plan.n_s);

    Verdict v;
    if (regime != Regime::Large) {
        auto small = cmi_small_test(s, split.b_small, eps / 2.0, plan.n_s, d, rng, k);
        v.statistic = small.statistic;
        v.threshold = small.threshold;
        v.outcome = small.outcome;
        v.note = small.note;
    }
    if (v.outcome == Outcome::Yes && regime != Regime::Small) {
        auto large = cmi_large_test(s, split.b_large, eps / 2.0, split.nu, d, rng, k);
        v.categories = std::move(large.categories);
        v.outcome = large.outcome;
        if (!large.note.empty()) v.note = v.note.empty() ? large.note : v.note + "; " + large.note;
        if (regime == Regime::Large) v.statistic = large.statistic;
    }
    v.samples_used = s.used() - used0;
    return v;
}

Verdict cmi_test(const std::vector<Triplet>& samples, const Dims3& d, double eps, std::uint64_t seed,
                 const CmiConstants& k, Regime regime) {
    Rng rng(seed);
    PoolStream<Triplet> s(samples, rng);
    return cmi_test(s, d, eps, rng, k, regime);
}

}  // namespace citest
