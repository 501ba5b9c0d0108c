#include "citest/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "citest/cmitester.hpp"
#include "citest/distributions.hpp"
#include "citest/equiv.hpp"

namespace citest {

namespace {

constexpr double kSlack = 1e-12;

class Tally {
public:
    explicit Tally(std::string name) { c_.name = std::move(name); c_.min_margin = INFINITY; }
    // Records lhs <= rhs.
    void le(double lhs, double rhs) {
        const double m = rhs - lhs;
        ++c_.cases;
        c_.min_margin = std::min(c_.min_margin, m);
        if (m < -kSlack * std::max(1.0, std::abs(rhs))) ++c_.violations;
    }
    LemmaCheck done(std::string detail = {}) {
        c_.pass = c_.violations == 0;
        c_.detail = std::move(detail);
        return c_;
    }

private:
    LemmaCheck c_;
};

std::vector<double> random_probs(std::size_t d, Rng& rng, bool allow_zero) {
    std::exponential_distribution<double> e(1.0);
    std::bernoulli_distribution zero(0.2);
    std::vector<double> p(d);
    double s = 0.0;
    for (auto& x : p) {
        x = (allow_zero && zero(rng)) ? 0.0 : e(rng);
        s += x;
    }
    if (s == 0.0) {
        p[0] = 1.0;
        s = 1.0;
    }
    for (auto& x : p) x /= s;
    return p;
}

double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace

bool LemmaReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const LemmaCheck& c) { return c.pass; });
}

LemmaCheck check_exp_bounds() {
    Tally t("exp_bounds");
    for (int i = 0; i < 1000; ++i) {
        const double x = i / 1000.0;
        t.le(1.0 - x + x * x / 4.0, std::exp(-x));
        t.le(std::exp(-x), 1.0 - x / 2.0);
    }
    for (int i = 0; i <= 2000; ++i) {
        const double x = i / 100.0;
        t.le(1.0 - x + x * x / 2.0 - x * x * x / 6.0, std::exp(-x));
        t.le(std::exp(-x), 1.0 - x + x * x / 2.0);
    }
    return t.done();
}

LemmaCheck check_log_chi() {
    Tally t("log_chi_reverse");
    for (int i = 0; i <= 200; ++i)
        for (int j = 0; j <= 200; ++j) {
            const double a = i / 100.0, b = j / 100.0;
            if (a + b == 0.0) continue;
            const double lhs = (a > 0 ? a * std::log(2 * a / (a + b)) : 0.0) + (b > 0 ? b * std::log(2 * b / (a + b)) : 0.0);
            t.le((a - b) * (a - b) / (6.0 * (a + b)), lhs);
        }
    return t.done();
}

LemmaCheck check_mi_sandwich(std::size_t tables, Rng& rng) {
    Tally t("mi_sandwich");
    std::uniform_int_distribution<std::size_t> size(2, 16);
    for (std::size_t n = 0; n < tables; ++n) {
        const std::size_t k = size(rng);
        const auto p0 = random_probs(k, rng, true);
        const auto p1 = random_probs(k, rng, true);
        // I(X:A) = H(A) - H(A|X) for a uniform bit X.
        double h = 0.0, h0 = 0.0, h1 = 0.0, chi = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            h += entropy_term(0.5 * (p0[a] + p1[a]));
            h0 += entropy_term(p0[a]);
            h1 += entropy_term(p1[a]);
            if (p0[a] + p1[a] > 0.0) chi += (p0[a] - p1[a]) * (p0[a] - p1[a]) / (p0[a] + p1[a]);
        }
        const double mi = std::max(0.0, h - 0.5 * (h0 + h1));
        t.le(2.0 * mi, chi);
        t.le(chi, 12.0 * mi);
    }
    return t.done();
}

std::vector<LemmaCheck> check_divergence_inequalities(std::size_t pairs, Rng& rng) {
    Tally lower("kl_ge_hellinger"), upper("kl_le_log_ratio_hellinger"), l1_lo("l1_ge_half_hellinger"),
        l1_hi("l1_le_2sqrt2_hellinger"), l1_l2("l1_le_sqrtd_l2"), sub1("subsupport_l2_case1"),
        sub2("subsupport_l2_case2");
    std::uniform_int_distribution<std::size_t> size(2, 32);
    std::bernoulli_distribution pick(0.5);
    for (std::size_t n = 0; n < pairs; ++n) {
        const std::size_t d = size(rng);
        const auto p = random_probs(d, rng, true);
        const auto q = random_probs(d, rng, false);
        const double h2 = hellinger_sq(p, q);
        const double kl_pq = kl(p, q);
        double ratio = 1.0;
        for (std::size_t i = 0; i < d; ++i) ratio = std::max(ratio, p[i] / q[i]);
        lower.le(h2, kl_pq);
        upper.le(kl_pq, (2.0 + std::log(ratio)) * 2.0 * h2);
        const double l1 = lp_dist(p, q, 1);
        l1_lo.le(0.5 * h2, l1);
        l1_hi.le(l1, 2.0 * std::sqrt(2.0) * std::sqrt(h2));
        l1_l2.le(l1, std::sqrt(static_cast<double>(d)) * lp_dist(p, q, 2));
        double sq = 0.0, mx = 0.0;
        std::size_t in = 0;
        for (std::size_t i = 0; i < d; ++i)
            if (pick(rng)) {
                sq += q[i] * q[i];
                mx = std::max(mx, q[i]);
                ++in;
            }
        sub1.le(sq, static_cast<double>(in) * mx * mx);
        sub2.le(sq, mx);
    }
    return {lower.done(), upper.done(), l1_lo.done(), l1_hi.done(), l1_l2.done(), sub1.done(), sub2.done()};
}

LemmaCheck check_pairing_moments(std::size_t reps, Rng& rng) {
    Tally t("pairing_moments");
    char buf[256];
    std::string detail;
    const Dims3 d{2, 1, 2};
    const BSet b_small{true};
    std::uniform_int_distribution<std::uint32_t> bit(0, 1);
    for (double x : {0.1, 0.5, 1.0}) {
        const auto m = pairing_moments(x);
        std::poisson_distribution<int> poi(x);
        double s1 = 0.0, s2 = 0.0, s4 = 0.0;
        std::vector<Triplet> samples;
        for (std::size_t r = 0; r < reps; ++r) {
            samples.resize(static_cast<std::size_t>(poi(rng)));
            for (auto& s : samples) s = {bit(rng), 0, bit(rng)};
            const double c = static_cast<double>(sim_abc(samples, d, b_small, rng).total());
            s1 += c;
            s2 += c * c;
            s4 += c * c * c * c;
        }
        const double n = static_cast<double>(reps);
        const double mean = s1 / n, second = s2 / n;
        const double se1 = std::sqrt(std::max(0.0, second - mean * mean) / n);
        const double se2 = std::sqrt(std::max(0.0, s4 / n - second * second) / n);
        // Within three standard errors, for each moment.
        t.le(std::abs(mean - m.e1), 3.0 * se1);
        t.le(std::abs(second - m.e2), 3.0 * se2);
        std::snprintf(buf, sizeof buf, "%sx=%.1f e1=%.6f mc=%.6f se=%.2e e2=%.6f mc=%.6f se=%.2e", detail.empty() ? "" : "; ",
                      x, m.e1, mean, se1, m.e2, second, se2);
        detail += buf;
    }
    return t.done(detail);
}

double z_cell_mean(double a, double c) { return (a - c) * (a - c); }

double z_cell_var(double a, double c) {
    const double a2 = a + a * a, c2 = c + c * c;
    const double ez2 = a2 * a2 + 4.0 * a2 * c2 + c2 * c2 - 4.0 * a * c * a2 + 2.0 * a * a * c * c - 4.0 * a * c * c2;
    const double m = z_cell_mean(a, c);
    return ez2 - m * m;
}

std::vector<LemmaCheck> check_z_moments(std::size_t d, double eps, double n, std::size_t reps, Rng& rng) {
    Tally mean_t("z_mean"), var_t("z_var_bound");
    char buf[256];
    std::string md, vd;
    const std::size_t m = 2 * (d / 2);
    const double shift = eps / std::sqrt(static_cast<double>(m));
    for (int far = 0; far < 2; ++far) {
        std::vector<double> p(d, 1.0 / static_cast<double>(d)), q = p;
        if (far)
            for (std::size_t i = 0; i < m; ++i) q[i] = std::max(0.0, q[i] + (i % 2 == 0 ? shift : -shift));
        double np2 = 0.0, nq2 = 0.0, l2 = 0.0, exact_var = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            np2 += p[i] * p[i];
            nq2 += q[i] * q[i];
            l2 += (p[i] - q[i]) * (p[i] - q[i]);
            exact_var += z_cell_var(n * p[i], n * q[i]);
        }
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            double z = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double x = static_cast<double>(poissonize(n * p[i], rng));
                const double x2 = static_cast<double>(poissonize(n * p[i], rng));
                const double y = static_cast<double>(poissonize(n * q[i], rng));
                const double y2 = static_cast<double>(poissonize(n * q[i], rng));
                z += x * x2 - 2.0 * x * y + y * y2;
            }
            s1 += z;
            s2 += z * z;
        }
        const double k = static_cast<double>(reps);
        const double mean = s1 / k;
        const double var = (s2 - k * mean * mean) / (k - 1.0);
        const double expect = n * n * l2;
        mean_t.le(std::abs(mean - expect), 3.0 * std::sqrt(var / k));
        const double bound = 8.0 * n * n * (np2 + nq2);
        var_t.le(var, bound);
        std::snprintf(buf, sizeof buf, "%s%s: mean=%.4g expected=%.4g", md.empty() ? "" : "; ", far ? "far" : "equal",
                      mean, expect);
        md += buf;
        std::snprintf(buf, sizeof buf, "%s%s: var=%.4g exact=%.4g bound=%.4g", vd.empty() ? "" : "; ",
                      far ? "far" : "equal", var, exact_var, bound);
        vd += buf;
    }
    return {mean_t.done(md), var_t.done(vd)};
}

LemmaReport verify_lemmas(std::uint64_t seed) {
    LemmaReport r;
    r.seed = seed;
    Rng rng(seed);
    r.checks.push_back(check_exp_bounds());
    r.checks.push_back(check_log_chi());
    r.checks.push_back(check_mi_sandwich(1000, rng));
    for (auto& c : check_divergence_inequalities(1000, rng)) r.checks.push_back(std::move(c));
    r.checks.push_back(check_pairing_moments(100000, rng));
    for (auto& c : check_z_moments(100, 0.1, 100.0, 10000, rng)) r.checks.push_back(std::move(c));
    return r;
}

void write_lemma_report(std::ostream& os, const LemmaReport& r) {
    os << "# verify-lemmas seed=" << r.seed << "\n";
    os << "name,cases,violations,min_margin,pass,detail\n";
    char buf[64];
    for (const auto& c : r.checks) {
        std::snprintf(buf, sizeof buf, "%.6e", c.min_margin);
        os << c.name << "," << c.cases << "," << c.violations << "," << buf << "," << (c.pass ? "pass" : "fail") << ",\""
           << c.detail << "\"\n";
    }
    os << "# overall=" << (r.all_pass() ? "pass" : "fail") << "\n";
}

}  // namespace citest
