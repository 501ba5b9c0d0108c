#include "citest/distributions.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace citest {

void validate_and_normalize(std::vector<double>& p) {
    if (p.empty()) throw InvalidDistribution("empty probability vector");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidDistribution("negative or non-finite probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTolerance)
        throw InvalidDistribution("probabilities sum to " + std::to_string(sum));
    if (sum != 1.0)
        for (double& v : p) v /= sum;
}

Dist::Dist(std::vector<double> probs) : p_(std::move(probs)) { validate_and_normalize(p_); }

Dist Dist::uniform(std::size_t n) { return Dist(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

Dist Dist::point_mass(std::size_t n, std::size_t atom) {
    std::vector<double> p(n, 0.0);
    p.at(atom) = 1.0;
    return Dist(std::move(p));
}

Joint2::Joint2(std::size_t d_a, std::size_t d_c, std::vector<double> probs)
    : d_a_(d_a), d_c_(d_c), p_(std::move(probs)) {
    if (d_a == 0 || d_c == 0 || p_.size() != d_a * d_c)
        throw DimensionMismatch("Joint2 shape does not match entry count");
    validate_and_normalize(p_);
}

Joint2 Joint2::product(const Dist& pa, const Dist& pc) {
    std::vector<double> p(pa.size() * pc.size());
    for (std::size_t a = 0; a < pa.size(); ++a)
        for (std::size_t c = 0; c < pc.size(); ++c) p[a * pc.size() + c] = pa[a] * pc[c];
    return Joint2(pa.size(), pc.size(), std::move(p));
}

Dist Joint2::marginal_a() const {
    std::vector<double> m(d_a_, 0.0);
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t c = 0; c < d_c_; ++c) m[a] += at(a, c);
    return Dist(std::move(m));
}

Dist Joint2::marginal_c() const {
    std::vector<double> m(d_c_, 0.0);
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t c = 0; c < d_c_; ++c) m[c] += at(a, c);
    return Dist(std::move(m));
}

Joint2 Joint2::product_of_marginals() const { return product(marginal_a(), marginal_c()); }

Joint3::Joint3(std::size_t d_a, std::size_t d_b, std::size_t d_c, std::vector<double> probs)
    : d_a_(d_a), d_b_(d_b), d_c_(d_c), p_(std::move(probs)) {
    if (d_a == 0 || d_b == 0 || d_c == 0 || p_.size() != d_a * d_b * d_c)
        throw DimensionMismatch("Joint3 shape does not match entry count");
    validate_and_normalize(p_);
}

std::vector<double> Joint3::marginal_b() const {
    std::vector<double> m(d_b_, 0.0);
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t b = 0; b < d_b_; ++b)
            for (std::size_t c = 0; c < d_c_; ++c) m[b] += at(a, b, c);
    return m;
}

std::vector<double> Joint3::marginal_ab() const {
    std::vector<double> m(d_a_ * d_b_, 0.0);
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t b = 0; b < d_b_; ++b)
            for (std::size_t c = 0; c < d_c_; ++c) m[a * d_b_ + b] += at(a, b, c);
    return m;
}

std::vector<double> Joint3::marginal_bc() const {
    std::vector<double> m(d_b_ * d_c_, 0.0);
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t b = 0; b < d_b_; ++b)
            for (std::size_t c = 0; c < d_c_; ++c) m[b * d_c_ + c] += at(a, b, c);
    return m;
}

Joint3 Joint3::markov_reference() const {
    const auto pb = marginal_b();
    const auto pab = marginal_ab();
    const auto pbc = marginal_bc();
    std::vector<double> q(p_.size(), 0.0);
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t b = 0; b < d_b_; ++b) {
            if (pb[b] <= 0.0) continue;
            for (std::size_t c = 0; c < d_c_; ++c)
                q[index(a, b, c)] = pab[a * d_b_ + b] * pbc[b * d_c_ + c] / pb[b];
        }
    return Joint3(d_a_, d_b_, d_c_, std::move(q));
}

Joint2 Joint3::slice_conditional(std::size_t b) const {
    std::vector<double> s(d_a_ * d_c_);
    double mass = 0.0;
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t c = 0; c < d_c_; ++c) mass += at(a, b, c);
    if (mass <= 0.0) throw InvalidDistribution("slice has zero mass");
    for (std::size_t a = 0; a < d_a_; ++a)
        for (std::size_t c = 0; c < d_c_; ++c) s[a * d_c_ + c] = at(a, b, c) / mass;
    return Joint2(d_a_, d_c_, std::move(s));
}

CountTensor::CountTensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

std::uint64_t CountTensor::volume() const {
    std::uint64_t v = 1;
    for (auto d : dims_) v *= d;
    return v;
}

void CountTensor::add(std::uint64_t flat, std::int64_t k) {
    if (flat >= volume()) throw DimensionMismatch("count index out of range");
    if (k == 0) return;
    auto& slot = counts_[flat];
    if (slot + k < 0) throw Error("negative count");
    slot += k;
    total_ += k;
}

std::int64_t CountTensor::get(std::uint64_t flat) const {
    auto it = counts_.find(flat);
    return it == counts_.end() ? 0 : it->second;
}

namespace {

void require_same_size(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DimensionMismatch("supports differ in size");
}

}  // namespace

double kl(std::span<const double> p, std::span<const double> q) {
    require_same_size(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) throw SupportViolation("P(i) > 0 where Q(i) = 0 at index " + std::to_string(i));
        s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

double hellinger_sq(std::span<const double> p, std::span<const double> q) {
    require_same_size(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        s += d * d;
    }
    return 0.5 * s;
}

double lp_dist(std::span<const double> p, std::span<const double> q, int order) {
    require_same_size(p, q);
    if (order != 1 && order != 2) throw std::invalid_argument("lp_dist supports p in {1,2}");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::abs(p[i] - q[i]);
        s += order == 1 ? d : d * d;
    }
    return order == 1 ? s : std::sqrt(s);
}

double kl(const Dist& p, const Dist& q) { return kl(p.probs(), q.probs()); }
double hellinger_sq(const Dist& p, const Dist& q) { return hellinger_sq(p.probs(), q.probs()); }
double lp_dist(const Dist& p, const Dist& q, int order) { return lp_dist(p.probs(), q.probs(), order); }

double mi_exact(const Joint2& j) {
    return kl(j.probs(), j.product_of_marginals().probs());
}

double cmi_exact(const Joint3& j) {
    // D(P || P_AB P_BC / P_B) equals the p_b-weighted sum of per-slice MI.
    const auto pb = j.marginal_b();
    const auto pab = j.marginal_ab();
    const auto pbc = j.marginal_bc();
    double s = 0.0;
    for (std::size_t a = 0; a < j.d_a(); ++a)
        for (std::size_t b = 0; b < j.d_b(); ++b) {
            if (pb[b] <= 0.0) continue;
            for (std::size_t c = 0; c < j.d_c(); ++c) {
                const double p = j.at(a, b, c);
                if (p <= 0.0) continue;
                const double q = pab[a * j.d_b() + b] * pbc[b * j.d_c() + c] / pb[b];
                s += p * std::log(p / q);
            }
        }
    return s;
}

double hellinger_sq_to_product(const Joint2& j) {
    return hellinger_sq(j.probs(), j.product_of_marginals().probs());
}

double hellinger_sq_to_markov(const Joint3& j) {
    return hellinger_sq(j.probs(), j.markov_reference().probs());
}

std::vector<std::size_t> sample(const Dist& d, std::size_t n, Rng& rng) {
    Sampler s(d.probs());
    std::vector<std::size_t> out(n);
    for (auto& x : out) x = s(rng);
    return out;
}

std::vector<std::size_t> sample(const Dist& d, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return sample(d, n, rng);
}

std::vector<Pair> sample_pairs(const Joint2& j, std::size_t n, Rng& rng) {
    Sampler s(j.probs());
    std::vector<Pair> out(n);
    const auto dc = j.d_c();
    for (auto& x : out) {
        const auto k = s(rng);
        x = Pair{static_cast<std::uint32_t>(k / dc), static_cast<std::uint32_t>(k % dc)};
    }
    return out;
}

std::vector<Triplet> sample_triplets(const Joint3& j, std::size_t n, Rng& rng) {
    Sampler s(j.probs());
    std::vector<Triplet> out(n);
    const auto db = j.d_b(), dc = j.d_c();
    for (auto& x : out) {
        const auto k = s(rng);
        x = Triplet{static_cast<std::uint32_t>(k / (db * dc)),
                    static_cast<std::uint32_t>((k / dc) % db), static_cast<std::uint32_t>(k % dc)};
    }
    return out;
}

std::unique_ptr<SampleStream<Pair>> joint2_stream(const Joint2& j, Rng& rng, std::size_t cap) {
    auto s = std::make_shared<Sampler>(j.probs());
    const auto dc = j.d_c();
    return std::make_unique<GeneratorStream<Pair>>(
        [s, dc, &rng] {
            const auto k = (*s)(rng);
            return Pair{static_cast<std::uint32_t>(k / dc), static_cast<std::uint32_t>(k % dc)};
        },
        cap);
}

std::unique_ptr<SampleStream<Triplet>> joint3_stream(const Joint3& j, Rng& rng, std::size_t cap) {
    auto s = std::make_shared<Sampler>(j.probs());
    const auto db = j.d_b(), dc = j.d_c();
    return std::make_unique<GeneratorStream<Triplet>>(
        [s, db, dc, &rng] {
            const auto k = (*s)(rng);
            return Triplet{static_cast<std::uint32_t>(k / (db * dc)),
                           static_cast<std::uint32_t>((k / dc) % db),
                           static_cast<std::uint32_t>(k % dc)};
        },
        cap);
}

HardInstanceMI gen_hard_mi(std::size_t d_a, std::size_t d_c, double n, double eps, int label,
                           std::uint64_t seed) {
    if (d_a < 2 || d_c < 1) throw InfeasibleParameters("need d_A >= 2 and d_C >= 1");
    if (!(n > 0.0) || !(eps > 0.0)) throw InfeasibleParameters("need n > 0 and eps > 0");
    if (n * eps / static_cast<double>(d_a) > 1.0)
        throw InfeasibleParameters("n * eps / d_A exceeds 1");
    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);
    HardInstanceMI h;
    h.label = label;
    h.alpha = std::min(n / static_cast<double>(d_a), 0.5);
    std::bernoulli_distribution to_s1(h.alpha);
    h.s1_mask.assign(d_a, false);

    const double dd = static_cast<double>(d_a * d_c);
    const double s1_val = 1.0 / (2.0 * n * static_cast<double>(d_c));
    std::vector<double> p(d_a * d_c, 0.0);
    double used = 0.0;
    for (std::size_t a = 1; a < d_a; ++a) {
        h.s1_mask[a] = to_s1(rng);
        for (std::size_t c = 0; c < d_c; ++c) {
            double v;
            if (h.s1_mask[a])
                v = s1_val;
            else if (label == 0)
                v = eps / dd;
            else
                v = coin(rng) ? 1.5 * eps / dd : 0.5 * eps / dd;
            p[a * d_c + c] = v;
            used += v;
        }
    }
    const double rest = 1.0 - used;
    if (rest < 0.0) throw InfeasibleParameters("reserved row mass would be negative");
    for (std::size_t c = 0; c < d_c; ++c) p[c] = rest / static_cast<double>(d_c);
    h.joint = Joint2(d_a, d_c, std::move(p));
    return h;
}

HardInstanceCMI gen_hard_cmi(std::size_t d_a, std::size_t d_b, std::size_t d_c, double n,
                             double eps, int label, std::uint64_t seed) {
    if (d_a * d_b < 2 || d_c < 1) throw InfeasibleParameters("need d_A d_B >= 2 and d_C >= 1");
    if (!(n > 0.0) || !(eps > 0.0)) throw InfeasibleParameters("need n > 0 and eps > 0");
    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);
    HardInstanceCMI h;
    h.label = label;
    h.alpha = std::min(n / static_cast<double>(d_a * d_b), 0.5);
    std::bernoulli_distribution to_s1(h.alpha);
    h.s1_mask.assign(d_a * d_b, false);

    const double dd = static_cast<double>(d_a * d_b * d_c);
    const double s1_val = 1.0 / (2.0 * n * static_cast<double>(d_c));
    std::vector<double> p(d_a * d_b * d_c, 0.0);
    double used = 0.0;
    for (std::size_t a = 0; a < d_a; ++a)
        for (std::size_t b = 0; b < d_b; ++b) {
            if (a == 0 && b == 0) continue;
            const bool s1 = to_s1(rng);
            h.s1_mask[a * d_b + b] = s1;
            for (std::size_t c = 0; c < d_c; ++c) {
                double v;
                if (s1)
                    v = s1_val;
                else if (label == 0)
                    v = eps / dd;
                else
                    v = coin(rng) ? 1.5 * eps / dd : 0.5 * eps / dd;
                p[(a * d_b + b) * d_c + c] = v;
                used += v;
            }
        }
    const double rest = 1.0 - used;
    if (rest < 0.0) throw InfeasibleParameters("reserved slice mass would be negative");
    for (std::size_t c = 0; c < d_c; ++c) p[c] = rest / static_cast<double>(d_c);
    h.joint = Joint3(d_a, d_b, d_c, std::move(p));
    return h;
}

}  // namespace citest
