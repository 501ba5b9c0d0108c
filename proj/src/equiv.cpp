#include "citest/equiv.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

namespace citest {

SubSupport::SubSupport(std::size_t host_size, std::vector<Index> indices)
    : host_(host_size), indices_(std::move(indices)), mask_(host_size, false) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
        throw std::invalid_argument("sub-support indices must be unique");
    for (auto i : indices_) {
        if (i >= host_) throw DimensionMismatch("sub-support index outside host support");
        mask_[i] = true;
    }
}

SubSupport SubSupport::full(std::size_t host_size) {
    std::vector<Index> all(host_size);
    for (std::size_t i = 0; i < host_size; ++i) all[i] = i;
    return SubSupport(host_size, std::move(all));
}

EquivConstants EquivConstants::paper() {
    EquivConstants k;
    k.c_z = 100.0;
    return k;
}

std::int64_t z_statistic(const ZSplit& s) {
    const auto& d = s.x.dims();
    if (s.x2.dims() != d || s.y.dims() != d || s.y2.dims() != d)
        throw DimensionMismatch("Z-statistic count tensors differ in shape");
    // Only indices where some product is non-zero contribute.
    std::int64_t z = 0;
    for (const auto& [i, xi] : s.x.entries()) z += xi * s.x2.get(i) - 2 * xi * s.y.get(i);
    for (const auto& [i, yi] : s.y.entries()) z += yi * s.y2.get(i);
    return z;
}

std::int64_t poissonize(double mean, Rng& rng) {
    if (!(mean >= 0.0)) throw std::invalid_argument("Poisson mean must be non-negative");
    if (mean == 0.0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(rng);
}

std::size_t poisson_pool(double lambda) {
    return static_cast<std::size_t>(std::ceil(lambda + 4.0 * std::sqrt(lambda) + 4.0));
}

double poisson_mean_for_pool(std::size_t available) {
    const double r = std::sqrt(static_cast<double>(available)) - 2.0;
    if (r <= 0.0) return 0.0;
    double lambda = r * r;
    while (lambda > 0.0 && poisson_pool(lambda) > available) lambda = std::nextafter(lambda, 0.0) * (1.0 - 1e-12);
    return lambda;
}

namespace {

std::size_t n_dummy_for(double eps, double factor) {
    const double n = std::ceil(factor / (eps * eps));
    if (!std::isfinite(n) || n > 1e15) throw InvalidThreshold("flattening precision too small");
    return static_cast<std::size_t>(std::max(1.0, n));
}

class Flattener {
public:
    Flattener(const SubSupport& s, std::size_t n_dummy) : s_(s), n_dummy_(n_dummy), pick_(0, n_dummy - 1) {}
    std::size_t volume() const { return s_.host_size() + n_dummy_; }
    Index operator()(Index i, Rng& rng) {
        if (s_.contains(i)) return i;
        return s_.host_size() + pick_(rng);
    }

private:
    const SubSupport& s_;
    std::size_t n_dummy_;
    std::uniform_int_distribution<std::size_t> pick_;
};

double collision_norm(std::span<const Index> samples, const SubSupport& s, std::size_t n_dummy, Rng& rng) {
    const std::size_t m = samples.size();
    if (m < 2) return 0.0;
    Flattener f(s, n_dummy);
    std::unordered_map<Index, std::int64_t> counts;
    counts.reserve(m);
    for (auto x : samples) ++counts[f(x, rng)];
    double coll = 0.0;
    for (const auto& [_, n] : counts) coll += 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
    return std::sqrt(coll / pairs);
}

void check_samples(std::size_t have, std::size_t need, const char* what) {
    if (have < need)
        throw InsufficientSamples(std::string(what) + ": have " + std::to_string(have) + ", need " +
                                  std::to_string(need));
}

}  // namespace

std::size_t estimate_l2_required(std::size_t host_size, double eps, const EquivConstants& k) {
    return static_cast<std::size_t>(
        std::ceil(k.c_norm * (std::sqrt(static_cast<double>(host_size)) + 1.0 / eps)));
}

double estimate_l2(std::span<const Index> samples, const SubSupport& s, double eps, Rng& rng,
                   const EquivConstants& k) {
    if (!(eps > 0.0)) throw InvalidThreshold("eps must be positive");
    check_samples(samples.size(), std::max<std::size_t>(2, estimate_l2_required(s.host_size(), eps, k)),
                  "estimate_l2");
    return collision_norm(samples, s, n_dummy_for(eps, 1.0), rng);
}

double flattened_l2_sq(std::span<const double> p, std::span<const double> q, const SubSupport& s,
                       std::size_t n_dummy) {
    if (p.size() != s.host_size() || q.size() != s.host_size())
        throw DimensionMismatch("distribution does not match sub-support host");
    double in = 0.0, out_p = 0.0, out_q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (s.contains(i)) {
            in += (p[i] - q[i]) * (p[i] - q[i]);
        } else {
            out_p += p[i];
            out_q += q[i];
        }
    }
    // Each dummy carries an equal share of the outside mass.
    const double nd = static_cast<double>(n_dummy);
    const double diff = (out_p - out_q) / nd;
    return in + nd * diff * diff;
}

ZTestResult z_test_core(std::span<const Index> p, std::span<const Index> q, std::size_t volume,
                        double lambda, double eps, Rng& rng) {
    const std::size_t pool = poisson_pool(lambda);
    if (p.size() < 2 * pool || q.size() < 2 * pool)
        throw InsufficientSamples("Z-test needs two Poisson pools per side");
    ZTestResult r;
    r.n = lambda;
    r.threshold = eps * eps * lambda * lambda / 2.0;
    ZSplit split{CountTensor({volume}), CountTensor({volume}), CountTensor({volume}), CountTensor({volume})};
    CountTensor* sets[4] = {&split.x, &split.x2, &split.y, &split.y2};
    for (int s = 0; s < 4; ++s) {
        auto m = static_cast<std::size_t>(poissonize(lambda, rng));
        if (m > pool) {
            m = pool;
            r.truncated = true;
        }
        const auto& src = s < 2 ? p : q;
        const std::size_t off = (s % 2) * pool;
        for (std::size_t i = 0; i < m; ++i) sets[s]->add(src[off + i]);
    }
    r.z = z_statistic(split);
    r.outcome = static_cast<double>(r.z) > r.threshold ? ZOutcome::No : ZOutcome::Yes;
    return r;
}

std::size_t equiv_l2_repetitions(double delta) {
    if (!(delta > 0.0)) throw InvalidThreshold("delta must be positive");
    return static_cast<std::size_t>(std::max(1.0, std::ceil(6.0 * std::log(1.0 / delta))));
}

namespace {

struct L2Plan {
    std::size_t reps = 0;
    std::size_t norm_per_rep = 0;
    std::size_t z_per_rep = 0;  // two pools
    double norm_eps = 0.0;
    double lambda = 0.0;
};

L2Plan plan_l2(double b, double gamma, const SubSupport& s, double delta, const EquivConstants& k) {
    if (!(gamma > 0.0)) throw InvalidThreshold("eps_gap must be positive");
    if (!(b >= 0.0)) throw InvalidThreshold("b must be non-negative");
    L2Plan p;
    p.reps = equiv_l2_repetitions(delta);
    p.norm_eps = std::max(gamma, b) / 2.0;
    p.norm_per_rep = std::max<std::size_t>(2, estimate_l2_required(s.host_size(), p.norm_eps, k));
    p.lambda = k.c_eq * std::max(b / (gamma * gamma), 1.0 / gamma);
    p.z_per_rep = 2 * poisson_pool(p.lambda);
    return p;
}

}  // namespace

std::size_t equiv_l2_required(double b, double gamma, const SubSupport& s, double delta,
                              const EquivConstants& k) {
    const auto p = plan_l2(b, gamma, s, delta, k);
    return p.reps * (p.norm_per_rep + p.z_per_rep);
}

EquivL2Result equiv_l2(std::span<const Index> samples_p, std::span<const Index> samples_q,
                       const SubSupport& s, double b, double gamma, double delta, Rng& rng,
                       const EquivConstants& k) {
    const auto plan = plan_l2(b, gamma, s, delta, k);
    const std::size_t need = plan.reps * (plan.norm_per_rep + plan.z_per_rep);
    check_samples(std::min(samples_p.size(), samples_q.size()), need, "equiv_l2");

    // Surplus samples go to the Z phase.
    const std::size_t chunk_p = samples_p.size() / plan.reps;
    const std::size_t chunk_q = samples_q.size() / plan.reps;
    const std::size_t z_avail = std::min(chunk_p - plan.norm_per_rep, chunk_q);
    const double lambda = std::max(plan.lambda, poisson_mean_for_pool(z_avail / 2));
    const std::size_t n_dummy = n_dummy_for(gamma, 4.0);
    const std::size_t norm_dummy = n_dummy_for(plan.norm_eps, 1.0);

    EquivL2Result r;
    r.repetitions = static_cast<int>(plan.reps);
    r.lambda = lambda;
    Flattener flat(s, n_dummy);
    std::vector<Index> fp, fq;
    for (std::size_t rep = 0; rep < plan.reps; ++rep) {
        auto sp = samples_p.subspan(rep * chunk_p, chunk_p);
        auto sq = samples_q.subspan(rep * chunk_q, chunk_q);

        const double c = collision_norm(sp.first(plan.norm_per_rep), s, norm_dummy, rng);
        if ((c - (b + gamma)) / 2.0 > b) {
            ++r.norm_rejections;
            ++r.far_votes;
            continue;
        }
        auto zp = sp.subspan(plan.norm_per_rep);
        fp.assign(zp.begin(), zp.end());
        fq.assign(sq.begin(), sq.end());
        for (auto& x : fp) x = flat(x, rng);
        for (auto& x : fq) x = flat(x, rng);
        const auto z = z_test_core(fp, fq, flat.volume(), lambda, gamma, rng);
        r.last_z = static_cast<double>(z.z);
        r.threshold = z.threshold;
        if (z.truncated) ++r.truncations;
        if (z.outcome == ZOutcome::No) ++r.far_votes;
    }
    r.outcome = 2 * r.far_votes > r.repetitions ? EquivOutcome::Far : EquivOutcome::Same;
    return r;
}

std::size_t equiv_small_required(const SubSupport& s, double eta, double delta, const EquivConstants& k) {
    if (s.empty()) return 0;
    const double tau = eta / std::sqrt(static_cast<double>(s.size()));
    const auto per = static_cast<std::size_t>(
        std::ceil(k.c_l2 * (std::sqrt(static_cast<double>(s.host_size())) + 20.0 / tau)));
    return equiv_l2_repetitions(delta) * std::max<std::size_t>(2, per);
}

EquivSmallResult equiv_small(std::span<const Index> samples_p, const SubSupport& s, double zeta,
                             double eta, double delta, Rng& rng, const EquivConstants& k) {
    if (!(eta > 0.0)) throw InvalidThreshold("eta must be positive");
    EquivSmallResult r;
    if (s.empty()) {
        r.repetitions = 0;
        return r;
    }
    r.tau = eta / std::sqrt(static_cast<double>(s.size()));
    if (zeta < 0.0) throw InvalidThreshold("zeta must be non-negative");
    r.promise_met = zeta <= r.tau / 10.0 * (1.0 + 1e-12);
    const std::size_t reps = equiv_l2_repetitions(delta);
    check_samples(samples_p.size(), equiv_small_required(s, eta, delta, k), "equiv_small");
    const std::size_t chunk = samples_p.size() / reps;
    const std::size_t n_dummy = n_dummy_for(r.tau / 20.0, 1.0);
    r.repetitions = static_cast<int>(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        r.last_c = collision_norm(samples_p.subspan(rep * chunk, chunk), s, n_dummy, rng);
        if (r.last_c > r.tau / 4.0) ++r.not_equal_votes;
    }
    r.outcome = 2 * r.not_equal_votes > r.repetitions ? SmallOutcome::NotEqual
                                                       : SmallOutcome::CloseInHellinger;
    return r;
}

std::size_t equiv_test_z_required(double b, double eps, const EquivConstants& k) {
    if (!(eps > 0.0) || !(b > 0.0)) throw InvalidThreshold("b and eps must be positive");
    return 2 * poisson_pool(k.c_z * b / (eps * eps));
}

ZTestResult equiv_test_z(std::span<const Index> samples_p, std::span<const Index> samples_q,
                         std::size_t host_size, double b, double eps, std::uint64_t seed,
                         const EquivConstants& k) {
    const std::size_t need = equiv_test_z_required(b, eps, k);
    check_samples(std::min(samples_p.size(), samples_q.size()), need, "equiv_test_z");
    for (auto x : samples_p)
        if (x >= host_size) throw DimensionMismatch("sample outside host support");
    for (auto x : samples_q)
        if (x >= host_size) throw DimensionMismatch("sample outside host support");
    Rng rng(seed);
    return z_test_core(samples_p, samples_q, host_size, k.c_z * b / (eps * eps), eps, rng);
}

}  // namespace citest
