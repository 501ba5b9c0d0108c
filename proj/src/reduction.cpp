#include "citest/reduction.hpp"

#include <cmath>

namespace citest {

ReductionParams reduction_params(double eps, std::size_t d_a, std::size_t d_c) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidThreshold("eps must lie in (0,1)");
    if (d_a < 1 || d_c < 1) throw InvalidThreshold("dimensions must be positive");
    const double dd = static_cast<double>(d_a) * static_cast<double>(d_c);
    const double lg = std::max(1.0, std::log(dd / eps));
    const double root = eps / (48.0 * dd * lg);
    ReductionParams r;
    r.eps = eps;
    r.eta = root * root;
    r.nu = eps / (8.0 * std::log(dd / (r.eta * r.eta)));
    return r;
}

Triplet mix_sample(const Triplet& t, double eta, std::size_t d_a, std::size_t d_c, Rng& rng) {
    std::bernoulli_distribution flip(eta);
    Triplet out = t;
    const bool xa = flip(rng);
    const bool xc = flip(rng);
    if (xa) out.a = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, d_a - 1)(rng));
    if (xc) out.c = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, d_c - 1)(rng));
    return out;
}

Joint3 pushforward_exact(const Joint3& j, double eta) {
    const std::size_t da = j.d_a(), db = j.d_b(), dc = j.d_c();
    const double ua = 1.0 / static_cast<double>(da), uc = 1.0 / static_cast<double>(dc);
    const auto pab = j.marginal_ab();
    const auto pbc = j.marginal_bc();
    const auto pb = j.marginal_b();
    std::vector<double> q(j.size());
    for (std::size_t a = 0; a < da; ++a)
        for (std::size_t b = 0; b < db; ++b)
            for (std::size_t c = 0; c < dc; ++c) {
                // Per-slice mixture, scaled by p_b.
                q[j.index(a, b, c)] = (1 - eta) * (1 - eta) * j.at(a, b, c) +
                                      eta * (1 - eta) * (pbc[b * dc + c] * ua + pab[a * db + b] * uc) +
                                      eta * eta * pb[b] * ua * uc;
            }
    return Joint3(da, db, dc, std::move(q));
}

std::vector<Triplet> MixedStream::take(std::size_t n) {
    auto v = inner_.take(n);
    for (auto& t : v) t = mix_sample(t, eta_, d_a_, d_c_, rng_);
    used_ += n;
    return v;
}

}  // namespace citest
