#include "citest/instances.hpp"

#include <numeric>

namespace citest {

Dist random_marginal(std::size_t n, double spread, Rng& rng) {
    if (!(spread >= 0.0 && spread < 1.0)) throw InvalidThreshold("spread must lie in [0,1)");
    std::uniform_real_distribution<double> u(1.0 - spread, 1.0 + spread);
    std::vector<double> w(n);
    for (auto& x : w) x = u(rng);
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= s;
    return Dist(std::move(w));
}

Joint2 random_product(std::size_t d_a, std::size_t d_c, double spread, Rng& rng) {
    const auto pa = random_marginal(d_a, spread, rng);
    const auto pc = random_marginal(d_c, spread, rng);
    return Joint2::product(pa, pc);
}

Joint3 random_markov(std::size_t d_a, std::size_t d_b, std::size_t d_c, double spread, Rng& rng) {
    const auto pb = random_marginal(d_b, spread, rng);
    std::vector<double> p(d_a * d_b * d_c);
    for (std::size_t b = 0; b < d_b; ++b) {
        const auto pa = random_marginal(d_a, spread, rng);
        const auto pc = random_marginal(d_c, spread, rng);
        for (std::size_t a = 0; a < d_a; ++a)
            for (std::size_t c = 0; c < d_c; ++c) p[(a * d_b + b) * d_c + c] = pb[b] * pa[a] * pc[c];
    }
    return Joint3(d_a, d_b, d_c, std::move(p));
}

namespace {

// Row a of the matching puts its mass on column match[a].
std::vector<std::size_t> random_matching(std::size_t d_a, std::size_t d_c, Rng& rng) {
    std::vector<std::size_t> cols(std::max(d_a, d_c));
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(cols.begin(), cols.end(), rng);
    std::vector<std::size_t> m(d_a);
    for (std::size_t a = 0; a < d_a; ++a) m[a] = cols[a] % d_c;
    return m;
}

std::vector<double> mixture_slice(std::size_t d_a, std::size_t d_c, const std::vector<std::size_t>& match,
                                  double lambda) {
    std::vector<double> p(d_a * d_c, (1.0 - lambda) / static_cast<double>(d_a * d_c));
    for (std::size_t a = 0; a < d_a; ++a) p[a * d_c + match[a]] += lambda / static_cast<double>(d_a);
    return p;
}

template <class Build, class Measure>
double bisect_lambda(double eps, Build build, Measure measure) {
    if (measure(build(1.0)) < eps) throw InfeasibleParameters("planted instance cannot reach the target distance");
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (measure(build(mid)) >= eps ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

PlantedMI planted_far_mi(std::size_t d_a, std::size_t d_c, double eps, std::uint64_t seed) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidThreshold("eps must lie in (0,1)");
    Rng rng(seed);
    const auto match = random_matching(d_a, d_c, rng);
    auto build = [&](double l) { return Joint2(d_a, d_c, mixture_slice(d_a, d_c, match, l)); };
    auto measure = [](const Joint2& j) { return hellinger_sq_to_product(j); };
    PlantedMI out;
    out.lambda = bisect_lambda(eps, build, measure);
    out.joint = build(out.lambda);
    out.hellinger_sq = measure(out.joint);
    return out;
}

PlantedCMI planted_far_cmi(std::size_t d_a, std::size_t d_b, std::size_t d_c, double eps, std::uint64_t seed) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidThreshold("eps must lie in (0,1)");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> match;
    for (std::size_t b = 0; b < d_b; ++b) match.push_back(random_matching(d_a, d_c, rng));
    auto build = [&](double l) {
        std::vector<double> p(d_a * d_b * d_c);
        for (std::size_t b = 0; b < d_b; ++b) {
            const auto s = mixture_slice(d_a, d_c, match[b], l);
            for (std::size_t a = 0; a < d_a; ++a)
                for (std::size_t c = 0; c < d_c; ++c)
                    p[(a * d_b + b) * d_c + c] = s[a * d_c + c] / static_cast<double>(d_b);
        }
        return Joint3(d_a, d_b, d_c, std::move(p));
    };
    auto measure = [](const Joint3& j) { return hellinger_sq_to_markov(j); };
    PlantedCMI out;
    out.lambda = bisect_lambda(eps, build, measure);
    out.joint = build(out.lambda);
    out.hellinger_sq = measure(out.joint);
    return out;
}

}  // namespace citest
