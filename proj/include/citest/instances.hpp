#pragma once

#include <cstddef>
#include <cstdint>

#include "citest/distributions.hpp"

namespace citest {

// Marginal weights drawn from [1-spread, 1+spread], normalized.
Dist random_marginal(std::size_t n, double spread, Rng& rng);

Joint2 random_product(std::size_t d_a, std::size_t d_c, double spread, Rng& rng);
// A Markov chain A - B - C with random p_B, p_{A|B}, p_{C|B}.
Joint3 random_markov(std::size_t d_a, std::size_t d_b, std::size_t d_c, double spread, Rng& rng);

struct PlantedMI {
    Joint2 joint;
    double lambda = 0.0;
    double hellinger_sq = 0.0;  // exact, to the product of marginals
};

struct PlantedCMI {
    Joint3 joint;
    double lambda = 0.0;
    double hellinger_sq = 0.0;  // exact, to the Markov reference
};

// (1-lambda) * uniform product + lambda * random matching, with the smallest lambda on a
// bisection grid whose exact squared Hellinger distance to the product reaches eps.
PlantedMI planted_far_mi(std::size_t d_a, std::size_t d_c, double eps, std::uint64_t seed);
// Same construction applied to every B slice under a uniform p_B.
PlantedCMI planted_far_cmi(std::size_t d_a, std::size_t d_b, std::size_t d_c, double eps, std::uint64_t seed);

}  // namespace citest
