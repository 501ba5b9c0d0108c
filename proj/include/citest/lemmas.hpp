#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "citest/rng.hpp"

namespace citest {

struct LemmaCheck {
    std::string name;
    std::size_t cases = 0;
    std::size_t violations = 0;
    double min_margin = 0.0;  // smallest slack over all cases; negative on a violation
    bool pass = true;
    std::string detail;
};

struct LemmaReport {
    std::uint64_t seed = 0;
    std::vector<LemmaCheck> checks;
    bool all_pass() const;
};

// Scalar exponential bounds on a grid.
LemmaCheck check_exp_bounds();
// a ln(2a/(a+b)) + b ln(2b/(a+b)) >= (a-b)^2 / (6(a+b)) on a grid.
LemmaCheck check_log_chi();
// 2 I(X:A) <= sum (p0-p1)^2/(p0+p1) <= 12 I(X:A) for a uniform bit X.
LemmaCheck check_mi_sandwich(std::size_t tables, Rng& rng);
// KL/Hellinger sandwich, l1 versus Hellinger and l2, and sub-support l2 bounds on random pairs.
std::vector<LemmaCheck> check_divergence_inequalities(std::size_t pairs, Rng& rng);
// Moments of the pairing count against Monte Carlo runs of sim_abc.
LemmaCheck check_pairing_moments(std::size_t reps, Rng& rng);
// Mean and variance of the Poissonized Z statistic on uniform(d) against a planted l2 pair.
std::vector<LemmaCheck> check_z_moments(std::size_t d, double eps, double n, std::size_t reps, Rng& rng);

// Exact mean and variance of X X' - 2 X Y + Y Y' with X, X' ~ Poi(a) and Y, Y' ~ Poi(c).
double z_cell_mean(double a, double c);
double z_cell_var(double a, double c);

LemmaReport verify_lemmas(std::uint64_t seed);
void write_lemma_report(std::ostream& os, const LemmaReport& r);

}  // namespace citest
