#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "citest/distributions.hpp"
#include "citest/equiv.hpp"
#include "citest/verdict.hpp"

namespace citest {

struct Dims3 {
    std::size_t a = 0, b = 0, c = 0;
    std::size_t volume() const { return a * b * c; }
    Index flat(const Triplet& t) const { return (static_cast<Index>(t.a) * b + t.b) * c + t.c; }
};

struct PairingMoments {
    double x = 0.0;
    double e1 = 0.0;
    double e2 = 0.0;
};

PairingMoments pairing_moments(double x);

// Membership masks over B.
using BSet = std::vector<bool>;

CountTensor sim_abc(std::span<const Triplet> samples, const Dims3& d, const BSet& b_small, Rng& rng);
CountTensor sim_abc_ci(std::span<const Triplet> samples, const Dims3& d, const BSet& b_small, Rng& rng);

struct CiLargeOutput {
    bool aborted = false;
    std::vector<Triplet> samples;
};

CiLargeOutput sim_abc_ci_large(std::span<const Triplet> samples, const BSet& b_large, Rng& rng);

struct RegimeSplit {
    double nu = 0.0;
    BSet b_small, b_large;
};

RegimeSplit split_regimes(const std::vector<double>& p_hat_b, double n_s);

struct PartitionGrid3D {
    int k_a = 0, k_b = 0, k_c = 0;
    double k_abc = 0.0;
    std::vector<int> bucket_ab;  // [a * d_b + b]
    std::vector<int> bucket_bc;  // [b * d_c + c]
    std::vector<int> bucket_b;   // -1 outside B_L
    std::vector<std::size_t> b_per_k;
    std::map<std::tuple<int, int, int>, SubSupport> categories;
};

PartitionGrid3D build_grid_3d(const std::vector<double>& p_hat_ab, const std::vector<double>& p_hat_bc,
                              const std::vector<double>& p_hat_b, const BSet& b_large, const Dims3& d,
                              double m, double nu, double eps_l);

double cmi_gamma(int i, int j, int k, const PartitionGrid3D& g, std::size_t size, double eps_l);
double cmi_b(int i, int j, int k, std::size_t size);
double cmi_eps_l(std::size_t size, double eps_l);

struct CmiConstants {
    EquivConstants equiv;
    double c_small = 20.0;               // N_S leading constant
    double c_large = 1.0;                // N_L leading constant (budget reporting)
    double c_m = 1.5e-9;                 // leading constant of the per-category learning scale M
    double learn_scale = 5e-3;           // multiplies the 8 M k_ABC learning sets
    double gamma_scale = 2e4;            // multiplies every category gap
    double b_scale = 1.2341e-4;          // multiplies every norm bound (e^-9)
    double small_threshold_scale = 1.0;  // multiplies the small-regime Z threshold
    double sample_scale = 0.05;          // multiplies N_S, M, c_eq, c_norm, c_l2

    static CmiConstants paper();
    EquivConstants scaled_equiv() const;
};

struct CmiPlan {
    double n_s = 0.0;
    double n_l = 0.0;
    double nu = 0.0;
    std::size_t n_nu = 0;
    double k_abc = 0.0;
    double m = 0.0;
    std::size_t n_learn = 0;
    double delta = 0.0;
    std::size_t budget = 0;
};

CmiPlan cmi_plan(const Dims3& d, double eps, const CmiConstants& k);

enum class Regime { Small, Large, Both };

Verdict cmi_small_test(SampleStream<Triplet>& s, const BSet& b_small, double eps_s, double n_s,
                       const Dims3& d, Rng& rng, const CmiConstants& k = {});
Verdict cmi_large_test(SampleStream<Triplet>& s, const BSet& b_large, double eps_l, double nu,
                       const Dims3& d, Rng& rng, const CmiConstants& k = {});
Verdict cmi_test(SampleStream<Triplet>& s, const Dims3& d, double eps, Rng& rng,
                 const CmiConstants& k = {}, Regime regime = Regime::Both);
Verdict cmi_test(const std::vector<Triplet>& samples, const Dims3& d, double eps, std::uint64_t seed,
                 const CmiConstants& k = {}, Regime regime = Regime::Both);

}  // namespace citest
