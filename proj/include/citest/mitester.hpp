#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "citest/distributions.hpp"
#include "citest/equiv.hpp"
#include "citest/verdict.hpp"

namespace citest {

struct MiConstants {
    EquivConstants equiv;
    double c_mixed = 0.02;      // N_mixed leading constant
    double c_heavy = 1.0;       // N_heavy leading constant (budget reporting)
    double c_total = 1.0;       // N leading constant (budget reporting)
    double gamma_scale = 400.0; // multiplies every category gap gamma(i,j)
    double b_scale = 1.0;       // multiplies every norm bound b(i,j)
    double sample_scale = 1.0;  // multiplies c_mixed, c_eq and c_norm together

    static MiConstants paper();
    EquivConstants scaled_equiv() const;
};

struct MiPlan {
    double k_ac = 0.0;
    double n_mixed = 0.0;
    double n_heavy = 0.0;
    double n_formula = 0.0;  // N of the sample-complexity display
    int k_a = 0, k_c = 0;
    double delta = 0.0;
    std::size_t n_learn = 0;  // per marginal
    std::size_t budget_p = 0; // caps on stream usage
    std::size_t budget_q = 0;
};

MiPlan mi_plan(std::size_t d_a, std::size_t d_c, double eps, const MiConstants& k);

// Empirical frequencies; requires n >= 8 ln(4d/zeta)/tau.
std::vector<double> learn_buckets(const std::vector<std::size_t>& samples, std::size_t d, double tau,
                                  double zeta);

int bucket_of(double q, int k_last);

struct PartitionGrid2D {
    int k_a = 0, k_c = 0;
    double k_ac = 0.0;
    std::vector<int> bucket_a, bucket_c;
    std::map<std::pair<int, int>, SubSupport> categories;  // non-empty categories only
};

PartitionGrid2D build_grid_2d(const std::vector<double>& q_hat_a, const std::vector<double>& q_hat_c,
                              double m, double eps);

double mi_gamma(int i, int j, const PartitionGrid2D& g, std::size_t size, double eps);
double mi_b(int i, int j, std::size_t size);

std::vector<Pair> simulate_product_samples(const std::vector<Pair>& samples);

// Product-of-marginals draws built from pairs of an underlying stream.
class ProductStream final : public SampleStream<Pair> {
public:
    explicit ProductStream(SampleStream<Pair>& inner) : inner_(inner) {}
    std::vector<Pair> take(std::size_t n) override;

private:
    SampleStream<Pair>& inner_;
};

Verdict mi_test(SampleStream<Pair>& p, SampleStream<Pair>& q, std::size_t d_a, std::size_t d_c,
                double eps, Rng& rng, const MiConstants& k = {});
Verdict mi_test(const std::vector<Pair>& samples_p, const std::vector<Pair>& samples_q, std::size_t d_a,
                std::size_t d_c, double eps, std::uint64_t seed, const MiConstants& k = {});

}  // namespace citest
