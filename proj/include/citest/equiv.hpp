#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "citest/distributions.hpp"

namespace citest {

using Index = std::uint64_t;

class SubSupport {
public:
    SubSupport() = default;
    SubSupport(std::size_t host_size, std::vector<Index> indices);
    static SubSupport full(std::size_t host_size);

    std::size_t host_size() const { return host_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    bool is_full() const { return indices_.size() == host_; }
    bool contains(Index i) const { return i < host_ && mask_[i]; }
    const std::vector<Index>& indices() const { return indices_; }

private:
    std::size_t host_ = 0;
    std::vector<Index> indices_;
    std::vector<bool> mask_;
};

// Leading constants of the equivalence primitives. Defaults are desk-scale fits.
struct EquivConstants {
    double c_norm = 4.0;   // norm estimation: c_norm * (sqrt(d) + 1/eps) samples
    double c_eq = 12.0;    // l2 equivalence: Poisson mean c_eq * max{b/eps^2, 1/eps} per half
    double c_z = 10.0;     // standalone Z-test: N = c_z * b / eps^2
    double c_l2 = 4.0;     // small-norm shortcut: c_l2 * (sqrt(d) + 20/tau) per repetition

    static EquivConstants paper();
};

enum class EquivOutcome { Same, Far };
enum class SmallOutcome { CloseInHellinger, NotEqual };
enum class ZOutcome { Yes, No };

struct ZSplit {
    CountTensor x, x2, y, y2;
};

std::int64_t z_statistic(const ZSplit& split);

std::int64_t poissonize(double mean, Rng& rng);

// Smallest Poisson mean-to-pool margin used everywhere: pool(lambda) = lambda + 4 sqrt(lambda) + 4.
std::size_t poisson_pool(double lambda);
// Largest lambda whose pool fits in `available` samples.
double poisson_mean_for_pool(std::size_t available);

std::size_t estimate_l2_required(std::size_t host_size, double eps, const EquivConstants& k);
double estimate_l2(std::span<const Index> samples, const SubSupport& s, double eps, Rng& rng,
                   const EquivConstants& k = {});

// Exact ||P'-Q'||_2^2 after flattening the complement of s onto n_dummy indices.
double flattened_l2_sq(std::span<const double> p, std::span<const double> q, const SubSupport& s,
                       std::size_t n_dummy);

struct EquivL2Result {
    EquivOutcome outcome = EquivOutcome::Same;
    int repetitions = 0;
    int far_votes = 0;
    int norm_rejections = 0;
    int truncations = 0;
    double last_z = 0.0;
    double threshold = 0.0;
    double lambda = 0.0;
};

std::size_t equiv_l2_repetitions(double delta);
std::size_t equiv_l2_required(double b, double gamma, const SubSupport& s, double delta,
                              const EquivConstants& k);
EquivL2Result equiv_l2(std::span<const Index> samples_p, std::span<const Index> samples_q,
                       const SubSupport& s, double b, double gamma, double delta, Rng& rng,
                       const EquivConstants& k = {});

struct EquivSmallResult {
    SmallOutcome outcome = SmallOutcome::CloseInHellinger;
    int repetitions = 0;
    int not_equal_votes = 0;
    double tau = 0.0;
    double last_c = 0.0;
    bool promise_met = true;  // zeta <= eta / (10 sqrt|S|)
};

std::size_t equiv_small_required(const SubSupport& s, double eta, double delta,
                                 const EquivConstants& k);
EquivSmallResult equiv_small(std::span<const Index> samples_p, const SubSupport& s, double zeta,
                             double eta, double delta, Rng& rng, const EquivConstants& k = {});

struct ZTestResult {
    ZOutcome outcome = ZOutcome::Yes;
    std::int64_t z = 0;
    double threshold = 0.0;
    double n = 0.0;
    bool truncated = false;
};

std::size_t equiv_test_z_required(double b, double eps, const EquivConstants& k);
ZTestResult equiv_test_z(std::span<const Index> samples_p, std::span<const Index> samples_q,
                         std::size_t host_size, double b, double eps, std::uint64_t seed,
                         const EquivConstants& k = {});

// The Z-test core on already-flattened streams; each side needs 2 * poisson_pool(lambda).
ZTestResult z_test_core(std::span<const Index> p, std::span<const Index> q, std::size_t volume,
                        double lambda, double eps, Rng& rng);

}  // namespace citest
