#pragma once

#include <cstddef>
#include <memory>

#include "citest/distributions.hpp"

namespace citest {

struct ReductionParams {
    double eta = 0.0;
    double nu = 0.0;
    double eps = 0.0;
};

ReductionParams reduction_params(double eps, std::size_t d_a, std::size_t d_c);

Triplet mix_sample(const Triplet& t, double eta, std::size_t d_a, std::size_t d_c, Rng& rng);

// Exact law of mix_sample applied to draws from j.
Joint3 pushforward_exact(const Joint3& j, double eta);

// Applies mix_sample to every draw of an underlying stream.
class MixedStream final : public SampleStream<Triplet> {
public:
    MixedStream(SampleStream<Triplet>& inner, double eta, std::size_t d_a, std::size_t d_c, Rng& rng)
        : inner_(inner), eta_(eta), d_a_(d_a), d_c_(d_c), rng_(rng) {}
    std::vector<Triplet> take(std::size_t n) override;

private:
    SampleStream<Triplet>& inner_;
    double eta_;
    std::size_t d_a_, d_c_;
    Rng& rng_;
};

}  // namespace citest
