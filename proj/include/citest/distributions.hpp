#pragma once

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "citest/errors.hpp"
#include "citest/rng.hpp"

namespace citest {

inline constexpr double kProbTolerance = 1e-9;

struct Pair {
    std::uint32_t a = 0;
    std::uint32_t c = 0;
    friend bool operator==(const Pair&, const Pair&) = default;
};

struct Triplet {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint32_t c = 0;
    friend bool operator==(const Triplet&, const Triplet&) = default;
};

// Checks non-negativity and unit mass within kProbTolerance, then renormalizes in place.
void validate_and_normalize(std::vector<double>& p);

class Dist {
public:
    Dist() = default;
    explicit Dist(std::vector<double> probs);
    static Dist uniform(std::size_t n);
    static Dist point_mass(std::size_t n, std::size_t atom);

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    const std::vector<double>& probs() const { return p_; }

private:
    std::vector<double> p_;
};

class Joint2 {
public:
    Joint2() = default;
    Joint2(std::size_t d_a, std::size_t d_c, std::vector<double> probs);
    static Joint2 product(const Dist& pa, const Dist& pc);

    std::size_t d_a() const { return d_a_; }
    std::size_t d_c() const { return d_c_; }
    std::size_t size() const { return p_.size(); }
    std::size_t index(std::size_t a, std::size_t c) const { return a * d_c_ + c; }
    double at(std::size_t a, std::size_t c) const { return p_[a * d_c_ + c]; }
    const std::vector<double>& probs() const { return p_; }

    Dist marginal_a() const;
    Dist marginal_c() const;
    Joint2 product_of_marginals() const;

private:
    std::size_t d_a_ = 0, d_c_ = 0;
    std::vector<double> p_;
};

class Joint3 {
public:
    Joint3() = default;
    Joint3(std::size_t d_a, std::size_t d_b, std::size_t d_c, std::vector<double> probs);

    std::size_t d_a() const { return d_a_; }
    std::size_t d_b() const { return d_b_; }
    std::size_t d_c() const { return d_c_; }
    std::size_t size() const { return p_.size(); }
    std::size_t index(std::size_t a, std::size_t b, std::size_t c) const {
        return (a * d_b_ + b) * d_c_ + c;
    }
    double at(std::size_t a, std::size_t b, std::size_t c) const { return p_[index(a, b, c)]; }
    const std::vector<double>& probs() const { return p_; }

    std::vector<double> marginal_b() const;
    // Row-major [a * d_b + b].
    std::vector<double> marginal_ab() const;
    // Row-major [b * d_c + c].
    std::vector<double> marginal_bc() const;

    // P_AB * P_BC / P_B, zero on slices with p_b = 0.
    Joint3 markov_reference() const;
    // The A,C table at slice b (unnormalized, sums to p_b).
    Joint2 slice_conditional(std::size_t b) const;

private:
    std::size_t d_a_ = 0, d_b_ = 0, d_c_ = 0;
    std::vector<double> p_;
};

// Sparse non-negative counts over a flat index space of a fixed shape.
class CountTensor {
public:
    CountTensor() = default;
    explicit CountTensor(std::vector<std::size_t> dims);

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::uint64_t volume() const;
    void add(std::uint64_t flat, std::int64_t k = 1);
    std::int64_t get(std::uint64_t flat) const;
    std::int64_t total() const { return total_; }
    const std::unordered_map<std::uint64_t, std::int64_t>& entries() const { return counts_; }

private:
    std::vector<std::size_t> dims_;
    std::unordered_map<std::uint64_t, std::int64_t> counts_;
    std::int64_t total_ = 0;
};

double kl(const Dist& p, const Dist& q);
double hellinger_sq(const Dist& p, const Dist& q);
double lp_dist(const Dist& p, const Dist& q, int order);

double kl(std::span<const double> p, std::span<const double> q);
double hellinger_sq(std::span<const double> p, std::span<const double> q);
double lp_dist(std::span<const double> p, std::span<const double> q, int order);

double mi_exact(const Joint2& j);
double cmi_exact(const Joint3& j);
double hellinger_sq_to_product(const Joint2& j);
double hellinger_sq_to_markov(const Joint3& j);

// Reusable sampler over a fixed probability vector.
class Sampler {
public:
    explicit Sampler(const std::vector<double>& probs) : dist_(probs.begin(), probs.end()) {}
    std::size_t operator()(Rng& rng) { return dist_(rng); }

private:
    std::discrete_distribution<std::size_t> dist_;
};

std::vector<std::size_t> sample(const Dist& d, std::size_t n, Rng& rng);
std::vector<std::size_t> sample(const Dist& d, std::size_t n, std::uint64_t seed);
std::vector<Pair> sample_pairs(const Joint2& j, std::size_t n, Rng& rng);
std::vector<Triplet> sample_triplets(const Joint3& j, std::size_t n, Rng& rng);

// Draw streams. take() hands out fresh samples never returned before.
template <class T>
class SampleStream {
public:
    virtual ~SampleStream() = default;
    virtual std::vector<T> take(std::size_t n) = 0;
    std::size_t used() const { return used_; }

protected:
    std::size_t used_ = 0;
};

// A fixed multiset, shuffled once, handed out sequentially.
template <class T>
class PoolStream final : public SampleStream<T> {
public:
    PoolStream(std::vector<T> pool, Rng& rng) : pool_(std::move(pool)) {
        std::shuffle(pool_.begin(), pool_.end(), rng);
    }
    std::vector<T> take(std::size_t n) override {
        if (this->used_ + n > pool_.size())
            throw InsufficientSamples("sample pool exhausted");
        std::vector<T> out(pool_.begin() + static_cast<std::ptrdiff_t>(this->used_),
                           pool_.begin() + static_cast<std::ptrdiff_t>(this->used_ + n));
        this->used_ += n;
        return out;
    }
    std::size_t remaining() const { return pool_.size() - this->used_; }

private:
    std::vector<T> pool_;
};

// Fresh i.i.d. draws from a generator, capped at `cap` in total.
template <class T>
class GeneratorStream final : public SampleStream<T> {
public:
    GeneratorStream(std::function<T()> gen, std::size_t cap) : gen_(std::move(gen)), cap_(cap) {}
    std::vector<T> take(std::size_t n) override {
        if (this->used_ + n > cap_)
            throw InsufficientSamples("sample budget exhausted");
        std::vector<T> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(gen_());
        this->used_ += n;
        return out;
    }

private:
    std::function<T()> gen_;
    std::size_t cap_;
};

std::unique_ptr<SampleStream<Pair>> joint2_stream(const Joint2& j, Rng& rng, std::size_t cap);
std::unique_ptr<SampleStream<Triplet>> joint3_stream(const Joint3& j, Rng& rng, std::size_t cap);

struct HardInstanceMI {
    Joint2 joint;
    int label = 0;
    std::vector<bool> s1_mask;
    double alpha = 0.0;
};

struct HardInstanceCMI {
    Joint3 joint;
    int label = 0;
    // Indexed [a * d_b + b].
    std::vector<bool> s1_mask;
    double alpha = 0.0;
};

HardInstanceMI gen_hard_mi(std::size_t d_a, std::size_t d_c, double n, double eps, int label,
                           std::uint64_t seed);
HardInstanceCMI gen_hard_cmi(std::size_t d_a, std::size_t d_b, std::size_t d_c, double n,
                             double eps, int label, std::uint64_t seed);

}  // namespace citest
