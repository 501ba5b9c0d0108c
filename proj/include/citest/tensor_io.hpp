#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "citest/distributions.hpp"

namespace citest {

using AnyJoint = std::variant<Joint2, Joint3>;

// Text format: a header line `dims: d_A [d_B] d_C`, then row-major decimal entries.
void write_tensor(std::ostream& os, const Joint2& j);
void write_tensor(std::ostream& os, const Joint3& j);
AnyJoint read_tensor(std::istream& is);
AnyJoint load_tensor(const std::string& path);

// One sample per line: `a c` or `a b c`.
void write_samples(std::ostream& os, const std::vector<Pair>& s);
void write_samples(std::ostream& os, const std::vector<Triplet>& s);
std::vector<Pair> read_pair_samples(std::istream& is);
std::vector<Triplet> read_triplet_samples(std::istream& is);

struct DivergenceRow {
    std::string label;
    double kl = 0.0;
    double hellinger_sq = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

DivergenceRow divergence_row(std::string label, const Dist& p, const Dist& q);
void write_divergence_csv(std::ostream& os, const std::vector<DivergenceRow>& rows);

}  // namespace citest
