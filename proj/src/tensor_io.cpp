#include "citest/tensor_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace citest {

namespace {

void write_entries(std::ostream& os, const std::vector<double>& p, std::size_t row) {
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < p.size(); ++i) {
        os << p[i];
        os << (((i + 1) % row == 0) ? '\n' : ' ');
    }
}

}  // namespace

void write_tensor(std::ostream& os, const Joint2& j) {
    os << "dims: " << j.d_a() << ' ' << j.d_c() << '\n';
    write_entries(os, j.probs(), j.d_c());
}

void write_tensor(std::ostream& os, const Joint3& j) {
    os << "dims: " << j.d_a() << ' ' << j.d_b() << ' ' << j.d_c() << '\n';
    write_entries(os, j.probs(), j.d_c());
}

AnyJoint read_tensor(std::istream& is) {
    std::string line;
    while (std::getline(is, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
    }
    const std::string tag = "dims:";
    if (line.rfind(tag, 0) != 0) throw ParseError("missing `dims:` header");
    std::istringstream hs(line.substr(tag.size()));
    std::vector<std::size_t> dims;
    for (std::size_t d; hs >> d;) dims.push_back(d);
    if (dims.size() != 2 && dims.size() != 3) throw ParseError("expected 2 or 3 dimensions");
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    std::vector<double> p;
    p.reserve(n);
    for (double v; p.size() < n && is >> v;) p.push_back(v);
    if (p.size() != n) throw ParseError("tensor has fewer entries than its header declares");
    if (dims.size() == 2) return Joint2(dims[0], dims[1], std::move(p));
    return Joint3(dims[0], dims[1], dims[2], std::move(p));
}

AnyJoint load_tensor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    return read_tensor(in);
}

void write_samples(std::ostream& os, const std::vector<Pair>& s) {
    for (const auto& x : s) os << x.a << ' ' << x.c << '\n';
}

void write_samples(std::ostream& os, const std::vector<Triplet>& s) {
    for (const auto& x : s) os << x.a << ' ' << x.b << ' ' << x.c << '\n';
}

std::vector<Pair> read_pair_samples(std::istream& is) {
    std::vector<Pair> out;
    for (std::uint32_t a, c; is >> a >> c;) out.push_back({a, c});
    if (!is.eof()) throw ParseError("malformed pair sample file");
    return out;
}

std::vector<Triplet> read_triplet_samples(std::istream& is) {
    std::vector<Triplet> out;
    for (std::uint32_t a, b, c; is >> a >> b >> c;) out.push_back({a, b, c});
    if (!is.eof()) throw ParseError("malformed triplet sample file");
    return out;
}

DivergenceRow divergence_row(std::string label, const Dist& p, const Dist& q) {
    DivergenceRow r;
    r.label = std::move(label);
    try {
        r.kl = kl(p, q);
    } catch (const SupportViolation&) {
        r.kl = std::numeric_limits<double>::infinity();
    }
    r.hellinger_sq = hellinger_sq(p, q);
    r.l1 = lp_dist(p, q, 1);
    r.l2 = lp_dist(p, q, 2);
    return r;
}

void write_divergence_csv(std::ostream& os, const std::vector<DivergenceRow>& rows) {
    os << "label,kl,hellinger_sq,l1,l2\n";
    os << std::setprecision(12);
    for (const auto& r : rows)
        os << r.label << ',' << r.kl << ',' << r.hellinger_sq << ',' << r.l1 << ',' << r.l2 << '\n';
}

}  // namespace citest
