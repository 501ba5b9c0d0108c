#include "citest/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "citest/instances.hpp"

namespace citest {

namespace {

const char* const kMiKeys[] = {"c_mixed", "c_heavy", "c_total", "gamma_scale", "b_scale", "sample_scale",
                               "c_eq", "c_norm", "c_z", "c_l2"};
const char* const kCmiKeys[] = {"c_small", "c_large", "c_m", "learn_scale", "gamma_scale", "b_scale",
                                "small_threshold_scale", "sample_scale", "c_eq", "c_norm", "c_z", "c_l2"};
const char* const kEquivKeys[] = {"c_norm", "c_eq", "c_z", "c_l2", "sample_scale"};

template <std::size_t N>
bool known(const char* const (&keys)[N], const std::string& k) {
    for (const char* s : keys)
        if (k == s) return true;
    return false;
}

bool known_key(const std::string& tester, const std::string& k) {
    if (tester == "mi") return known(kMiKeys, k);
    if (tester == "cmi") return known(kCmiKeys, k);
    return known(kEquivKeys, k);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ParseError("bad number for " + key + ": " + v);
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const auto x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ParseError("bad integer for " + key + ": " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ParseError("bad boolean for " + key + ": " + v);
}

void apply(double& field, const ExperimentConfig& c, const char* key) {
    if (auto it = c.overrides.find(key); it != c.overrides.end()) field = it->second;
}

void apply_equiv(EquivConstants& e, const ExperimentConfig& c) {
    apply(e.c_norm, c, "c_norm");
    apply(e.c_eq, c, "c_eq");
    apply(e.c_z, c, "c_z");
    apply(e.c_l2, c, "c_l2");
}

Regime regime_of(const std::string& r) {
    if (r == "small") return Regime::Small;
    if (r == "large") return Regime::Large;
    return Regime::Both;
}

// P uniform over d; Q shifts alternate pairs by +-eps/sqrt(2 floor(d/2)) so that ||P-Q||_2 = eps.
std::pair<Dist, Dist> planted_l2_pair(std::size_t d, double eps, bool far) {
    auto p = Dist::uniform(d);
    if (!far) return {p, p};
    const std::size_t m = 2 * (d / 2);
    const double shift = eps / std::sqrt(static_cast<double>(m));
    if (shift > (1.0 + 1e-12) / static_cast<double>(d)) throw InfeasibleParameters("eps too large for a planted l2 pair");
    std::vector<double> q(p.probs());
    for (std::size_t i = 0; i < m; ++i) q[i] = std::max(0.0, q[i] + (i % 2 == 0 ? shift : -shift));
    return {p, Dist(std::move(q))};
}

double l2_norm(const Dist& d) {
    double s = 0.0;
    for (double x : d.probs()) s += x * x;
    return std::sqrt(s);
}

std::vector<Index> to_index(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

void validate(const ExperimentConfig& c) {
    if (c.tester != "mi" && c.tester != "cmi" && c.tester != "equiv-z" && c.tester != "equiv-l2")
        throw ParseError("unknown tester: " + c.tester);
    if (c.instance != "null" && c.instance != "far") throw ParseError("unknown instance: " + c.instance);
    if (c.regime != "small" && c.regime != "large" && c.regime != "both")
        throw ParseError("unknown regime: " + c.regime);
    if (c.trials < 1) throw ParseError("trials must be at least 1");
    if (c.d_a < 1 || c.d_b < 1 || c.d_c < 1) throw ParseError("dimensions must be at least 1");
    if (!(c.eps > 0.0 && c.eps < 1.0)) throw ParseError("eps must lie in (0,1)");
    if (!(c.spread >= 0.0 && c.spread < 1.0)) throw ParseError("spread must lie in [0,1)");
    for (const auto& [k, v] : c.overrides) {
        if (!known_key(c.tester, k)) throw ParseError("unknown constant for tester " + c.tester + ": " + k);
        if (!(v > 0.0) || !std::isfinite(v)) throw ParseError("constant must be positive: " + k);
    }
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "tester") c.tester = v;
    else if (key == "instance") c.instance = v;
    else if (key == "d_a") c.d_a = to_u64(key, v);
    else if (key == "d_b") c.d_b = to_u64(key, v);
    else if (key == "d_c") c.d_c = to_u64(key, v);
    else if (key == "eps") c.eps = to_double(key, v);
    else if (key == "trials") c.trials = static_cast<int>(to_u64(key, v));
    else if (key == "seed") c.seed = to_u64(key, v);
    else if (key == "regime") c.regime = v;
    else if (key == "paper_constants") c.paper_constants = to_bool(key, v);
    else if (key == "timing") c.timing = to_bool(key, v);
    else if (key == "threads") c.threads = static_cast<int>(to_u64(key, v));
    else if (key == "spread") c.spread = to_double(key, v);
    else if (key == "output") c.output = v;
    else if (key.rfind("const.", 0) == 0) c.overrides[key.substr(6)] = to_double(key, v);
    else throw ParseError("unknown config key: " + key);
}

ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig c;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("line " + std::to_string(n) + ": expected key = value");
        apply_setting(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    validate(c);
    return c;
}

MiConstants mi_constants(const ExperimentConfig& c) {
    MiConstants k = c.paper_constants ? MiConstants::paper() : MiConstants{};
    apply_equiv(k.equiv, c);
    apply(k.c_mixed, c, "c_mixed");
    apply(k.c_heavy, c, "c_heavy");
    apply(k.c_total, c, "c_total");
    apply(k.gamma_scale, c, "gamma_scale");
    apply(k.b_scale, c, "b_scale");
    apply(k.sample_scale, c, "sample_scale");
    return k;
}

CmiConstants cmi_constants(const ExperimentConfig& c) {
    CmiConstants k = c.paper_constants ? CmiConstants::paper() : CmiConstants{};
    apply_equiv(k.equiv, c);
    apply(k.c_small, c, "c_small");
    apply(k.c_large, c, "c_large");
    apply(k.c_m, c, "c_m");
    apply(k.learn_scale, c, "learn_scale");
    apply(k.gamma_scale, c, "gamma_scale");
    apply(k.b_scale, c, "b_scale");
    apply(k.small_threshold_scale, c, "small_threshold_scale");
    apply(k.sample_scale, c, "sample_scale");
    return k;
}

EquivConstants equiv_constants(const ExperimentConfig& c) {
    EquivConstants k = c.paper_constants ? EquivConstants::paper() : EquivConstants{};
    apply_equiv(k, c);
    double s = 1.0;
    apply(s, c, "sample_scale");
    k.c_norm *= s;
    k.c_eq *= s;
    k.c_z *= s;
    k.c_l2 *= s;
    return k;
}

std::string describe(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "tester=" << c.tester << "\n"
       << "instance=" << c.instance << "\n"
       << "d_a=" << c.d_a << "\nd_b=" << c.d_b << "\nd_c=" << c.d_c << "\n"
       << "eps=" << fmt(c.eps) << "\n"
       << "trials=" << c.trials << "\n"
       << "seed=" << c.seed << "\n"
       << "spread=" << fmt(c.spread) << "\n"
       << "paper_constants=" << (c.paper_constants ? 1 : 0) << "\n"
       << "timing=" << (c.timing ? 1 : 0) << "\n";
    auto eq = [&](const EquivConstants& e) {
        os << "const.c_norm=" << fmt(e.c_norm) << "\nconst.c_eq=" << fmt(e.c_eq) << "\nconst.c_z=" << fmt(e.c_z)
           << "\nconst.c_l2=" << fmt(e.c_l2) << "\n";
    };
    if (c.tester == "mi") {
        const auto k = mi_constants(c);
        eq(k.equiv);
        os << "const.c_mixed=" << fmt(k.c_mixed) << "\nconst.c_heavy=" << fmt(k.c_heavy)
           << "\nconst.c_total=" << fmt(k.c_total) << "\nconst.gamma_scale=" << fmt(k.gamma_scale)
           << "\nconst.b_scale=" << fmt(k.b_scale) << "\nconst.sample_scale=" << fmt(k.sample_scale) << "\n";
    } else if (c.tester == "cmi") {
        const auto k = cmi_constants(c);
        os << "regime=" << c.regime << "\n";
        eq(k.equiv);
        os << "const.c_small=" << fmt(k.c_small) << "\nconst.c_large=" << fmt(k.c_large)
           << "\nconst.c_m=" << fmt(k.c_m) << "\nconst.learn_scale=" << fmt(k.learn_scale)
           << "\nconst.gamma_scale=" << fmt(k.gamma_scale) << "\nconst.b_scale=" << fmt(k.b_scale)
           << "\nconst.small_threshold_scale=" << fmt(k.small_threshold_scale)
           << "\nconst.sample_scale=" << fmt(k.sample_scale) << "\n";
    } else {
        eq(equiv_constants(c));
    }
    return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : describe(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

TrialReport run_trial(const ExperimentConfig& c, std::size_t index) {
    TrialReport r;
    r.index = index;
    r.seed = derive_seed(c.seed, index);
    const bool far = c.instance == "far";
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(r.seed, 2));
    try {
        if (c.tester == "mi") {
            const auto k = mi_constants(c);
            const auto plan = mi_plan(c.d_a, c.d_c, c.eps, k);
            Rng inst(derive_seed(r.seed, 1));
            const Joint2 j = far ? planted_far_mi(c.d_a, c.d_c, c.eps, derive_seed(r.seed, 1)).joint
                                 : random_product(c.d_a, c.d_c, c.spread, inst);
            auto p = joint2_stream(j, rng, plan.budget_p);
            auto raw = joint2_stream(j, rng, 2 * plan.budget_q);
            ProductStream q(*raw);
            const auto v = mi_test(*p, q, c.d_a, c.d_c, c.eps, rng, k);
            r.verdict = v.outcome;
            r.statistic = v.statistic;
            r.samples_used = p->used() + raw->used();
            r.budget = plan.budget_p + 2 * plan.budget_q;
        } else if (c.tester == "cmi") {
            const auto k = cmi_constants(c);
            const Dims3 d{c.d_a, c.d_b, c.d_c};
            const auto plan = cmi_plan(d, c.eps, k);
            Rng inst(derive_seed(r.seed, 1));
            const Joint3 j = far ? planted_far_cmi(c.d_a, c.d_b, c.d_c, c.eps, derive_seed(r.seed, 1)).joint
                                 : random_markov(c.d_a, c.d_b, c.d_c, c.spread, inst);
            auto s = joint3_stream(j, rng, plan.budget);
            const auto v = cmi_test(*s, d, c.eps, rng, k, regime_of(c.regime));
            r.verdict = v.outcome;
            r.statistic = v.statistic;
            r.samples_used = s->used();
            r.budget = plan.budget;
            r.note = v.note;
        } else {
            const auto k = equiv_constants(c);
            const auto [p, q] = planted_l2_pair(c.d_a, c.eps, far);
            const double b = std::max(l2_norm(p), l2_norm(q));
            if (c.tester == "equiv-z") {
                const std::size_t n = equiv_test_z_required(b, c.eps, k);
                const auto sp = to_index(sample(p, n, rng));
                const auto sq = to_index(sample(q, n, rng));
                const auto z = equiv_test_z(sp, sq, c.d_a, b, c.eps, rng(), k);
                r.verdict = z.outcome == ZOutcome::No ? Outcome::No : Outcome::Yes;
                r.statistic = static_cast<double>(z.z);
                r.samples_used = r.budget = 2 * n;
            } else {
                const auto full = SubSupport::full(c.d_a);
                const double delta = 1.0 / 3.0;
                const std::size_t n = equiv_l2_required(b, c.eps, full, delta, k);
                const auto sp = to_index(sample(p, n, rng));
                const auto sq = to_index(sample(q, n, rng));
                const auto e = equiv_l2(sp, sq, full, b, c.eps, delta, rng, k);
                r.verdict = e.outcome == EquivOutcome::Far ? Outcome::No : Outcome::Yes;
                r.statistic = static_cast<double>(e.far_votes) / e.repetitions;
                r.samples_used = r.budget = 2 * n;
            }
        }
    } catch (const InsufficientSamples& e) {
        r.verdict = Outcome::Abort;
        r.note = std::string("budget exceeded: ") + e.what();
    }
    if (c.timing)
        r.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<TrialReport> run_trials(const ExperimentConfig& c) {
    validate(c);
    const auto n = static_cast<std::size_t>(c.trials);
    std::vector<TrialReport> out(n);
    unsigned workers = c.threads > 0 ? static_cast<unsigned>(c.threads) : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = run_trial(c, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

Interval wilson(std::size_t k, std::size_t n, double z) {
    if (n == 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

RateSummary summarize(const std::vector<TrialReport>& r) {
    RateSummary s;
    s.n = r.size();
    double total = 0.0;
    for (const auto& t : r) {
        if (t.verdict == Outcome::Yes) ++s.yes;
        else if (t.verdict == Outcome::No) ++s.no;
        else ++s.aborts;
        total += static_cast<double>(t.samples_used);
    }
    if (s.n > 0) {
        s.no_rate = static_cast<double>(s.no) / static_cast<double>(s.n);
        s.mean_samples = total / static_cast<double>(s.n);
    }
    s.no_ci = wilson(s.no, s.n);
    return s;
}

void write_report_header(std::ostream& os, const ExperimentConfig& c) {
    std::istringstream lines(describe(c));
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config_hash(c)));
    os << "# config_hash=" << hex << "\n";
    for (std::string l; std::getline(lines, l);) os << "# " << l << "\n";
}

void write_trials_csv(std::ostream& os, const ExperimentConfig& c, const std::vector<TrialReport>& r) {
    write_report_header(os, c);
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config_hash(c)));
    os << "config_hash,trial,seed,verdict,statistic,samples,budget,ms\n";
    for (const auto& t : r) {
        char ms[32];
        std::snprintf(ms, sizeof ms, "%.3f", t.ms);
        os << hex << "," << t.index << "," << t.seed << "," << to_string(t.verdict) << "," << fmt(t.statistic)
           << "," << t.samples_used << "," << t.budget << "," << ms << "\n";
    }
}

bool passes(const PowerPoint& p) {
    const double err_null = 1.0 - static_cast<double>(p.null_rates.yes) / static_cast<double>(p.null_rates.n);
    const double err_far = 1.0 - p.far_rates.no_rate;
    return err_null <= 1.0 / 3.0 && err_far <= 1.0 / 3.0;
}

namespace {

PowerPoint evaluate(const ExperimentConfig& base, std::size_t d_a, double scale) {
    PowerPoint p;
    p.d_a = d_a;
    p.scale = scale;
    ExperimentConfig c = base;
    c.d_a = d_a;
    double s = 1.0;
    if (auto it = base.overrides.find("sample_scale"); it != base.overrides.end()) s = it->second;
    c.overrides["sample_scale"] = s * scale;
    c.instance = "null";
    p.null_rates = summarize(run_trials(c));
    c.instance = "far";
    p.far_rates = summarize(run_trials(c));
    return p;
}

}  // namespace

PowerCurve power_curve(const ExperimentConfig& base, const std::vector<std::size_t>& d_values, int steps,
                       double scale_lo, double scale_hi) {
    if (!(scale_lo > 0.0 && scale_lo < scale_hi)) throw InvalidThreshold("need 0 < scale_lo < scale_hi");
    PowerCurve pc;
    for (auto d : d_values) {
        auto top = evaluate(base, d, scale_hi);
        pc.points.push_back(top);
        if (!passes(top)) continue;
        double lo = std::log(scale_lo), hi = std::log(scale_hi);
        PowerPoint best = top;
        for (int it = 0; it < steps; ++it) {
            const double mid = 0.5 * (lo + hi);
            auto p = evaluate(base, d, std::exp(mid));
            pc.points.push_back(p);
            if (passes(p)) {
                hi = mid;
                best = p;
            } else {
                lo = mid;
            }
        }
        pc.d_values.push_back(d);
        pc.scale_star.push_back(best.scale);
        pc.n_star.push_back(0.5 * (best.null_rates.mean_samples + best.far_rates.mean_samples));
    }
    std::vector<double> x(pc.d_values.begin(), pc.d_values.end());
    pc.slope = pc.n_star.size() >= 2 ? loglog_slope(x, pc.n_star) : std::nan("");
    return pc;
}

std::vector<PowerPoint> scale_sweep(const ExperimentConfig& base, const std::vector<double>& scales) {
    std::vector<PowerPoint> out;
    for (double s : scales) out.push_back(evaluate(base, base.d_a, s));
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidThreshold("slope fit needs two or more points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {

void write_point(std::ostream& os, const PowerPoint& p) {
    const auto& n = p.null_rates;
    const auto& f = p.far_rates;
    const auto yes_ci = wilson(n.yes, n.n);
    os << p.d_a << "," << fmt(p.scale) << "," << n.n << "," << fmt(static_cast<double>(n.yes) / n.n) << ","
       << fmt(yes_ci.lo) << "," << fmt(yes_ci.hi) << "," << f.n << "," << fmt(f.no_rate) << "," << fmt(f.no_ci.lo)
       << "," << fmt(f.no_ci.hi) << "," << fmt(n.mean_samples) << "," << fmt(f.mean_samples) << ","
       << (passes(p) ? 1 : 0) << "\n";
}

const char* const kPointHeader =
    "d_a,scale,null_trials,null_yes_rate,null_yes_lo,null_yes_hi,far_trials,far_no_rate,far_no_lo,far_no_hi,"
    "null_samples,far_samples,pass\n";

}  // namespace

void write_power_csv(std::ostream& os, const ExperimentConfig& base, const PowerCurve& pc) {
    write_report_header(os, base);
    os << kPointHeader;
    for (const auto& p : pc.points) write_point(os, p);
    os << "# d_a,scale_star,n_star\n";
    for (std::size_t i = 0; i < pc.n_star.size(); ++i)
        os << "# " << pc.d_values[i] << "," << fmt(pc.scale_star[i]) << "," << fmt(pc.n_star[i]) << "\n";
    os << "# slope=" << fmt(pc.slope) << "\n";
}

void write_sweep_csv(std::ostream& os, const ExperimentConfig& base, const std::vector<PowerPoint>& pts) {
    write_report_header(os, base);
    os << kPointHeader;
    for (const auto& p : pts) write_point(os, p);
}

}  // namespace citest
