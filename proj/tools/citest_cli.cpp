#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "citest/cmitester.hpp"
#include "citest/harness.hpp"
#include "citest/lemmas.hpp"
#include "citest/mitester.hpp"
#include "citest/reduction.hpp"
#include "citest/tensor_io.hpp"

using namespace citest;

namespace {

constexpr int kUsage = 64;
constexpr int kBadParam = 65;
constexpr int kRuntime = 70;

int exit_code(Outcome o) {
    switch (o) {
        case Outcome::Yes: return 0;
        case Outcome::No: return 1;
        case Outcome::Abort: return 2;
    }
    return kRuntime;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path);
    return f;
}

// Writes to `path`, or stdout when empty.
template <class F>
void emit(const std::string& path, F&& body) {
    if (path.empty()) {
        body(std::cout);
        return;
    }
    std::ofstream f(path);
    if (!f) throw ParseError("cannot write " + path);
    body(f);
}

void apply_consts(ExperimentConfig& c, const std::vector<std::string>& kv) {
    for (const auto& s : kv) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value: " + s);
        c.overrides[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
    }
}

void print_verdict(const Verdict& v) {
    std::printf("verdict=%s samples=%zu statistic=%.6g threshold=%.6g", to_string(v.outcome), v.samples_used,
                v.statistic, v.threshold);
    if (!v.note.empty()) std::printf(" note=\"%s\"", v.note.c_str());
    std::printf("\n");
    for (const auto& c : v.categories)
        std::printf("category i=%d j=%d k=%d kind=%s size=%zu gamma=%.6g b=%.6g samples=%zu far_votes=%d/%d%s%s\n", c.i,
                    c.j, c.k, c.kind.c_str(), c.size, c.gamma, c.b, c.samples, c.far_votes, c.repetitions,
                    c.note.empty() ? "" : " note=", c.note.c_str());
}

std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ',');) out.push_back(std::stoull(t));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"citest: independence and conditional independence testing in squared Hellinger distance"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    double eps = 0.4;
    bool paper = false;
    std::vector<std::string> consts;
    std::string samples_path, tensor_path, out_path;
    std::size_t d_a = 0, d_b = 0, d_c = 0;

    auto common = [&](CLI::App* s) {
        s->add_option("--seed", seed, "master seed");
        s->add_option("--eps", eps, "distance parameter in (0,1)");
        s->add_flag("--paper-constants", paper, "use the unscaled theoretical constants");
        s->add_option("--const", consts, "constant override key=value")->take_all();
    };

    auto* mi = app.add_subcommand("mi-test", "test independence of A and C from pair samples");
    common(mi);
    mi->add_option("--samples", samples_path, "file with one `a c` pair per line")->required();
    mi->add_option("--d-a", d_a, "size of A (default: largest index + 1)");
    mi->add_option("--d-c", d_c, "size of C (default: largest index + 1)");

    std::string regime = "both";
    auto* cmi = app.add_subcommand("cmi-test", "test conditional independence of A and C given B");
    common(cmi);
    cmi->add_option("--samples", samples_path, "file with one `a b c` triplet per line")->required();
    cmi->add_option("--d-a", d_a);
    cmi->add_option("--d-b", d_b);
    cmi->add_option("--d-c", d_c);
    cmi->add_option("--regime", regime)->check(CLI::IsMember({"small", "large", "both"}));

    std::string p_path, q_path;
    double b_bound = 0.0;
    std::size_t host = 0;
    auto* eq = app.add_subcommand("equiv-test", "l2 closeness Z-test between two index sample files");
    common(eq);
    eq->add_option("--p", p_path, "samples of P, one index per line")->required();
    eq->add_option("--q", q_path, "samples of Q, one index per line")->required();
    eq->add_option("--host", host, "support size")->required();
    eq->add_option("--b", b_bound, "bound on max(||P||_2, ||Q||_2)")->required();

    std::string kind = "samples";
    std::size_t n = 1000;
    double eta = 0.0;
    auto* sim = app.add_subcommand("simulate", "draw samples or simulator outputs from a stored tensor");
    sim->add_option("--seed", seed);
    sim->add_option("--tensor", tensor_path, "distribution tensor file")->required();
    sim->add_option("--kind", kind)->check(CLI::IsMember({"samples", "product", "sim-abc", "sim-abc-ci", "ci-large", "mix"}));
    sim->add_option("--n", n, "number of input draws");
    sim->add_option("--eta", eta, "mixing weight for --kind mix");
    sim->add_option("--out", out_path);

    auto* lem = app.add_subcommand("verify-lemmas", "check the supporting inequalities numerically");
    lem->add_option("--seed", seed);
    lem->add_option("--out", out_path);

    std::string config_path, d_sweep;
    std::vector<std::string> sets;
    std::vector<double> scales;
    int steps = 6;
    double scale_lo = 1e-3, scale_hi = 1.0;
    bool timing = false;
    auto* pc = app.add_subcommand("power-curve", "run seeded trials, scale sweeps or d_A bisection sweeps");
    pc->add_option("--config", config_path, "flat key = value configuration file");
    pc->add_option("--set", sets, "configuration override key=value")->take_all();
    pc->add_option("--sweep-d", d_sweep, "comma-separated d_A values to bisect over");
    pc->add_option("--scales", scales, "sample_scale values for a fixed configuration")->delimiter(',');
    pc->add_option("--steps", steps, "bisection steps per d_A");
    pc->add_option("--scale-lo", scale_lo);
    pc->add_option("--scale-hi", scale_hi);
    pc->add_flag("--timing", timing, "record wall time per trial (breaks byte determinism)");
    pc->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        ExperimentConfig cfg;
        cfg.seed = seed;
        cfg.eps = eps;
        cfg.paper_constants = paper;
        apply_consts(cfg, consts);

        if (mi->parsed()) {
            auto f = open_in(samples_path);
            auto s = read_pair_samples(f);
            for (const auto& x : s) {
                d_a = std::max<std::size_t>(d_a, x.a + 1);
                d_c = std::max<std::size_t>(d_c, x.c + 1);
            }
            cfg.tester = "mi";
            validate(cfg);
            Rng rng(seed);
            PoolStream<Pair> pool(std::move(s), rng);
            ProductStream q(pool);
            const auto v = mi_test(pool, q, d_a, d_c, eps, rng, mi_constants(cfg));
            print_verdict(v);
            return exit_code(v.outcome);
        }
        if (cmi->parsed()) {
            auto f = open_in(samples_path);
            auto s = read_triplet_samples(f);
            for (const auto& x : s) {
                d_a = std::max<std::size_t>(d_a, x.a + 1);
                d_b = std::max<std::size_t>(d_b, x.b + 1);
                d_c = std::max<std::size_t>(d_c, x.c + 1);
            }
            cfg.tester = "cmi";
            cfg.regime = regime;
            validate(cfg);
            const auto r = regime == "small" ? Regime::Small : regime == "large" ? Regime::Large : Regime::Both;
            const auto v = cmi_test(s, Dims3{d_a, d_b, d_c}, eps, seed, cmi_constants(cfg), r);
            print_verdict(v);
            return exit_code(v.outcome);
        }
        if (eq->parsed()) {
            auto read = [](const std::string& path) {
                auto f = open_in(path);
                std::vector<Index> v;
                for (Index x; f >> x;) v.push_back(x);
                if (!f.eof()) throw ParseError("malformed index sample file " + path);
                return v;
            };
            cfg.tester = "equiv-z";
            validate(cfg);
            const auto z = equiv_test_z(read(p_path), read(q_path), host, b_bound, eps, seed, equiv_constants(cfg));
            std::printf("verdict=%s z=%lld threshold=%.6g n=%.6g%s\n", z.outcome == ZOutcome::No ? "no" : "yes",
                        static_cast<long long>(z.z), z.threshold, z.n, z.truncated ? " truncated=1" : "");
            return z.outcome == ZOutcome::No ? 1 : 0;
        }
        if (sim->parsed()) {
            const auto t = load_tensor(tensor_path);
            Rng rng(seed);
            int rc = 0;
            emit(out_path, [&](std::ostream& os) {
                if (const auto* j2 = std::get_if<Joint2>(&t)) {
                    if (kind == "samples") write_samples(os, sample_pairs(*j2, n, rng));
                    else if (kind == "product") write_samples(os, simulate_product_samples(sample_pairs(*j2, n - n % 2, rng)));
                    else throw ParseError("--kind " + kind + " needs a three-axis tensor");
                    return;
                }
                const auto& j3 = std::get<Joint3>(t);
                const Dims3 d{j3.d_a(), j3.d_b(), j3.d_c()};
                const auto s = sample_triplets(j3, n, rng);
                const BSet all(d.b, true);
                auto counts = [&](const CountTensor& c) {
                    os << "dims: " << d.a << " " << d.b << " " << d.c << "\n";
                    for (std::size_t i = 0; i < d.volume(); ++i) os << c.get(i) << (i + 1 == d.volume() ? "\n" : " ");
                };
                if (kind == "samples") write_samples(os, s);
                else if (kind == "sim-abc") counts(sim_abc(s, d, all, rng));
                else if (kind == "sim-abc-ci") counts(sim_abc_ci(s, d, all, rng));
                else if (kind == "ci-large") {
                    auto out = sim_abc_ci_large(s, all, rng);
                    if (out.aborted) {
                        std::cerr << "abort: empty queue\n";
                        rc = 2;
                    } else {
                        write_samples(os, out.samples);
                    }
                } else if (kind == "mix") {
                    std::vector<Triplet> m;
                    m.reserve(s.size());
                    for (const auto& x : s) m.push_back(mix_sample(x, eta, d.a, d.c, rng));
                    write_samples(os, m);
                } else {
                    throw ParseError("--kind product needs a two-axis tensor");
                }
            });
            return rc;
        }
        if (lem->parsed()) {
            const auto r = verify_lemmas(seed);
            emit(out_path, [&](std::ostream& os) { write_lemma_report(os, r); });
            return r.all_pass() ? 0 : 1;
        }
        if (pc->parsed()) {
            ExperimentConfig c;
            if (!config_path.empty()) {
                auto f = open_in(config_path);
                c = parse_config(f);
            }
            for (const auto& s : sets) {
                const auto e = s.find('=');
                if (e == std::string::npos) throw ParseError("expected key=value: " + s);
                apply_setting(c, s.substr(0, e), s.substr(e + 1));
            }
            if (timing) c.timing = true;
            validate(c);
            if (!d_sweep.empty()) {
                const auto curve = power_curve(c, parse_list(d_sweep), steps, scale_lo, scale_hi);
                emit(out_path.empty() ? c.output : out_path, [&](std::ostream& os) { write_power_csv(os, c, curve); });
                return 0;
            }
            if (!scales.empty()) {
                const auto pts = scale_sweep(c, scales);
                emit(out_path.empty() ? c.output : out_path, [&](std::ostream& os) { write_sweep_csv(os, c, pts); });
                return 0;
            }
            const auto reports = run_trials(c);
            emit(out_path.empty() ? c.output : out_path,
                 [&](std::ostream& os) { write_trials_csv(os, c, reports); });
            const auto s = summarize(reports);
            std::fprintf(stderr, "trials=%zu yes=%zu no=%zu abort=%zu no_rate=%.4f ci=[%.4f,%.4f]\n", s.n, s.yes, s.no,
                         s.aborts, s.no_rate, s.no_ci.lo, s.no_ci.hi);
            return 0;
        }
    } catch (const ParseError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kUsage;
    } catch (const InvalidThreshold& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kBadParam;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kRuntime;
}
