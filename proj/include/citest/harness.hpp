#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "citest/cmitester.hpp"
#include "citest/mitester.hpp"
#include "citest/verdict.hpp"

namespace citest {

struct ExperimentConfig {
    std::string tester = "mi";      // mi, cmi, equiv-z, equiv-l2
    std::string instance = "null";  // null, far
    std::size_t d_a = 16, d_b = 1, d_c = 16;
    double eps = 0.4;
    int trials = 100;
    std::uint64_t seed = 1;
    std::string regime = "both";  // cmi only: small, large, both
    bool paper_constants = false;
    bool timing = false;
    int threads = 0;  // 0: hardware concurrency
    double spread = 0.5;  // marginal spread of null instances
    std::map<std::string, double> overrides;
    std::string output;
};

void validate(const ExperimentConfig& c);
// `key = value` lines; blank lines and `#` comments are skipped.
ExperimentConfig parse_config(std::istream& is);
void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value);
// Canonical text with every resolved constant, one `key=value` per line.
std::string describe(const ExperimentConfig& c);
std::uint64_t config_hash(const ExperimentConfig& c);

MiConstants mi_constants(const ExperimentConfig& c);
CmiConstants cmi_constants(const ExperimentConfig& c);
EquivConstants equiv_constants(const ExperimentConfig& c);

struct TrialReport {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    Outcome verdict = Outcome::Yes;
    double statistic = 0.0;
    std::size_t samples_used = 0;  // raw draws from P
    std::size_t budget = 0;
    double ms = 0.0;
    std::string note;
};

TrialReport run_trial(const ExperimentConfig& c, std::size_t index);
std::vector<TrialReport> run_trials(const ExperimentConfig& c);

struct Interval {
    double lo = 0.0, hi = 1.0;
};

Interval wilson(std::size_t k, std::size_t n, double z = 1.959963984540054);

struct RateSummary {
    std::size_t n = 0, yes = 0, no = 0, aborts = 0;
    double no_rate = 0.0;
    Interval no_ci;
    double mean_samples = 0.0;
};

RateSummary summarize(const std::vector<TrialReport>& r);

void write_report_header(std::ostream& os, const ExperimentConfig& c);
void write_trials_csv(std::ostream& os, const ExperimentConfig& c, const std::vector<TrialReport>& r);

struct PowerPoint {
    std::size_t d_a = 0;
    double scale = 0.0;
    RateSummary null_rates, far_rates;
};

struct PowerCurve {
    std::vector<PowerPoint> points;  // every evaluated (d_a, scale)
    std::vector<std::size_t> d_values;
    std::vector<double> n_star;      // mean raw draws at the smallest passing scale
    std::vector<double> scale_star;
    double slope = 0.0;
};

bool passes(const PowerPoint& p);
// Bisects sample_scale on a log grid for each d_A; the fit is least squares of ln N* on ln d_A.
PowerCurve power_curve(const ExperimentConfig& base, const std::vector<std::size_t>& d_values, int steps,
                       double scale_lo, double scale_hi);
// Rates at each sample_scale for a fixed configuration.
std::vector<PowerPoint> scale_sweep(const ExperimentConfig& base, const std::vector<double>& scales);
void write_power_csv(std::ostream& os, const ExperimentConfig& base, const PowerCurve& pc);
void write_sweep_csv(std::ostream& os, const ExperimentConfig& base, const std::vector<PowerPoint>& pts);

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace citest
