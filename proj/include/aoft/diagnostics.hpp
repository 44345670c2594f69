#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aoft/linalg.hpp"

namespace aoft {

struct AngleHistogram {
    double bin_width = 1.0;           // degrees, bins cover [0, 180]
    std::vector<std::size_t> counts;  // ceil(180 / bin_width) bins
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t pairs = 0;
    std::string source;

    std::size_t bins() const { return counts.size(); }
};

AngleHistogram angle_histogram(const Matrix &w, double bin_width = 1.0,
                               const std::string &source = "");

struct NormRow {
    std::size_t layer = 0;
    std::string name;
    double spectral = 0.0;
    double frobenius = 0.0;
};

struct NormReport {
    std::vector<NormRow> rows;
};

NormRow norm_row(std::size_t layer, const std::string &name, const Matrix &m);

struct RademacherEstimate {
    std::size_t m = 0;
    double gamma = 0.0;
    std::size_t trials = 0;
    double estimate = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo estimate of (gamma/m) E_xi ||sum_i xi_i x_i|| over Rademacher
// sign vectors xi. The sup over ||W|| <= gamma is taken in closed form.
RademacherEstimate rademacher_estimate(const std::vector<Vector> &x_samples,
                                       double gamma, std::size_t trials,
                                       std::uint64_t seed);

// Exhaustive version over all 2^m sign patterns; oracle-sized m only.
double rademacher_exhaustive(const std::vector<Vector> &x_samples, double gamma);

struct RunDiffRow {
    std::size_t layer = 0;
    std::string name;
    double spectral_delta = 0.0;   // b - a
    double frobenius_delta = 0.0;
};

struct RunDiff {
    std::vector<RunDiffRow> rows;
    std::size_t b_spectral_leq = 0;  // rows where b.spectral <= a.spectral
    std::string verdict;
};

// Row-by-row comparison of two norm reports with the same layer/name schema.
RunDiff compare_runs(const NormReport &a, const NormReport &b);

void write_histogram_csv(const std::string &path, const AngleHistogram &h);
void write_norm_report_csv(const std::string &path, const NormReport &r);
NormReport read_norm_report_csv(const std::string &path);
void write_rademacher_json(const std::string &path, const RademacherEstimate &e);

}  // namespace aoft
