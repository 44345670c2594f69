#include "aoft/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace aoft {

AngleHistogram angle_histogram(const Matrix &w, double bin_width,
                               const std::string &source) {
    if (bin_width <= 0.0) throw std::invalid_argument("angle_histogram: bin width must be > 0");
    std::vector<double> angles = pairwise_column_angles(w);

    AngleHistogram h;
    h.bin_width = bin_width;
    h.source = source;
    h.pairs = angles.size();
    const std::size_t nbins =
        static_cast<std::size_t>(std::ceil(180.0 / bin_width));
    h.counts.assign(nbins, 0);

    double sum = 0.0, sumsq = 0.0;
    for (double a : angles) {
        std::size_t bin = static_cast<std::size_t>(a / bin_width);
        if (bin >= nbins) bin = nbins - 1;  // a == 180 lands in the last bin
        ++h.counts[bin];
        sum += a;
        sumsq += a * a;
    }
    const double n = static_cast<double>(angles.size());
    h.mean = sum / n;
    const double var = std::max(0.0, sumsq / n - h.mean * h.mean);
    h.stddev = std::sqrt(var);
    return h;
}

NormRow norm_row(std::size_t layer, const std::string &name, const Matrix &m) {
    NormRow r;
    r.layer = layer;
    r.name = name;
    r.spectral = spectral_norm(m).value;
    r.frobenius = frobenius_norm(m);
    return r;
}

RademacherEstimate rademacher_estimate(const std::vector<Vector> &x_samples,
                                       double gamma, std::size_t trials,
                                       std::uint64_t seed) {
    if (x_samples.empty()) throw std::invalid_argument("rademacher_estimate: no samples");
    if (gamma < 0.0) throw std::invalid_argument("rademacher_estimate: gamma must be >= 0");
    if (trials == 0) throw std::invalid_argument("rademacher_estimate: trials must be >= 1");
    const std::size_t m = x_samples.size();
    const std::size_t dim = x_samples[0].size();
    for (const auto &x : x_samples)
        if (x.size() != dim)
            throw std::invalid_argument("rademacher_estimate: mixed sample lengths");

    double sum = 0.0, sumsq = 0.0;
    Vector acc(dim);
    for (std::size_t t = 0; t < trials; ++t) {
        // Per-trial generator split off the root seed so trials are
        // order-independent and parallel-safe.
        std::mt19937_64 rng(seed * 0x2545f4914f6cdd1dull + t + 1);
        std::bernoulli_distribution coin(0.5);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double xi = coin(rng) ? 1.0 : -1.0;
            for (std::size_t j = 0; j < dim; ++j) acc[j] += xi * x_samples[i][j];
        }
        const double v = gamma / static_cast<double>(m) * norm2(acc);
        sum += v;
        sumsq += v * v;
    }
    RademacherEstimate e;
    e.m = m;
    e.gamma = gamma;
    e.trials = trials;
    e.estimate = sum / static_cast<double>(trials);
    if (trials > 1) {
        const double var = std::max(
            0.0, (sumsq - sum * sum / static_cast<double>(trials)) /
                     static_cast<double>(trials - 1));
        e.std_error = std::sqrt(var / static_cast<double>(trials));
    }
    return e;
}

double rademacher_exhaustive(const std::vector<Vector> &x_samples, double gamma) {
    if (x_samples.empty()) throw std::invalid_argument("rademacher_exhaustive: no samples");
    const std::size_t m = x_samples.size();
    if (m > 20) throw std::invalid_argument("rademacher_exhaustive: m too large");
    const std::size_t dim = x_samples[0].size();
    double total = 0.0;
    Vector acc(dim);
    for (std::size_t pattern = 0; pattern < (1ull << m); ++pattern) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double xi = (pattern >> i) & 1 ? 1.0 : -1.0;
            for (std::size_t j = 0; j < dim; ++j) acc[j] += xi * x_samples[i][j];
        }
        total += gamma / static_cast<double>(m) * norm2(acc);
    }
    return total / static_cast<double>(1ull << m);
}

RunDiff compare_runs(const NormReport &a, const NormReport &b) {
    if (a.rows.empty() || b.rows.empty())
        throw std::invalid_argument("compare_runs: empty report");
    if (a.rows.size() != b.rows.size())
        throw std::invalid_argument("compare_runs: row count mismatch (" +
                                    std::to_string(a.rows.size()) + " vs " +
                                    std::to_string(b.rows.size()) + ")");
    RunDiff diff;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const NormRow &ra = a.rows[i];
        const NormRow &rb = b.rows[i];
        if (ra.layer != rb.layer || ra.name != rb.name)
            throw std::invalid_argument("compare_runs: schema mismatch at row " +
                                        std::to_string(i) + " ('" + ra.name +
                                        "' vs '" + rb.name + "')");
        RunDiffRow row;
        row.layer = ra.layer;
        row.name = ra.name;
        row.spectral_delta = rb.spectral - ra.spectral;
        row.frobenius_delta = rb.frobenius - ra.frobenius;
        if (rb.spectral <= ra.spectral) ++diff.b_spectral_leq;
        diff.rows.push_back(std::move(row));
    }
    diff.verdict = "second-report spectral norms <= first in " +
                   std::to_string(diff.b_spectral_leq) + "/" +
                   std::to_string(diff.rows.size()) + " rows";
    return diff;
}

// --- emitters --------------------------------------------------------------

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_histogram_csv(const std::string &path, const AngleHistogram &h) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "bin_start,bin_end,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double lo = static_cast<double>(i) * h.bin_width;
        const double hi = std::min(180.0, lo + h.bin_width);
        f << fmt17(lo) << "," << fmt17(hi) << "," << h.counts[i] << "\n";
    }
}

void write_norm_report_csv(const std::string &path, const NormReport &r) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "layer,name,spectral,frobenius\n";
    for (const auto &row : r.rows) {
        f << row.layer << "," << row.name << "," << fmt17(row.spectral) << ","
          << fmt17(row.frobenius) << "\n";
    }
}

NormReport read_norm_report_csv(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "layer,name,spectral,frobenius")
        throw std::runtime_error("bad norm report header in " + path);
    NormReport r;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string layer, name, spec, frob;
        if (!std::getline(ss, layer, ',') || !std::getline(ss, name, ',') ||
            !std::getline(ss, spec, ',') || !std::getline(ss, frob))
            throw std::runtime_error("bad norm report row in " + path);
        NormRow row;
        row.layer = std::stoul(layer);
        row.name = name;
        row.spectral = std::stod(spec);
        row.frobenius = std::stod(frob);
        r.rows.push_back(std::move(row));
    }
    return r;
}

void write_rademacher_json(const std::string &path, const RademacherEstimate &e) {
    nlohmann::json j;
    j["m"] = e.m;
    j["gamma"] = e.gamma;
    j["trials"] = e.trials;
    j["estimate"] = e.estimate;
    j["std_error"] = e.std_error;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << "\n";
}

}  // namespace aoft
