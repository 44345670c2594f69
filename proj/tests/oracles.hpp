#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: naive triple-loop products, a one-sided Jacobi SVD, and central
// finite differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "aoft/linalg.hpp"

namespace oracle {

inline aoft::Matrix naive_matmul(const aoft::Matrix &a, const aoft::Matrix &b) {
    aoft::Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline aoft::Matrix pairwise_dot_gram(const aoft::Matrix &a) {
    aoft::Matrix g(a.cols, a.cols);
    for (std::size_t i = 0; i < a.cols; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.rows; ++k) s += a(k, i) * a(k, j);
            g(i, j) = s;
        }
    return g;
}

// Singular values by brute-force one-sided Jacobi, descending.
inline std::vector<double> jacobi_singular_values(const aoft::Matrix &input) {
    aoft::Matrix a = input.rows >= input.cols ? input : aoft::transpose(input);
    const std::size_t m = a.rows, n = a.cols;
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    alpha += a(k, p) * a(k, p);
                    beta += a(k, q) * a(k, q);
                    gamma += a(k, p) * a(k, q);
                }
                off = std::max(off, std::abs(gamma));
                if (std::abs(gamma) < 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0)
                    continue;
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = (zeta >= 0 ? 1.0 : -1.0) /
                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                for (std::size_t k = 0; k < m; ++k) {
                    double ap = a(k, p), aq = a(k, q);
                    a(k, p) = c * ap - s * aq;
                    a(k, q) = s * ap + c * aq;
                }
            }
        if (off < 1e-15) break;
    }
    std::vector<double> sv(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += a(k, j) * a(k, j);
        sv[j] = std::sqrt(s);
    }
    std::sort(sv.rbegin(), sv.rend());
    return sv;
}

inline std::size_t numerical_rank(const aoft::Matrix &a, double tol = 1e-9) {
    auto sv = jacobi_singular_values(a);
    std::size_t r = 0;
    for (double s : sv)
        if (s > tol * (sv.empty() ? 1.0 : sv.front())) ++r;
    return r;
}

// Central finite-difference gradient of a scalar function of a vector.
inline aoft::Vector central_fd(const std::function<double(const aoft::Vector &)> &f,
                               const aoft::Vector &x, double h = 1e-6) {
    aoft::Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        aoft::Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

inline double max_rel_err(const aoft::Vector &got, const aoft::Vector &want,
                          double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        double denom = std::max(std::abs(want[i]), floor);
        worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
    }
    return worst;
}

}  // namespace oracle
