#include "aoft/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace aoft {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::string shape_str(const Matrix &a) {
    return std::to_string(a.rows) + "x" + std::to_string(a.cols);
}

Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols != b.rows) {
        throw std::invalid_argument("matmul: dimension mismatch " + shape_str(a) +
                                    " * " + shape_str(b));
    }
    Matrix c(a.rows, b.cols);
    // i-k-j loop order, fixed: reproducible accumulation and decent locality.
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double *brow = &b.data[k * b.cols];
            double *crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix &a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix &a, const Matrix &b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw std::invalid_argument("add: shape mismatch " + shape_str(a) + " vs " +
                                    shape_str(b));
    }
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix scale(const Matrix &a, double c) {
    Matrix s = a;
    for (double &v : s.data) v *= c;
    return s;
}

Matrix gram(const Matrix &a) {
    Matrix g(a.cols, a.cols);
    for (std::size_t i = 0; i < a.cols; ++i) {
        for (std::size_t j = i; j < a.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.rows; ++k) s += a(k, i) * a(k, j);
            g(i, j) = s;
            g(j, i) = s;
        }
    }
    return g;
}

SpectralNormResult spectral_norm(const Matrix &a, double tol, std::size_t max_iter) {
    if (a.rows == 0 || a.cols == 0) {
        throw std::invalid_argument("spectral_norm: empty matrix");
    }
    if (tol <= 0.0) throw std::invalid_argument("spectral_norm: tol must be > 0");

    bool all_zero = true;
    for (double v : a.data) {
        if (v != 0.0) { all_zero = false; break; }
    }
    if (all_zero) return {0.0, true, 0};

    const std::size_t n = a.cols;
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> av(a.rows), w(n);

    double sigma = 0.0, prev = 0.0;
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        // w = a^T (a v)
        for (std::size_t i = 0; i < a.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a(i, j) * v[j];
            av[i] = s;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.rows; ++i) s += a(i, j) * av[i];
            w[j] = s;
        }
        double wn = norm2(w);
        if (wn == 0.0) return {0.0, true, iter};
        double lambda = dot(v, w);
        sigma = std::sqrt(std::max(lambda, 0.0));
        for (std::size_t j = 0; j < n; ++j) v[j] = w[j] / wn;
        if (iter > 1 && std::abs(sigma - prev) <= tol * std::max(sigma, 1e-300)) {
            return {sigma, true, iter};
        }
        prev = sigma;
    }
    return {sigma, false, max_iter};
}

double frobenius_norm(const Matrix &a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

std::vector<double> pairwise_column_angles(const Matrix &a) {
    if (a.cols < 2) {
        throw std::invalid_argument("pairwise_column_angles: need at least 2 columns");
    }
    std::vector<double> norms(a.cols, 0.0);
    for (std::size_t j = 0; j < a.cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows; ++i) s += a(i, j) * a(i, j);
        norms[j] = std::sqrt(s);
        if (norms[j] == 0.0) {
            throw std::invalid_argument("pairwise_column_angles: zero column at index " +
                                        std::to_string(j));
        }
    }
    constexpr double rad2deg = 180.0 / 3.14159265358979323846;
    std::vector<double> angles;
    angles.reserve(a.cols * (a.cols - 1) / 2);
    for (std::size_t i = 0; i < a.cols; ++i) {
        for (std::size_t j = i + 1; j < a.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.rows; ++k) s += a(k, i) * a(k, j);
            double c = s / (norms[i] * norms[j]);
            c = std::max(-1.0, std::min(1.0, c));
            angles.push_back(std::acos(c) * rad2deg);
        }
    }
    return angles;
}

double dot(const Vector &a, const Vector &b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vector &v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double max_abs_diff(const Matrix &a, const Matrix &b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

}  // namespace aoft
