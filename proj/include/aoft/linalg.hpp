#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace aoft {

// Dense row-major fp64 matrix. Values are immutable by convention once
// handed to an operation; all free functions below are pure.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double &operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }

    static Matrix identity(std::size_t n);
};

using Vector = std::vector<double>;

struct SpectralNormResult {
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

// Fixed-loop-order product; deterministic accumulation.
Matrix matmul(const Matrix &a, const Matrix &b);

Matrix transpose(const Matrix &a);

Matrix add(const Matrix &a, const Matrix &b);

Matrix scale(const Matrix &a, double c);

// a^T a, symmetrized by averaging so the result is bitwise symmetric.
Matrix gram(const Matrix &a);

// Largest singular value via power iteration on a^T a with a deterministic
// all-ones start vector. Zero matrix returns 0 exactly.
SpectralNormResult spectral_norm(const Matrix &a, double tol = 1e-12,
                                 std::size_t max_iter = 10000);

double frobenius_norm(const Matrix &a);

// Angles (degrees, in [0,180]) between all unordered column pairs (i<j),
// cosine clamped to [-1,1] before arccos. Throws on zero columns.
std::vector<double> pairwise_column_angles(const Matrix &a);

double dot(const Vector &a, const Vector &b);
double norm2(const Vector &v);

// Matrix-max norms used by the orthogonality checks.
double max_abs_diff(const Matrix &a, const Matrix &b);

std::string shape_str(const Matrix &a);

}  // namespace aoft
