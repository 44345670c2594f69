#include "aoft/aoft_core.hpp"

#include <cmath>
#include <stdexcept>

namespace aoft {

void check_pole(const GeneratorVector &g) {
    if (g.q.empty()) throw std::invalid_argument("generator vector is empty");
    if (1.0 + g.head() <= kPoleEps) {
        throw std::domain_error("generator pole: 1 + q0 = " +
                                std::to_string(1.0 + g.head()) +
                                " is inside the guard band");
    }
}

Matrix build_full(const GeneratorVector &g) {
    check_pole(g);
    const std::size_t n = g.n();
    const double s = 1.0 + g.head();
    Matrix q(n, n);
    for (std::size_t i = 0; i < n; ++i) q(i, 0) = g.q[i];
    for (std::size_t j = 1; j < n; ++j) q(0, j) = -g.q[j];
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 1; j < n; ++j) {
            q(i, j) = (i == j ? 1.0 : 0.0) - g.q[i] * g.q[j] / s;
        }
    }
    return q;
}

OrthoFactor build_ortho(const GeneratorVector &g, std::size_t d) {
    check_pole(g);
    const std::size_t n = g.n();
    if (d > n) {
        throw std::invalid_argument("build_ortho: d = " + std::to_string(d) +
                                    " exceeds N = " + std::to_string(n));
    }
    const double s = 1.0 + g.head();
    Matrix f(n, d);
    for (std::size_t i = 0; i < n && d > 0; ++i) f(i, 0) = g.q[i];
    for (std::size_t j = 1; j < d; ++j) {
        f(0, j) = -g.q[j];
        const double c = g.q[j] / s;
        for (std::size_t i = 1; i < n; ++i) {
            f(i, j) = (i == j ? 1.0 : 0.0) - g.q[i] * c;
        }
    }
    OrthoFactor out;
    out.factor = std::move(f);
    out.d = d;
    out.source_norm = norm2(g.q);
    out.deviation = d > 0
        ? max_abs_diff(gram(out.factor), Matrix::identity(d))
        : 0.0;
    return out;
}

Vector grad_q(const GeneratorVector &g, std::size_t d, const Matrix &upstream) {
    check_pole(g);
    const std::size_t n = g.n();
    if (d > n || upstream.rows != n || upstream.cols != d) {
        throw std::invalid_argument("grad_q: upstream shape " + shape_str(upstream) +
                                    " does not match N=" + std::to_string(n) +
                                    ", d=" + std::to_string(d));
    }
    Vector grad(n, 0.0);
    if (d == 0) return grad;
    const double s = 1.0 + g.head();

    // Column 0 of the factor is q itself.
    for (std::size_t k = 0; k < n; ++k) grad[k] = upstream(k, 0);

    // Row-0 entries -q_j for 1 <= j < d.
    for (std::size_t k = 1; k < d; ++k) grad[k] -= upstream(0, k);

    // Interior entries delta_ij - q_i q_j / (1+q0), i >= 1, 1 <= j < d.
    double head_acc = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 1; j < d; ++j) {
            head_acc += upstream(i, j) * g.q[i] * g.q[j];
        }
    }
    grad[0] += head_acc / (s * s);

    for (std::size_t k = 1; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t j = 1; j < d; ++j) acc += upstream(k, j) * g.q[j];
        grad[k] -= acc / s;
    }
    for (std::size_t k = 1; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t i = 1; i < n; ++i) acc += upstream(i, k) * g.q[i];
        grad[k] -= acc / s;
    }
    return grad;
}

double ortho_deviation(const GeneratorVector &g) {
    Matrix q = build_full(g);
    return max_abs_diff(gram(q), Matrix::identity(g.n()));
}

Matrix from_rotation(const RotationForm &r) {
    const std::size_t n = r.x.size() + 1;
    const double nrm = norm2(r.x);
    if (std::abs(nrm - 1.0) >= 1e-12) {
        throw std::invalid_argument("from_rotation: direction vector norm " +
                                    std::to_string(nrm) + " is not 1");
    }
    const double c = std::cos(r.phi), sn = std::sin(r.phi);
    Matrix q(n, n);
    q(0, 0) = c;
    for (std::size_t i = 1; i < n; ++i) {
        q(i, 0) = r.x[i - 1] * sn;
        q(0, i) = -r.x[i - 1] * sn;
        for (std::size_t j = 1; j < n; ++j) {
            q(i, j) = (i == j ? 1.0 : 0.0) + r.x[i - 1] * r.x[j - 1] * (c - 1.0);
        }
    }
    return q;
}

GeneratorVector normalize_strict(const GeneratorVector &g) {
    const double nrm = norm2(g.q);
    if (nrm == 0.0) throw std::invalid_argument("normalize_strict: zero vector");
    GeneratorVector out = g;
    for (double &v : out.q) v /= nrm;
    return out;
}

GeneratorVector init_generator(std::size_t n, std::mt19937_64 &rng, double noise_std) {
    std::normal_distribution<double> noise(0.0, noise_std);
    GeneratorVector g;
    g.q.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.q[i] = noise(rng);
    g.q[0] += 1.0;
    return g;
}

GeneratorVector random_unit_generator(std::size_t n, std::mt19937_64 &rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    GeneratorVector g;
    g.q.resize(n);
    for (;;) {
        for (std::size_t i = 0; i < n; ++i) g.q[i] = gauss(rng);
        const double nrm = norm2(g.q);
        if (nrm == 0.0) continue;
        for (double &v : g.q) v /= nrm;
        if (1.0 + g.q[0] > kPoleEps) return g;
    }
}

}  // namespace aoft
