#pragma once

#include <cstdint>
#include <random>

#include "aoft/linalg.hpp"

namespace aoft {

// Guard on the 1/(1+q0) denominators; q0 = -1 is the singular configuration.
inline constexpr double kPoleEps = 1e-6;

// The single learnable vector q = (q0, ..., q_{N-1}) that parameterizes an
// entire N x N generated matrix. q0 is the distinguished head entry.
struct GeneratorVector {
    Vector q;

    std::size_t n() const { return q.size(); }
    double head() const { return q[0]; }
};

// First d columns of the generated matrix, plus bookkeeping from build time.
struct OrthoFactor {
    Matrix factor;       // N x d
    std::size_t d = 0;
    double source_norm = 0.0;  // ||q||_2 at build time
    double deviation = 0.0;    // max-abs of gram(factor) - I_d
};

// Rotation-angle form of the same construction: cos(phi) head entry, unit
// direction x of length N-1. Used as an independent construction route.
struct RotationForm {
    double phi = 0.0;
    Vector x;  // length N-1, ||x|| = 1
};

void check_pole(const GeneratorVector &g);

// Full N x N generated matrix: column 0 = q, row 0 = (q0, -q1, ..., -q_{N-1}),
// interior (i,j >= 1) = delta_ij - q_i q_j / (1 + q0).
Matrix build_full(const GeneratorVector &g);

// First d columns, built as a slab without materializing the full matrix.
OrthoFactor build_ortho(const GeneratorVector &g, std::size_t d);

// Exact gradient of <upstream, build_ortho(g, d).factor> with respect to q.
Vector grad_q(const GeneratorVector &g, std::size_t d, const Matrix &upstream);

// Max-abs entry of gram(build_full(g)) - I. Zero iff ||q|| = 1.
double ortho_deviation(const GeneratorVector &g);

// Literal rotation-form matrix; equals build_full under q0 = cos(phi),
// q_i = x_i sin(phi).
Matrix from_rotation(const RotationForm &r);

GeneratorVector normalize_strict(const GeneratorVector &g);

// Training init: e0 plus N(0, 0.02^2) noise, not normalized.
GeneratorVector init_generator(std::size_t n, std::mt19937_64 &rng,
                               double noise_std = 0.02);

// Random unit-norm generator with q0 > -1 + kPoleEps; test/diagnostic helper.
GeneratorVector random_unit_generator(std::size_t n, std::mt19937_64 &rng);

}  // namespace aoft
