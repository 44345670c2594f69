#include <random>

#include "aoft/aoft_core.hpp"
#include "aoft/peft.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace aoft;

namespace {

AdaptedLayer make_layer(std::size_t n, std::size_t d, std::uint64_t seed,
                        Scheme scheme = Scheme::LoraAoft) {
    std::mt19937_64 rng(seed);
    AdaptedLayer l;
    l.scheme = scheme;
    l.base = Matrix::identity(n);
    l.q_down = random_unit_generator(n, rng);
    l.q_up = random_unit_generator(n, rng);
    l.d = d;
    return l;
}

}  // namespace

TEST_CASE("scaled_down_factor equals the plain factor without lambda or gate") {
    AdaptedLayer l = make_layer(8, 3, 1);
    Matrix expected = build_ortho(l.q_down, l.d).factor;
    CHECK(max_abs_diff(scaled_down_factor(l), expected) == 0.0);
}

TEST_CASE("lambda scales columns of the down factor") {
    AdaptedLayer l = make_layer(6, 3, 2);
    l.lambda = Vector{2.0, -1.0, 0.5};
    Matrix plain = build_ortho(l.q_down, l.d).factor;
    Matrix scaled = scaled_down_factor(l);
    for (std::size_t i = 0; i < plain.rows; ++i) {
        CHECK(scaled(i, 0) == 2.0 * plain(i, 0));
        CHECK(scaled(i, 1) == -1.0 * plain(i, 1));
        CHECK(scaled(i, 2) == 0.5 * plain(i, 2));
    }
}

TEST_CASE("zero lambda makes the delta exactly zero") {
    AdaptedLayer l = make_layer(10, 4, 3);
    l.lambda = Vector(4, 0.0);
    Matrix delta = aoft_delta(l);
    for (double v : delta.data) CHECK(v == 0.0);
}

TEST_CASE("zero gate makes the delta exactly zero") {
    AdaptedLayer l = make_layer(10, 4, 4);
    l.use_gate = true;
    l.gate = 0.0;
    Matrix delta = aoft_delta(l);
    for (double v : delta.data) CHECK(v == 0.0);
}

TEST_CASE("lambda length mismatch throws") {
    AdaptedLayer l = make_layer(6, 3, 5);
    l.lambda = Vector{1.0, 2.0};
    CHECK_THROWS_AS(scaled_down_factor(l), std::invalid_argument);
}

TEST_CASE("aoft delta has rank at most d") {
    AdaptedLayer l = make_layer(12, 3, 6);
    Matrix delta = aoft_delta(l);
    auto sv = oracle::jacobi_singular_values(delta);
    std::size_t rank = 0;
    for (double s : sv)
        if (s > 1e-10) ++rank;
    CHECK(rank <= 3);
    CHECK(rank >= 1);
}

TEST_CASE("lora forward folds the delta into the base weight") {
    AdaptedLayer l = make_layer(5, 2, 7);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix x(3, 5);
    for (double &v : x.data) v = g(rng);
    Matrix expected = matmul(x, add(l.base, aoft_delta(l)));
    CHECK(max_abs_diff(lora_aoft_forward(x, l), expected) == 0.0);
}

TEST_CASE("lora forward validates scheme and shapes") {
    AdaptedLayer l = make_layer(5, 2, 8, Scheme::AdapterAoft);
    Matrix x(3, 5);
    CHECK_THROWS_AS(lora_aoft_forward(x, l), std::invalid_argument);

    AdaptedLayer ok = make_layer(5, 2, 8);
    Matrix bad(3, 4);
    CHECK_THROWS_WITH_AS(lora_aoft_forward(bad, ok),
                         doctest::Contains("3x4"), std::invalid_argument);
}

TEST_CASE("adapter forward with and without the residual connection") {
    AdaptedLayer l = make_layer(6, 2, 9, Scheme::AdapterAoft);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix h(4, 6);
    for (double &v : h.data) v = g(rng);

    Matrix through = matmul(h, aoft_delta(l));
    l.residual = true;
    CHECK(max_abs_diff(adapter_aoft_forward(h, l), add(h, through)) == 0.0);
    l.residual = false;
    CHECK(max_abs_diff(adapter_aoft_forward(h, l), through) == 0.0);
}

TEST_CASE("adapter residual with zero gate is an exact identity") {
    AdaptedLayer l = make_layer(6, 2, 10, Scheme::AdapterAoft);
    l.use_gate = true;
    l.gate = 0.0;
    Matrix h(3, 6, 1.25);
    CHECK(max_abs_diff(adapter_aoft_forward(h, l), h) == 0.0);
}

TEST_CASE("vpt prepend appends generated prompt rows") {
    std::mt19937_64 rng(17);
    GeneratorVector q = random_unit_generator(8, rng);
    Matrix x(3, 8, 0.5);

    SUBCASE("zero prompts leaves x untouched") {
        Matrix out = vpt_aoft_prepend(x, q, 0);
        CHECK(max_abs_diff(out, x) == 0.0);
    }
    SUBCASE("prompt rows are the transposed factor columns") {
        Matrix out = vpt_aoft_prepend(x, q, 2);
        REQUIRE(out.rows == 5);
        Matrix f = build_ortho(q, 2).factor;
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(out(0, j) == x(0, j));
            CHECK(out(3, j) == f(j, 0));
            CHECK(out(4, j) == f(j, 1));
        }
    }
    SUBCASE("unit-norm generator yields orthonormal prompt rows") {
        Matrix out = vpt_aoft_prepend(x, q, 3);
        Matrix prompts(3, 8);
        for (std::size_t p = 0; p < 3; ++p)
            for (std::size_t j = 0; j < 8; ++j) prompts(p, j) = out(3 + p, j);
        Matrix g = gram(transpose(prompts));
        CHECK(max_abs_diff(g, Matrix::identity(3)) < 1e-12);
    }
    SUBCASE("length mismatch throws") {
        Matrix bad(3, 7);
        CHECK_THROWS_AS(vpt_aoft_prepend(bad, q, 2), std::invalid_argument);
    }
}

TEST_CASE("method names round-trip") {
    for (PeftMethod m : {PeftMethod::LinearProbe, PeftMethod::FullFinetune,
                         PeftMethod::Lora, PeftMethod::LoraAoft,
                         PeftMethod::AdapterAoft, PeftMethod::VptAoftShallow,
                         PeftMethod::VptAoftDeep}) {
        CHECK(method_from_name(method_name(m)) == m);
    }
    CHECK_THROWS_AS(method_from_name("prefix-tuning"), std::invalid_argument);
}

TEST_CASE("parameter budget formulas") {
    BudgetConfig cfg;
    cfg.dim = 768;
    cfg.bottleneck = 8;
    cfg.layers = 12;
    cfg.adapted_per_layer = 2;
    cfg.classes = 100;
    const std::size_t head = 768 * 100 + 100;

    SUBCASE("plain LoRA vs generated factors is exactly a 1/d ratio per matrix") {
        cfg.method = PeftMethod::Lora;
        ParamBudget lora = param_count(cfg);
        cfg.method = PeftMethod::LoraAoft;
        ParamBudget aoft = param_count(cfg);
        const std::size_t lora_adapters = lora.trainable_count - head;
        const std::size_t aoft_adapters = aoft.trainable_count - head;
        CHECK(lora_adapters == 12 * 2 * 2 * 768 * 8);
        CHECK(aoft_adapters == 12 * 2 * 2 * 768);
        CHECK(lora_adapters == aoft_adapters * 8);
    }
    SUBCASE("star and gate add d and 1 per adapted matrix") {
        cfg.method = PeftMethod::LoraAoft;
        cfg.aoft_star = true;
        CHECK(param_count(cfg).trainable_count == 24 * (2 * 768 + 8) + head);
        cfg.aoft_star = false;
        cfg.use_gate = true;
        CHECK(param_count(cfg).trainable_count == 24 * (2 * 768 + 1) + head);
    }
    SUBCASE("prompt budgets") {
        cfg.method = PeftMethod::VptAoftShallow;
        CHECK(param_count(cfg).trainable_count == 768 + head);
        cfg.method = PeftMethod::VptAoftDeep;
        CHECK(param_count(cfg).trainable_count == 12 * 768 + head);
    }
    SUBCASE("probe and full fine-tuning") {
        cfg.method = PeftMethod::LinearProbe;
        cfg.backbone_params = 1234;
        ParamBudget probe = param_count(cfg);
        CHECK(probe.trainable_count == head);
        CHECK(probe.frozen_count == 1234);
        cfg.method = PeftMethod::FullFinetune;
        ParamBudget full = param_count(cfg);
        CHECK(full.trainable_count == 1234 + head);
        CHECK(full.frozen_count == 0);
    }
}

TEST_CASE("matrix checksum is content and shape sensitive") {
    Matrix a(2, 3, 1.0);
    Matrix b(2, 3, 1.0);
    CHECK(matrix_checksum(a) == matrix_checksum(b));
    b(1, 2) = 1.0 + 1e-15;
    CHECK(matrix_checksum(a) != matrix_checksum(b));
    Matrix c(3, 2, 1.0);
    CHECK(matrix_checksum(a) != matrix_checksum(c));
}
