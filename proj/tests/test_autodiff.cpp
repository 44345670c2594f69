#include <cmath>
#include <random>

#include "aoft/aoft_core.hpp"
#include "aoft/autodiff.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace aoft;

namespace {

Matrix randm(std::size_t r, std::size_t c, std::mt19937_64 &rng, double s = 1.0) {
    std::normal_distribution<double> g(0.0, s);
    Matrix m(r, c);
    for (double &v : m.data) v = g(rng);
    return m;
}

// Central finite differences of a scalar-valued graph builder with respect to
// one parameter node, compared entrywise against the tape gradient.
void check_param_grad(const ad::NodePtr &p,
                      const std::function<ad::NodePtr()> &build,
                      double tol = 1e-6) {
    ad::NodePtr out = build();
    REQUIRE(out->val.rows == 1);
    REQUIRE(out->val.cols == 1);
    ad::zero_grad({p});
    ad::backward(out);
    Matrix analytic = p->grad;

    const double h = 1e-6;
    for (std::size_t i = 0; i < p->val.size(); ++i) {
        const double saved = p->val.data[i];
        p->val.data[i] = saved + h;
        const double fp = build()->val(0, 0);
        p->val.data[i] = saved - h;
        const double fm = build()->val(0, 0);
        p->val.data[i] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom =
            std::max({std::abs(analytic.data[i]), std::abs(fd), 1e-6});
        CHECK(std::abs(analytic.data[i] - fd) / denom < tol);
    }
}

// Weighted sum so the upstream gradient reaching the op is non-uniform.
ad::NodePtr weighted(const ad::NodePtr &x, const Matrix &w) {
    return ad::sum_all(ad::hadamard(x, ad::constant(w)));
}

}  // namespace

TEST_CASE("forward values of elementwise ops") {
    std::mt19937_64 rng(7);
    Matrix a = randm(3, 4, rng);
    Matrix b = randm(3, 4, rng);
    ad::NodePtr na = ad::constant(a), nb = ad::constant(b);

    Matrix sum = ad::add(na, nb)->val;
    Matrix had = ad::hadamard(na, nb)->val;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(sum.data[i] == a.data[i] + b.data[i]);
        CHECK(had.data[i] == a.data[i] * b.data[i]);
    }
    Matrix sc = ad::scale(na, -2.5)->val;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(sc.data[i] == -2.5 * a.data[i]);
}

TEST_CASE("matmul forward matches the non-tape product") {
    std::mt19937_64 rng(11);
    Matrix a = randm(4, 6, rng), b = randm(6, 3, rng);
    Matrix via_tape = ad::matmul(ad::constant(a), ad::constant(b))->val;
    CHECK(max_abs_diff(via_tape, matmul(a, b)) == 0.0);
}

TEST_CASE("gelu matches the Gaussian-CDF closed form") {
    Matrix x(1, 5);
    x.data = {-3.0, -0.5, 0.0, 0.5, 3.0};
    Matrix y = ad::gelu(ad::constant(x))->val;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data[i];
        const double phi = 0.5 * std::erfc(-v / std::sqrt(2.0));
        CHECK(y.data[i] == doctest::Approx(v * phi).epsilon(1e-15));
    }
}

TEST_CASE("softmax rows sum to one and survive large inputs") {
    Matrix x(2, 3);
    x.data = {1000.0, 1001.0, 999.0, -5.0, 0.0, 5.0};
    Matrix y = ad::softmax_rows(ad::constant(x))->val;
    for (std::size_t i = 0; i < 2; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::isfinite(y(i, j)));
            CHECK(y(i, j) > 0.0);
            s += y(i, j);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layernorm output rows are standardized when gamma=1 beta=0") {
    std::mt19937_64 rng(13);
    Matrix x = randm(5, 8, rng, 3.0);
    ad::NodePtr y = ad::layernorm(ad::constant(x), ad::constant(Matrix(1, 8, 1.0)),
                                  ad::constant(Matrix(1, 8)));
    for (std::size_t i = 0; i < 5; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mean += y->val(i, j);
        mean /= 8.0;
        for (std::size_t j = 0; j < 8; ++j) {
            const double c = y->val(i, j) - mean;
            var += c * c;
        }
        var /= 8.0;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("slices and concats rearrange entries exactly") {
    std::mt19937_64 rng(17);
    Matrix a = randm(4, 6, rng);
    ad::NodePtr na = ad::constant(a);

    Matrix cs = ad::col_slice(na, 2, 5)->val;
    REQUIRE(cs.rows == 4);
    REQUIRE(cs.cols == 3);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(cs(i, j) == a(i, j + 2));

    Matrix rs = ad::row_slice(na, 1, 3)->val;
    REQUIRE(rs.rows == 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 6; ++j) CHECK(rs(i, j) == a(i + 1, j));

    ad::NodePtr left = ad::col_slice(na, 0, 2);
    ad::NodePtr right = ad::col_slice(na, 2, 6);
    CHECK(max_abs_diff(ad::hconcat({left, right})->val, a) == 0.0);

    ad::NodePtr top = ad::row_slice(na, 0, 1);
    ad::NodePtr bottom = ad::row_slice(na, 1, 4);
    CHECK(max_abs_diff(ad::vconcat(top, bottom)->val, a) == 0.0);
}

TEST_CASE("gradients of core ops match finite differences") {
    std::mt19937_64 rng(23);
    Matrix w = randm(3, 4, rng);

    SUBCASE("add and scale") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        check_param_grad(p, [&] {
            return weighted(ad::scale(ad::add(p, ad::constant(randm(3, 4, std::mt19937_64(1)))), 1.7), w);
        });
    }
    SUBCASE("matmul left and right") {
        ad::NodePtr a = ad::param(randm(3, 5, rng));
        ad::NodePtr b = ad::param(randm(5, 4, rng));
        Matrix wu = randm(3, 4, rng);
        check_param_grad(a, [&] { return weighted(ad::matmul(a, b), wu); });
        check_param_grad(b, [&] { return weighted(ad::matmul(a, b), wu); });
    }
    SUBCASE("transpose") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        Matrix wu = randm(4, 3, rng);
        check_param_grad(p, [&] { return weighted(ad::transpose(p), wu); });
    }
    SUBCASE("hadamard") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        Matrix other = randm(3, 4, rng);
        check_param_grad(p, [&] { return weighted(ad::hadamard(p, ad::constant(other)), w); });
    }
    SUBCASE("add_rowvec both arguments") {
        ad::NodePtr x = ad::param(randm(5, 4, rng));
        ad::NodePtr bias = ad::param(randm(1, 4, rng));
        Matrix wu = randm(5, 4, rng);
        check_param_grad(x, [&] { return weighted(ad::add_rowvec(x, bias), wu); });
        check_param_grad(bias, [&] { return weighted(ad::add_rowvec(x, bias), wu); });
    }
    SUBCASE("gelu") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        check_param_grad(p, [&] { return weighted(ad::gelu(p), w); });
    }
    SUBCASE("softmax rows") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        check_param_grad(p, [&] { return weighted(ad::softmax_rows(p), w); });
    }
    SUBCASE("layernorm x gamma beta") {
        ad::NodePtr x = ad::param(randm(3, 6, rng));
        ad::NodePtr gamma = ad::param(randm(1, 6, rng, 0.5));
        ad::NodePtr beta = ad::param(randm(1, 6, rng, 0.5));
        Matrix wu = randm(3, 6, rng);
        check_param_grad(x, [&] { return weighted(ad::layernorm(x, gamma, beta), wu); }, 1e-5);
        check_param_grad(gamma, [&] { return weighted(ad::layernorm(x, gamma, beta), wu); });
        check_param_grad(beta, [&] { return weighted(ad::layernorm(x, gamma, beta), wu); });
    }
    SUBCASE("slices and concats") {
        ad::NodePtr p = ad::param(randm(4, 6, rng));
        Matrix wc = randm(4, 3, rng), wr = randm(2, 6, rng);
        check_param_grad(p, [&] { return weighted(ad::col_slice(p, 1, 4), wc); });
        check_param_grad(p, [&] { return weighted(ad::row_slice(p, 1, 3), wr); });
        Matrix wh = randm(4, 8, rng);
        check_param_grad(p, [&] {
            return weighted(ad::hconcat({ad::col_slice(p, 0, 2), p}), wh);
        });
        Matrix wv = randm(5, 6, rng);
        check_param_grad(p, [&] {
            return weighted(ad::vconcat(ad::row_slice(p, 0, 1), p), wv);
        });
    }
    SUBCASE("mask") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        Matrix m(3, 4);
        for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = i % 3 ? 2.0 : 0.0;
        check_param_grad(p, [&] { return weighted(ad::mask(p, m), w); });
    }
    SUBCASE("mul_scalar both arguments") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        ad::NodePtr s = ad::param(Matrix(1, 1, 0.7));
        check_param_grad(p, [&] { return weighted(ad::mul_scalar(p, s), w); });
        check_param_grad(s, [&] { return weighted(ad::mul_scalar(p, s), w); });
    }
    SUBCASE("col_scale both arguments") {
        ad::NodePtr p = ad::param(randm(3, 4, rng));
        ad::NodePtr lam = ad::param(randm(1, 4, rng));
        check_param_grad(p, [&] { return weighted(ad::col_scale(p, lam), w); });
        check_param_grad(lam, [&] { return weighted(ad::col_scale(p, lam), w); });
    }
}

TEST_CASE("ao_factor gradient matches finite differences") {
    std::mt19937_64 rng(29);
    for (std::size_t n : {4, 9, 16}) {
        const std::size_t d = n / 2;
        GeneratorVector g = init_generator(n, rng, 0.2);
        Matrix qcol(n, 1);
        qcol.data = g.q;
        ad::NodePtr q = ad::param(qcol);
        Matrix wu = randm(n, d, rng);
        check_param_grad(q, [&] { return weighted(ad::ao_factor(q, d), wu); });
    }
}

TEST_CASE("cross entropy value and gradient") {
    Matrix logits(1, 3);
    logits.data = {0.0, 0.0, 0.0};
    ad::NodePtr l = ad::constant(logits);
    CHECK(ad::cross_entropy(l, {1})->val(0, 0) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));

    std::mt19937_64 rng(31);
    ad::NodePtr p = ad::param(randm(4, 5, rng));
    std::vector<std::size_t> labels{1, 0, 4, 2};
    check_param_grad(p, [&] { return ad::cross_entropy(p, labels); });
}

TEST_CASE("gradient accumulates through reused nodes") {
    ad::NodePtr x = ad::param(Matrix(1, 1, 3.0));
    ad::NodePtr y = ad::sum_all(ad::hadamard(x, x));  // x^2
    ad::zero_grad({x});
    ad::backward(y);
    CHECK(x->grad(0, 0) == doctest::Approx(6.0).epsilon(1e-12));

    ad::zero_grad({x});
    ad::NodePtr z = ad::sum_all(ad::add(x, x));
    ad::backward(z);
    CHECK(x->grad(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("zero_grad clears accumulated gradients") {
    ad::NodePtr x = ad::param(Matrix(2, 2, 1.0));
    ad::backward(ad::sum_all(x));
    CHECK(x->grad(0, 0) == 1.0);
    ad::zero_grad({x});
    for (double v : x->grad.data) CHECK(v == 0.0);
}
