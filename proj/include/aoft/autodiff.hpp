#pragma once

// Small reverse-mode tape over Matrix values. Graphs are rebuilt per batch;
// parameter nodes persist across steps and accumulate gradients until
// zero_grad is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "aoft/aoft_core.hpp"
#include "aoft/linalg.hpp"

namespace aoft::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Matrix val;
    Matrix grad;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node &)> backward_fn;

    explicit Node(Matrix v, bool rg = false)
        : val(std::move(v)), grad(val.rows, val.cols), requires_grad(rg) {}
};

NodePtr constant(Matrix v);
NodePtr param(Matrix v);

NodePtr matmul(const NodePtr &a, const NodePtr &b);
NodePtr add(const NodePtr &a, const NodePtr &b);
NodePtr scale(const NodePtr &a, double c);
NodePtr transpose(const NodePtr &a);
NodePtr hadamard(const NodePtr &a, const NodePtr &b);

// x (tokens x D) plus a 1 x D row vector broadcast over rows.
NodePtr add_rowvec(const NodePtr &x, const NodePtr &b);

// Row-wise layer norm with affine parameters gamma/beta (1 x D rows).
NodePtr layernorm(const NodePtr &x, const NodePtr &gamma, const NodePtr &beta);

// Exact Gaussian-CDF GELU, x * Phi(x).
NodePtr gelu(const NodePtr &x);

NodePtr softmax_rows(const NodePtr &x);

NodePtr col_slice(const NodePtr &x, std::size_t c0, std::size_t c1);
NodePtr row_slice(const NodePtr &x, std::size_t r0, std::size_t r1);
NodePtr hconcat(const std::vector<NodePtr> &parts);
NodePtr vconcat(const NodePtr &a, const NodePtr &b);

// Elementwise product with a fixed mask (dropout).
NodePtr mask(const NodePtr &x, Matrix m);

// Scale every entry of a by the 1x1 node s.
NodePtr mul_scalar(const NodePtr &a, const NodePtr &s);

// Scale column j of a by entry j of the 1 x d node lam.
NodePtr col_scale(const NodePtr &a, const NodePtr &lam);

// AO factor node: q is an N x 1 column, value is build_ortho(q, d).factor.
// Backward routes through the closed-form generator gradient.
NodePtr ao_factor(const NodePtr &q, std::size_t d);

// Mean softmax cross-entropy over rows of logits; labels are row indices.
NodePtr cross_entropy(const NodePtr &logits, const std::vector<std::size_t> &labels);

// Sum of all entries, as a 1x1 node.
NodePtr sum_all(const NodePtr &a);

// Seeds root grad with ones and runs reverse accumulation.
void backward(const NodePtr &root);

void zero_grad(const std::vector<NodePtr> &params);

}  // namespace aoft::ad
