#include "aoft/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace aoft::ad {

namespace {

NodePtr make(Matrix val, std::vector<NodePtr> parents,
             std::function<void(Node &)> back) {
    bool rg = false;
    for (const auto &p : parents) rg = rg || p->requires_grad;
    auto n = std::make_shared<Node>(std::move(val), rg);
    if (rg) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(back);
    }
    return n;
}

void accumulate(Node &dst, const Matrix &g) {
    for (std::size_t i = 0; i < dst.grad.size(); ++i) dst.grad.data[i] += g.data[i];
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

constexpr double kLnEps = 1e-12;

}  // namespace

NodePtr constant(Matrix v) { return std::make_shared<Node>(std::move(v), false); }

NodePtr param(Matrix v) { return std::make_shared<Node>(std::move(v), true); }

NodePtr matmul(const NodePtr &a, const NodePtr &b) {
    Matrix c = aoft::matmul(a->val, b->val);
    return make(std::move(c), {a, b}, [a, b](Node &n) {
        if (a->requires_grad)
            accumulate(*a, aoft::matmul(n.grad, aoft::transpose(b->val)));
        if (b->requires_grad)
            accumulate(*b, aoft::matmul(aoft::transpose(a->val), n.grad));
    });
}

NodePtr add(const NodePtr &a, const NodePtr &b) {
    Matrix c = aoft::add(a->val, b->val);
    return make(std::move(c), {a, b}, [a, b](Node &n) {
        if (a->requires_grad) accumulate(*a, n.grad);
        if (b->requires_grad) accumulate(*b, n.grad);
    });
}

NodePtr scale(const NodePtr &a, double c) {
    return make(aoft::scale(a->val, c), {a}, [a, c](Node &n) {
        if (a->requires_grad) accumulate(*a, aoft::scale(n.grad, c));
    });
}

NodePtr transpose(const NodePtr &a) {
    return make(aoft::transpose(a->val), {a}, [a](Node &n) {
        if (a->requires_grad) accumulate(*a, aoft::transpose(n.grad));
    });
}

NodePtr hadamard(const NodePtr &a, const NodePtr &b) {
    if (a->val.rows != b->val.rows || a->val.cols != b->val.cols)
        throw std::invalid_argument("hadamard: shape mismatch");
    Matrix c = a->val;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] *= b->val.data[i];
    return make(std::move(c), {a, b}, [a, b](Node &n) {
        if (a->requires_grad) {
            Matrix g = n.grad;
            for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= b->val.data[i];
            accumulate(*a, g);
        }
        if (b->requires_grad) {
            Matrix g = n.grad;
            for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= a->val.data[i];
            accumulate(*b, g);
        }
    });
}

NodePtr add_rowvec(const NodePtr &x, const NodePtr &b) {
    if (b->val.rows != 1 || b->val.cols != x->val.cols)
        throw std::invalid_argument("add_rowvec: bias must be 1 x cols");
    Matrix c = x->val;
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < c.cols; ++j) c(i, j) += b->val(0, j);
    return make(std::move(c), {x, b}, [x, b](Node &n) {
        if (x->requires_grad) accumulate(*x, n.grad);
        if (b->requires_grad) {
            Matrix g(1, n.grad.cols);
            for (std::size_t i = 0; i < n.grad.rows; ++i)
                for (std::size_t j = 0; j < n.grad.cols; ++j) g(0, j) += n.grad(i, j);
            accumulate(*b, g);
        }
    });
}

NodePtr layernorm(const NodePtr &x, const NodePtr &gamma, const NodePtr &beta) {
    const std::size_t rows = x->val.rows, cols = x->val.cols;
    if (gamma->val.cols != cols || beta->val.cols != cols)
        throw std::invalid_argument("layernorm: affine params must be 1 x cols");
    Matrix xhat(rows, cols);
    std::vector<double> inv_sigma(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += x->val(i, j);
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double d = x->val(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        inv_sigma[i] = 1.0 / std::sqrt(var + kLnEps);
        for (std::size_t j = 0; j < cols; ++j)
            xhat(i, j) = (x->val(i, j) - mu) * inv_sigma[i];
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out(i, j) = xhat(i, j) * gamma->val(0, j) + beta->val(0, j);

    return make(std::move(out), {x, gamma, beta},
                [x, gamma, beta, xhat, inv_sigma](Node &n) {
        const std::size_t rows = n.grad.rows, cols = n.grad.cols;
        if (gamma->requires_grad) {
            Matrix gg(1, cols);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    gg(0, j) += n.grad(i, j) * xhat(i, j);
            accumulate(*gamma, gg);
        }
        if (beta->requires_grad) {
            Matrix gb(1, cols);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) gb(0, j) += n.grad(i, j);
            accumulate(*beta, gb);
        }
        if (x->requires_grad) {
            Matrix gx(rows, cols);
            for (std::size_t i = 0; i < rows; ++i) {
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                std::vector<double> dxhat(cols);
                for (std::size_t j = 0; j < cols; ++j) {
                    dxhat[j] = n.grad(i, j) * gamma->val(0, j);
                    mean_dxhat += dxhat[j];
                    mean_dxhat_xhat += dxhat[j] * xhat(i, j);
                }
                mean_dxhat /= static_cast<double>(cols);
                mean_dxhat_xhat /= static_cast<double>(cols);
                for (std::size_t j = 0; j < cols; ++j)
                    gx(i, j) = inv_sigma[i] *
                               (dxhat[j] - mean_dxhat - xhat(i, j) * mean_dxhat_xhat);
            }
            accumulate(*x, gx);
        }
    });
}

NodePtr gelu(const NodePtr &x) {
    Matrix out = x->val;
    for (double &v : out.data) v = v * normal_cdf(v);
    return make(std::move(out), {x}, [x](Node &n) {
        if (!x->requires_grad) return;
        Matrix g = n.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double v = x->val.data[i];
            g.data[i] *= normal_cdf(v) + v * normal_pdf(v);
        }
        accumulate(*x, g);
    });
}

NodePtr softmax_rows(const NodePtr &x) {
    Matrix out = x->val;
    for (std::size_t i = 0; i < out.rows; ++i) {
        double mx = out(i, 0);
        for (std::size_t j = 1; j < out.cols; ++j) mx = std::max(mx, out(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < out.cols; ++j) {
            out(i, j) = std::exp(out(i, j) - mx);
            sum += out(i, j);
        }
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) /= sum;
    }
    Matrix y = out;
    return make(std::move(out), {x}, [x, y](Node &n) {
        if (!x->requires_grad) return;
        Matrix g(n.grad.rows, n.grad.cols);
        for (std::size_t i = 0; i < g.rows; ++i) {
            double dy_dot_y = 0.0;
            for (std::size_t j = 0; j < g.cols; ++j) dy_dot_y += n.grad(i, j) * y(i, j);
            for (std::size_t j = 0; j < g.cols; ++j)
                g(i, j) = y(i, j) * (n.grad(i, j) - dy_dot_y);
        }
        accumulate(*x, g);
    });
}

NodePtr col_slice(const NodePtr &x, std::size_t c0, std::size_t c1) {
    if (c1 > x->val.cols || c0 >= c1)
        throw std::invalid_argument("col_slice: bad range");
    Matrix out(x->val.rows, c1 - c0);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) = x->val(i, c0 + j);
    return make(std::move(out), {x}, [x, c0](Node &n) {
        if (!x->requires_grad) return;
        Matrix g(x->val.rows, x->val.cols);
        for (std::size_t i = 0; i < n.grad.rows; ++i)
            for (std::size_t j = 0; j < n.grad.cols; ++j) g(i, c0 + j) = n.grad(i, j);
        accumulate(*x, g);
    });
}

NodePtr row_slice(const NodePtr &x, std::size_t r0, std::size_t r1) {
    if (r1 > x->val.rows || r0 >= r1)
        throw std::invalid_argument("row_slice: bad range");
    Matrix out(r1 - r0, x->val.cols);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) = x->val(r0 + i, j);
    return make(std::move(out), {x}, [x, r0](Node &n) {
        if (!x->requires_grad) return;
        Matrix g(x->val.rows, x->val.cols);
        for (std::size_t i = 0; i < n.grad.rows; ++i)
            for (std::size_t j = 0; j < n.grad.cols; ++j) g(r0 + i, j) = n.grad(i, j);
        accumulate(*x, g);
    });
}

NodePtr hconcat(const std::vector<NodePtr> &parts) {
    if (parts.empty()) throw std::invalid_argument("hconcat: no parts");
    std::size_t cols = 0;
    for (const auto &p : parts) {
        if (p->val.rows != parts[0]->val.rows)
            throw std::invalid_argument("hconcat: row mismatch");
        cols += p->val.cols;
    }
    Matrix out(parts[0]->val.rows, cols);
    std::size_t off = 0;
    for (const auto &p : parts) {
        for (std::size_t i = 0; i < p->val.rows; ++i)
            for (std::size_t j = 0; j < p->val.cols; ++j)
                out(i, off + j) = p->val(i, j);
        off += p->val.cols;
    }
    return make(std::move(out), parts, [parts](Node &n) {
        std::size_t off = 0;
        for (const auto &p : parts) {
            if (p->requires_grad) {
                Matrix g(p->val.rows, p->val.cols);
                for (std::size_t i = 0; i < g.rows; ++i)
                    for (std::size_t j = 0; j < g.cols; ++j)
                        g(i, j) = n.grad(i, off + j);
                accumulate(*p, g);
            }
            off += p->val.cols;
        }
    });
}

NodePtr vconcat(const NodePtr &a, const NodePtr &b) {
    if (a->val.cols != b->val.cols) throw std::invalid_argument("vconcat: col mismatch");
    Matrix out(a->val.rows + b->val.rows, a->val.cols);
    for (std::size_t i = 0; i < a->val.rows; ++i)
        for (std::size_t j = 0; j < a->val.cols; ++j) out(i, j) = a->val(i, j);
    for (std::size_t i = 0; i < b->val.rows; ++i)
        for (std::size_t j = 0; j < b->val.cols; ++j)
            out(a->val.rows + i, j) = b->val(i, j);
    return make(std::move(out), {a, b}, [a, b](Node &n) {
        if (a->requires_grad) {
            Matrix g(a->val.rows, a->val.cols);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) g(i, j) = n.grad(i, j);
            accumulate(*a, g);
        }
        if (b->requires_grad) {
            Matrix g(b->val.rows, b->val.cols);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j)
                    g(i, j) = n.grad(a->val.rows + i, j);
            accumulate(*b, g);
        }
    });
}

NodePtr mask(const NodePtr &x, Matrix m) {
    if (m.rows != x->val.rows || m.cols != x->val.cols)
        throw std::invalid_argument("mask: shape mismatch");
    Matrix out = x->val;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= m.data[i];
    return make(std::move(out), {x}, [x, m](Node &n) {
        if (!x->requires_grad) return;
        Matrix g = n.grad;
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= m.data[i];
        accumulate(*x, g);
    });
}

NodePtr mul_scalar(const NodePtr &a, const NodePtr &s) {
    if (s->val.rows != 1 || s->val.cols != 1)
        throw std::invalid_argument("mul_scalar: s must be 1x1");
    Matrix out = aoft::scale(a->val, s->val(0, 0));
    return make(std::move(out), {a, s}, [a, s](Node &n) {
        if (a->requires_grad) accumulate(*a, aoft::scale(n.grad, s->val(0, 0)));
        if (s->requires_grad) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                acc += n.grad.data[i] * a->val.data[i];
            Matrix g(1, 1);
            g(0, 0) = acc;
            accumulate(*s, g);
        }
    });
}

NodePtr col_scale(const NodePtr &a, const NodePtr &lam) {
    if (lam->val.rows != 1 || lam->val.cols != a->val.cols)
        throw std::invalid_argument("col_scale: lam must be 1 x cols");
    Matrix out = a->val;
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) *= lam->val(0, j);
    return make(std::move(out), {a, lam}, [a, lam](Node &n) {
        if (a->requires_grad) {
            Matrix g = n.grad;
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) g(i, j) *= lam->val(0, j);
            accumulate(*a, g);
        }
        if (lam->requires_grad) {
            Matrix g(1, a->val.cols);
            for (std::size_t i = 0; i < n.grad.rows; ++i)
                for (std::size_t j = 0; j < n.grad.cols; ++j)
                    g(0, j) += n.grad(i, j) * a->val(i, j);
            accumulate(*lam, g);
        }
    });
}

NodePtr ao_factor(const NodePtr &q, std::size_t d) {
    if (q->val.cols != 1) throw std::invalid_argument("ao_factor: q must be N x 1");
    GeneratorVector g{q->val.data};
    OrthoFactor f = build_ortho(g, d);
    return make(std::move(f.factor), {q}, [q, d](Node &n) {
        if (!q->requires_grad) return;
        GeneratorVector g{q->val.data};
        Vector dq = grad_q(g, d, n.grad);
        Matrix gm(q->val.rows, 1);
        gm.data = dq;
        accumulate(*q, gm);
    });
}

NodePtr cross_entropy(const NodePtr &logits, const std::vector<std::size_t> &labels) {
    if (labels.size() != logits->val.rows)
        throw std::invalid_argument("cross_entropy: label count mismatch");
    const std::size_t rows = logits->val.rows, cols = logits->val.cols;
    Matrix probs(rows, cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double mx = logits->val(i, 0);
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, logits->val(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            probs(i, j) = std::exp(logits->val(i, j) - mx);
            sum += probs(i, j);
        }
        for (std::size_t j = 0; j < cols; ++j) probs(i, j) /= sum;
        loss += mx + std::log(sum) - logits->val(i, labels[i]);
    }
    loss /= static_cast<double>(rows);
    Matrix out(1, 1);
    out(0, 0) = loss;
    return make(std::move(out), {logits}, [logits, probs, labels](Node &n) {
        if (!logits->requires_grad) return;
        const double up = n.grad(0, 0) / static_cast<double>(probs.rows);
        Matrix g = probs;
        for (std::size_t i = 0; i < g.rows; ++i) g(i, labels[i]) -= 1.0;
        for (double &v : g.data) v *= up;
        accumulate(*logits, g);
    });
}

NodePtr sum_all(const NodePtr &a) {
    Matrix out(1, 1);
    for (double v : a->val.data) out(0, 0) += v;
    return make(std::move(out), {a}, [a](Node &n) {
        if (!a->requires_grad) return;
        accumulate(*a, Matrix(a->val.rows, a->val.cols, n.grad(0, 0)));
    });
}

void backward(const NodePtr &root) {
    if (root->val.rows != 1 || root->val.cols != 1)
        throw std::invalid_argument("backward: root must be a 1x1 scalar");
    // Iterative post-order topological sort.
    std::vector<NodePtr> topo;
    std::unordered_set<Node *> seen;
    std::vector<std::pair<NodePtr, std::size_t>> stack{{root, 0}};
    while (!stack.empty()) {
        auto &[node, idx] = stack.back();
        if (idx == 0 && seen.count(node.get())) {
            stack.pop_back();
            continue;
        }
        seen.insert(node.get());
        if (idx < node->parents.size()) {
            NodePtr next = node->parents[idx++];
            if (!seen.count(next.get())) stack.emplace_back(next, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    root->grad(0, 0) = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

void zero_grad(const std::vector<NodePtr> &params) {
    for (const auto &p : params) {
        std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
    }
}

}  // namespace aoft::ad
