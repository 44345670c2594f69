#include "aoft/model.hpp"

#include <cmath>
#include <stdexcept>

#include "aoft/peft.hpp"

namespace aoft {

void ModelConfig::validate() const {
    if (image_size == 0 || patch_size == 0 || image_size % patch_size != 0)
        throw std::invalid_argument("model config: image size must be a multiple of patch size");
    if (dim == 0 || heads == 0 || dim % heads != 0)
        throw std::invalid_argument("model config: dim must be divisible by heads");
    if (layers == 0 || classes == 0)
        throw std::invalid_argument("model config: layers and classes must be positive");
}

namespace {

Matrix randn(std::size_t r, std::size_t c, double std, std::mt19937_64 &rng) {
    std::normal_distribution<double> g(0.0, std);
    Matrix m(r, c);
    for (double &v : m.data) v = g(rng);
    return m;
}

Matrix ones_row(std::size_t c) { return Matrix(1, c, 1.0); }

}  // namespace

VitModel init_model(const ModelConfig &cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ull + 0x6a09e667f3bcc909ull);
    const std::size_t d = cfg.dim;
    const std::size_t pdim = cfg.patch_size * cfg.patch_size;
    const double wstd = std::sqrt(2.0 / (2.0 * static_cast<double>(d)));

    VitModel m;
    m.cfg = cfg;
    m.patch_embed = randn(pdim, d, std::sqrt(2.0 / (pdim + d)), rng);
    m.cls_token = randn(1, d, 0.02, rng);
    m.pos_embed = randn(cfg.tokens(), d, 0.02, rng);
    m.layers.resize(cfg.layers);
    for (auto &l : m.layers) {
        l.wq = randn(d, d, wstd, rng);
        l.wk = randn(d, d, wstd, rng);
        l.wv = randn(d, d, wstd, rng);
        l.wo = randn(d, d, wstd, rng);
        l.fc1 = randn(d, 4 * d, std::sqrt(2.0 / (5.0 * d)), rng);
        l.fc2 = randn(4 * d, d, std::sqrt(2.0 / (5.0 * d)), rng);
        l.ln1_gamma = ones_row(d);
        l.ln1_beta = Matrix(1, d);
        l.ln2_gamma = ones_row(d);
        l.ln2_beta = Matrix(1, d);
    }
    m.final_ln_gamma = ones_row(d);
    m.final_ln_beta = Matrix(1, d);
    m.head_w = randn(d, cfg.classes, 0.01, rng);
    m.head_b = Matrix(1, cfg.classes);
    return m;
}

std::vector<const Matrix *> VitModel::backbone_matrices() const {
    std::vector<const Matrix *> out{&patch_embed, &cls_token, &pos_embed};
    for (const auto &l : layers) {
        out.push_back(&l.wq);
        out.push_back(&l.wk);
        out.push_back(&l.wv);
        out.push_back(&l.wo);
        out.push_back(&l.fc1);
        out.push_back(&l.fc2);
        out.push_back(&l.ln1_gamma);
        out.push_back(&l.ln1_beta);
        out.push_back(&l.ln2_gamma);
        out.push_back(&l.ln2_beta);
    }
    out.push_back(&final_ln_gamma);
    out.push_back(&final_ln_beta);
    return out;
}

std::size_t VitModel::backbone_param_count() const {
    std::size_t n = 0;
    for (const Matrix *m : backbone_matrices()) n += m->size();
    return n;
}

std::vector<std::uint64_t> VitModel::backbone_checksums() const {
    std::vector<std::uint64_t> out;
    for (const Matrix *m : backbone_matrices()) out.push_back(matrix_checksum(*m));
    return out;
}

Dataset make_blob_dataset(const ModelConfig &cfg, std::uint64_t task_seed,
                          std::size_t per_class, double noise_std) {
    std::mt19937_64 rng(task_seed * 0xbf58476d1ce4e5b9ull + 0x94d049bb133111ebull);
    const std::size_t s = cfg.image_size;
    const std::size_t ps = cfg.patch_size;
    const std::size_t grid = s / ps;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Class prototypes: two signed Gaussian blobs plus a low-frequency wave.
    std::vector<std::vector<double>> protos(cfg.classes,
                                            std::vector<double>(s * s, 0.0));
    for (auto &proto : protos) {
        for (int blob = 0; blob < 2; ++blob) {
            double cx = uni(rng) * s, cy = uni(rng) * s;
            double width = 1.5 + 2.5 * uni(rng);
            double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
            for (std::size_t y = 0; y < s; ++y)
                for (std::size_t x = 0; x < s; ++x) {
                    double dx = (x - cx) / width, dy = (y - cy) / width;
                    proto[y * s + x] += sign * std::exp(-0.5 * (dx * dx + dy * dy));
                }
        }
        double fx = 1.0 + std::floor(uni(rng) * 3.0);
        double fy = 1.0 + std::floor(uni(rng) * 3.0);
        double phase = uni(rng) * 6.28318530717958648;
        for (std::size_t y = 0; y < s; ++y)
            for (std::size_t x = 0; x < s; ++x)
                proto[y * s + x] +=
                    0.5 * std::sin(6.28318530717958648 * (fx * x + fy * y) / s + phase);
        double rms = 0.0;
        for (double v : proto) rms += v * v;
        rms = std::sqrt(rms / proto.size());
        if (rms > 0) for (double &v : proto) v /= rms;
    }

    Dataset data;
    data.classes = cfg.classes;
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            std::vector<double> img = protos[k];
            for (double &v : img) v += noise_std * gauss(rng);
            Sample smp;
            smp.label = k;
            smp.patches = Matrix(grid * grid, ps * ps);
            for (std::size_t py = 0; py < grid; ++py)
                for (std::size_t px = 0; px < grid; ++px) {
                    std::size_t row = py * grid + px;
                    for (std::size_t y = 0; y < ps; ++y)
                        for (std::size_t x = 0; x < ps; ++x)
                            smp.patches(row, y * ps + x) =
                                img[(py * ps + y) * s + px * ps + x];
                }
            data.samples.push_back(std::move(smp));
        }
    }
    return data;
}

Matrix attention_head(const Matrix &x, const Matrix &wq, const Matrix &wk,
                      const Matrix &wv) {
    Matrix q = matmul(x, wq), k = matmul(x, wk), v = matmul(x, wv);
    Matrix scores = matmul(q, transpose(k));
    const double inv = 1.0 / std::sqrt(static_cast<double>(wq.cols));
    for (double &s : scores.data) s *= inv;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        double mx = scores(i, 0);
        for (std::size_t j = 1; j < scores.cols; ++j) mx = std::max(mx, scores(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < scores.cols; ++j) {
            scores(i, j) = std::exp(scores(i, j) - mx);
            sum += scores(i, j);
        }
        for (std::size_t j = 0; j < scores.cols; ++j) scores(i, j) /= sum;
    }
    return matmul(scores, v);
}

std::vector<ad::NodePtr> backbone_nodes(const VitModel &model, bool train_backbone) {
    std::vector<ad::NodePtr> out;
    for (const Matrix *m : model.backbone_matrices()) {
        out.push_back(train_backbone ? ad::param(*m) : ad::constant(*m));
    }
    return out;
}

namespace {
// Index helpers into the backbone_nodes flat layout.
constexpr std::size_t kPerLayer = 10;
std::size_t layer_base(std::size_t l) { return 3 + l * kPerLayer; }
}  // namespace

ad::NodePtr build_logits(const VitModel &model, const Sample &s,
                         const GraphHooks &hooks,
                         const std::vector<ad::NodePtr> &nodes,
                         const ad::NodePtr &head_w, const ad::NodePtr &head_b) {
    using namespace ad;
    const ModelConfig &cfg = model.cfg;
    const std::size_t dh = cfg.head_dim();

    NodePtr patches = constant(s.patches);
    NodePtr emb = matmul(patches, nodes[0]);
    NodePtr x = vconcat(nodes[1], emb);
    x = add(x, nodes[2]);

    auto adapt = [&](std::size_t l, const std::string &name, const NodePtr &w) {
        return hooks.adapt_weight ? hooks.adapt_weight(l, name, w) : w;
    };

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::size_t b = layer_base(l);
        if (hooks.prepend_prompts) x = hooks.prepend_prompts(l, x);

        NodePtr ln1 = layernorm(x, nodes[b + 6], nodes[b + 7]);
        NodePtr wq = adapt(l, "wq", nodes[b + 0]);
        NodePtr wk = adapt(l, "wk", nodes[b + 1]);
        NodePtr wv = adapt(l, "wv", nodes[b + 2]);
        NodePtr wo = adapt(l, "wo", nodes[b + 3]);

        std::vector<NodePtr> heads;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            NodePtr qh = matmul(ln1, col_slice(wq, h * dh, (h + 1) * dh));
            NodePtr kh = matmul(ln1, col_slice(wk, h * dh, (h + 1) * dh));
            NodePtr vh = matmul(ln1, col_slice(wv, h * dh, (h + 1) * dh));
            NodePtr scores = scale(matmul(qh, transpose(kh)),
                                   1.0 / std::sqrt(static_cast<double>(dh)));
            heads.push_back(matmul(softmax_rows(scores), vh));
        }
        NodePtr mha = matmul(hconcat(heads), wo);
        if (hooks.adapt_block) mha = hooks.adapt_block(l, "mha", mha);
        x = add(x, mha);

        NodePtr ln2 = layernorm(x, nodes[b + 8], nodes[b + 9]);
        NodePtr fc1 = adapt(l, "fc1", nodes[b + 4]);
        NodePtr fc2 = adapt(l, "fc2", nodes[b + 5]);
        NodePtr ffn = matmul(gelu(matmul(ln2, fc1)), fc2);
        if (hooks.adapt_block) ffn = hooks.adapt_block(l, "ffn", ffn);
        x = add(x, ffn);
    }

    NodePtr final_ln = layernorm(x, nodes[nodes.size() - 2], nodes[nodes.size() - 1]);
    NodePtr cls = row_slice(final_ln, 0, 1);
    return add_rowvec(matmul(cls, head_w), head_b);
}

void write_back(VitModel &model, const std::vector<ad::NodePtr> &nodes,
                const ad::NodePtr &head_w, const ad::NodePtr &head_b) {
    std::vector<const Matrix *> mats = model.backbone_matrices();
    if (mats.size() != nodes.size())
        throw std::invalid_argument("write_back: node count mismatch");
    for (std::size_t i = 0; i < mats.size(); ++i) {
        const_cast<Matrix *>(mats[i])->data = nodes[i]->val.data;
    }
    model.head_w = head_w->val;
    model.head_b = head_b->val;
}

Matrix forward_logits(const VitModel &model, const Sample &s) {
    GraphHooks no_hooks;
    auto nodes = backbone_nodes(model, false);
    auto hw = ad::constant(model.head_w);
    auto hb = ad::constant(model.head_b);
    return build_logits(model, s, no_hooks, nodes, hw, hb)->val;
}

double eval_accuracy(const VitModel &model, const Dataset &data) {
    if (data.samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto &s : data.samples) {
        Matrix logits = forward_logits(model, s);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < logits.cols; ++j)
            if (logits(0, j) > logits(0, arg)) arg = j;
        if (arg == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.samples.size());
}

}  // namespace aoft
