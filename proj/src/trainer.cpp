#include "aoft/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "aoft/mtx_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aoft {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("train config: lr must be > 0");
    if (epochs < warmup_epochs)
        throw std::invalid_argument("train config: epochs must be >= warmup epochs");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("train config: dropout must be in [0, 1)");
    if (bottleneck == 0) throw std::invalid_argument("train config: bottleneck must be > 0");
}

double cosine_lr(std::size_t epoch, const TrainConfig &cfg) {
    if (epoch >= cfg.epochs) throw std::invalid_argument("cosine_lr: epoch out of range");
    if (epoch < cfg.warmup_epochs) {
        return cfg.lr * static_cast<double>(epoch) /
               static_cast<double>(cfg.warmup_epochs);
    }
    const double progress = static_cast<double>(epoch - cfg.warmup_epochs) /
                            static_cast<double>(cfg.epochs - cfg.warmup_epochs);
    return cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void AdamWState::init(const std::vector<ad::NodePtr> &params) {
    m.clear();
    v.clear();
    t = 0;
    for (const auto &p : params) {
        m.emplace_back(p->val.rows, p->val.cols);
        v.emplace_back(p->val.rows, p->val.cols);
    }
}

void adamw_step(std::vector<ad::NodePtr> &params, AdamWState &state, double lr_t,
                double wd, const std::vector<bool> &decay_mask) {
    if (state.m.size() != params.size())
        throw std::invalid_argument("adamw_step: state not initialized for params");
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto &val = params[p]->val;
        auto &grad = params[p]->grad;
        for (std::size_t i = 0; i < val.size(); ++i) {
            const double g = grad.data[i];
            if (!std::isfinite(g)) {
                throw std::runtime_error("adamw_step: non-finite gradient in parameter " +
                                         std::to_string(p));
            }
            double &mi = state.m[p].data[i];
            double &vi = state.v[p].data[i];
            mi = state.beta1 * mi + (1.0 - state.beta1) * g;
            vi = state.beta2 * vi + (1.0 - state.beta2) * g * g;
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            if (wd > 0.0 && decay_mask[p]) val.data[i] *= 1.0 - lr_t * wd;
            val.data[i] -= lr_t * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// --- config file -----------------------------------------------------------

namespace {

std::string trim(const std::string &s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

bool parse_bool(const std::string &v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean value '" + v + "'");
}

}  // namespace

TrainConfig parse_train_config(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    TrainConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' at line " +
                                     std::to_string(lineno));
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (key == "lr") cfg.lr = std::stod(val);
        else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
        else if (key == "dropout") cfg.dropout = std::stod(val);
        else if (key == "batch_size") cfg.batch_size = std::stoul(val);
        else if (key == "epochs") cfg.epochs = std::stoul(val);
        else if (key == "warmup_epochs") cfg.warmup_epochs = std::stoul(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "method") cfg.method = method_from_name(val);
        else if (key == "bottleneck") cfg.bottleneck = std::stoul(val);
        else if (key == "residual") cfg.residual = parse_bool(val);
        else if (key == "zero_gate") cfg.zero_gate = parse_bool(val);
        else if (key == "aoft_star") cfg.aoft_star = parse_bool(val);
        else if (key == "decay_generators") cfg.decay_generators = parse_bool(val);
        else if (key == "adapter_mha") cfg.adapter_mha = parse_bool(val);
        else if (key == "lora_targets") {
            cfg.lora_targets.clear();
            std::stringstream ss(val);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                tok = trim(tok);
                if (!tok.empty()) cfg.lora_targets.push_back(tok);
            }
        } else {
            throw std::runtime_error("config: unknown key '" + key + "' at line " +
                                     std::to_string(lineno));
        }
    }
    cfg.validate();
    return cfg;
}

void write_train_config(const std::string &path, const TrainConfig &cfg) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("config: cannot write " + path);
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    f << "lr = " << num(cfg.lr) << "\n"
      << "weight_decay = " << num(cfg.weight_decay) << "\n"
      << "dropout = " << num(cfg.dropout) << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "epochs = " << cfg.epochs << "\n"
      << "warmup_epochs = " << cfg.warmup_epochs << "\n"
      << "seed = " << cfg.seed << "\n"
      << "method = " << method_name(cfg.method) << "\n"
      << "bottleneck = " << cfg.bottleneck << "\n"
      << "residual = " << (cfg.residual ? "true" : "false") << "\n"
      << "zero_gate = " << (cfg.zero_gate ? "true" : "false") << "\n"
      << "aoft_star = " << (cfg.aoft_star ? "true" : "false") << "\n"
      << "decay_generators = " << (cfg.decay_generators ? "true" : "false") << "\n"
      << "adapter_mha = " << (cfg.adapter_mha ? "true" : "false") << "\n";
    f << "lora_targets = ";
    for (std::size_t i = 0; i < cfg.lora_targets.size(); ++i) {
        if (i) f << ",";
        f << cfg.lora_targets[i];
    }
    f << "\n";
}

// --- engine ----------------------------------------------------------------

namespace {

Matrix column_from(const Vector &v) {
    Matrix m(v.size(), 1);
    m.data = v;
    return m;
}

std::pair<std::size_t, std::size_t> target_dims(const ModelConfig &cfg,
                                                const std::string &target) {
    const std::size_t d = cfg.dim;
    if (target == "wq" || target == "wk" || target == "wv" || target == "wo")
        return {d, d};
    if (target == "fc1") return {d, 4 * d};
    if (target == "fc2") return {4 * d, d};
    throw std::invalid_argument("unknown LoRA target '" + target + "'");
}

}  // namespace

FinetuneEngine::FinetuneEngine(const VitModel &model, const TrainConfig &cfg)
    : model_(model), cfg_(cfg) {
    cfg_.validate();
    const bool full = cfg_.method == PeftMethod::FullFinetune;
    backbone_ = backbone_nodes(model_, full);
    head_w_ = ad::param(model_.head_w);
    head_b_ = ad::param(model_.head_b);

    std::mt19937_64 init_rng(cfg_.seed ^ 0xa0f7a0f7a0f7a0f7ull);
    const std::size_t d = cfg_.bottleneck;
    const std::size_t dim = model_.cfg.dim;

    auto add_aoft_piece = [&](std::size_t layer, const std::string &target,
                              std::size_t n_down, std::size_t n_up) {
        AdapterPiece p;
        p.layer = layer;
        p.target = target;
        p.q_down = ad::param(column_from(init_generator(n_down, init_rng).q));
        p.q_up = ad::param(column_from(init_generator(n_up, init_rng).q));
        if (cfg_.aoft_star) p.lambda = ad::param(Matrix(1, d));  // zero init
        if (cfg_.zero_gate && !cfg_.aoft_star) p.gate = ad::param(Matrix(1, 1));
        pieces_.push_back(std::move(p));
    };

    switch (cfg_.method) {
        case PeftMethod::LinearProbe:
        case PeftMethod::FullFinetune:
            break;
        case PeftMethod::Lora: {
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (std::size_t l = 0; l < model_.cfg.layers; ++l) {
                for (const auto &t : cfg_.lora_targets) {
                    auto [rows, cols] = target_dims(model_.cfg, t);
                    AdapterPiece p;
                    p.layer = l;
                    p.target = t;
                    Matrix a(rows, d);
                    const double std_a = std::sqrt(1.0 / static_cast<double>(rows));
                    for (double &v : a.data) v = std_a * gauss(init_rng);
                    p.lora_a = ad::param(std::move(a));
                    p.lora_b = ad::param(Matrix(cols, d));  // zero: start at base
                    pieces_.push_back(std::move(p));
                }
            }
            break;
        }
        case PeftMethod::LoraAoft:
            for (std::size_t l = 0; l < model_.cfg.layers; ++l)
                for (const auto &t : cfg_.lora_targets) {
                    auto [rows, cols] = target_dims(model_.cfg, t);
                    add_aoft_piece(l, t, rows, cols);
                }
            break;
        case PeftMethod::AdapterAoft:
            for (std::size_t l = 0; l < model_.cfg.layers; ++l) {
                add_aoft_piece(l, "ffn", dim, dim);
                if (cfg_.adapter_mha) add_aoft_piece(l, "mha", dim, dim);
            }
            break;
        case PeftMethod::VptAoftShallow: {
            AdapterPiece p;
            p.layer = 0;
            p.target = "prompt";
            p.q_down = ad::param(column_from(init_generator(dim, init_rng).q));
            pieces_.push_back(std::move(p));
            break;
        }
        case PeftMethod::VptAoftDeep:
            for (std::size_t l = 0; l < model_.cfg.layers; ++l) {
                AdapterPiece p;
                p.layer = l;
                p.target = "prompt";
                p.q_down = ad::param(column_from(init_generator(dim, init_rng).q));
                pieces_.push_back(std::move(p));
            }
            break;
    }

    auto add_trainable = [&](const ad::NodePtr &n, bool decay) {
        trainables_.push_back(n);
        decay_mask_.push_back(decay);
    };
    if (full) {
        for (auto &n : backbone_) add_trainable(n, true);
    }
    for (auto &p : pieces_) {
        if (p.q_down) add_trainable(p.q_down, cfg_.decay_generators);
        if (p.q_up) add_trainable(p.q_up, cfg_.decay_generators);
        if (p.lambda) add_trainable(p.lambda, true);
        if (p.gate) add_trainable(p.gate, false);
        if (p.lora_a) add_trainable(p.lora_a, true);
        if (p.lora_b) add_trainable(p.lora_b, true);
    }
    add_trainable(head_w_, true);
    add_trainable(head_b_, false);

    opt_.init(trainables_);
    if (!full) {
        for (const auto &n : backbone_) frozen_checksums_.push_back(matrix_checksum(n->val));
    }
}

GraphHooks FinetuneEngine::make_hooks(bool training,
                                      std::mt19937_64 *dropout_rng) const {
    GraphHooks hooks;
    const TrainConfig cfg = cfg_;
    const std::size_t d = cfg.bottleneck;
    const std::size_t tokens = model_.cfg.tokens();
    const auto *pieces = &pieces_;

    auto find_piece = [pieces](std::size_t layer, const std::string &target)
        -> const AdapterPiece * {
        for (const auto &p : *pieces)
            if (p.layer == layer && p.target == target) return &p;
        return nullptr;
    };

    auto delta_of = [cfg, d](const AdapterPiece &p) -> ad::NodePtr {
        if (p.lora_a) return ad::matmul(p.lora_a, ad::transpose(p.lora_b));
        ad::NodePtr down = ad::ao_factor(p.q_down, d);
        if (p.lambda) down = ad::col_scale(down, p.lambda);
        if (p.gate) return ad::mul_scalar(
            ad::matmul(down, ad::transpose(ad::ao_factor(p.q_up, d))), p.gate);
        return ad::matmul(down, ad::transpose(ad::ao_factor(p.q_up, d)));
    };

    if (cfg.method == PeftMethod::Lora || cfg.method == PeftMethod::LoraAoft) {
        hooks.adapt_weight = [find_piece, delta_of](std::size_t layer,
                                                    const std::string &name,
                                                    const ad::NodePtr &base) {
            const AdapterPiece *p = find_piece(layer, name);
            if (!p) return base;
            return ad::add(base, delta_of(*p));
        };
    } else if (cfg.method == PeftMethod::AdapterAoft) {
        hooks.adapt_block = [find_piece, delta_of, cfg, training, dropout_rng](
                                std::size_t layer, const std::string &block,
                                const ad::NodePtr &h) {
            const AdapterPiece *p = find_piece(layer, block);
            if (!p) return h;
            ad::NodePtr out = ad::matmul(h, delta_of(*p));
            if (training && cfg.dropout > 0.0 && dropout_rng) {
                std::bernoulli_distribution keep(1.0 - cfg.dropout);
                Matrix m(out->val.rows, out->val.cols);
                const double inv_keep = 1.0 / (1.0 - cfg.dropout);
                for (double &v : m.data) v = keep(*dropout_rng) ? inv_keep : 0.0;
                out = ad::mask(out, std::move(m));
            }
            if (cfg.residual) out = ad::add(h, out);
            return out;
        };
    } else if (cfg.method == PeftMethod::VptAoftShallow ||
               cfg.method == PeftMethod::VptAoftDeep) {
        hooks.prompt_rows = d;
        hooks.prepend_prompts = [find_piece, d, tokens](std::size_t layer,
                                                        const ad::NodePtr &x) {
            const AdapterPiece *p = find_piece(layer, "prompt");
            ad::NodePtr base =
                x->val.rows > tokens ? ad::row_slice(x, 0, tokens) : x;
            if (!p) return base;  // shallow mode keeps layer-1 prompts in place
            return ad::vconcat(base, ad::transpose(ad::ao_factor(p->q_down, d)));
        };
    }
    return hooks;
}

Matrix FinetuneEngine::logits(const Sample &s) const {
    GraphHooks hooks = make_hooks(false, nullptr);
    return build_logits(model_, s, hooks, backbone_, head_w_, head_b_)->val;
}

double FinetuneEngine::evaluate(const Dataset &data) const {
    if (data.samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto &s : data.samples) {
        Matrix lg = logits(s);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < lg.cols; ++j)
            if (lg(0, j) > lg(0, arg)) arg = j;
        if (arg == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.samples.size());
}

double FinetuneEngine::epoch_pass(const Dataset &train_data,
                                  std::mt19937_64 &shuffle_rng,
                                  std::mt19937_64 &dropout_rng, double lr_t) {
    std::vector<std::size_t> order(train_data.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
        const double inv = 1.0 / static_cast<double>(end - start);
        ad::zero_grad(trainables_);
        double batch_loss = 0.0;
        for (std::size_t i = start; i < end; ++i) {
            const Sample &s = train_data.samples[order[i]];
            GraphHooks hooks = make_hooks(true, &dropout_rng);
            ad::NodePtr lg = build_logits(model_, s, hooks, backbone_, head_w_, head_b_);
            ad::NodePtr loss = ad::scale(ad::cross_entropy(lg, {s.label}), inv);
            batch_loss += loss->val(0, 0);
            ad::backward(loss);
        }
        if (lr_t > 0.0) {
            adamw_step(trainables_, opt_, lr_t, cfg_.weight_decay, decay_mask_);
            // Clip generator head entries back inside the pole guard band.
            for (auto &p : pieces_) {
                for (const auto &q : {p.q_down, p.q_up}) {
                    if (q && 1.0 + q->val(0, 0) <= kPoleEps)
                        q->val(0, 0) = -1.0 + kPoleEps;
                }
            }
        }
        loss_sum += batch_loss;
        ++batches;
    }
    return batches ? loss_sum / static_cast<double>(batches) : 0.0;
}

void FinetuneEngine::verify_frozen() const {
    if (cfg_.method == PeftMethod::FullFinetune) return;
    for (std::size_t i = 0; i < backbone_.size(); ++i) {
        if (matrix_checksum(backbone_[i]->val) != frozen_checksums_[i]) {
            throw std::runtime_error("frozen backbone weight " + std::to_string(i) +
                                     " was mutated during training");
        }
    }
}

std::vector<EpochMetrics> FinetuneEngine::train(const Dataset &train_data,
                                                const Dataset &eval_data) {
    std::mt19937_64 shuffle_rng(cfg_.seed ^ 0x51c0ffee51c0ffeeull);
    std::mt19937_64 dropout_rng(cfg_.seed ^ 0xd0d0d0d0d0d0d0d0ull);
    std::vector<EpochMetrics> metrics;
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        const double lr_t = cosine_lr(epoch, cfg_);
        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = epoch_pass(train_data, shuffle_rng, dropout_rng, lr_t);
        if (!std::isfinite(em.train_loss))
            throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch));
        verify_frozen();
        em.eval_accuracy = evaluate(eval_data);
        for (const auto &p : pieces_) {
            for (const auto &q : {p.q_down, p.q_up}) {
                if (!q) continue;
                em.generator_norms.push_back(norm2(q->val.data));
                GeneratorVector g{q->val.data};
                const std::size_t d = std::min(cfg_.bottleneck, g.n());
                em.max_ortho_deviation = std::max(
                    em.max_ortho_deviation, build_ortho(g, d).deviation);
            }
        }
        em.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        metrics.push_back(std::move(em));
    }
    return metrics;
}

std::size_t FinetuneEngine::trainable_param_count() const {
    std::size_t n = 0;
    for (const auto &p : trainables_) n += p->val.size();
    return n;
}

VitModel FinetuneEngine::materialized_model() const {
    VitModel out = model_;
    if (cfg_.method == PeftMethod::FullFinetune) {
        write_back(out, backbone_, head_w_, head_b_);
    } else {
        out.head_w = head_w_->val;
        out.head_b = head_b_->val;
    }
    return out;
}

std::vector<NamedMatrix> FinetuneEngine::adapter_factors() const {
    std::vector<NamedMatrix> out;
    for (const auto &p : pieces_) {
        const std::string base = "L" + std::to_string(p.layer) + "." + p.target;
        if (p.lora_a) {
            out.push_back({base + ".down", p.lora_a->val});
            out.push_back({base + ".up", p.lora_b->val});
        } else if (p.target == "prompt") {
            GeneratorVector g{p.q_down->val.data};
            out.push_back({base, build_ortho(g, cfg_.bottleneck).factor});
        } else {
            GeneratorVector gd{p.q_down->val.data};
            GeneratorVector gu{p.q_up->val.data};
            out.push_back({base + ".down", build_ortho(gd, cfg_.bottleneck).factor});
            out.push_back({base + ".up", build_ortho(gu, cfg_.bottleneck).factor});
        }
    }
    return out;
}

std::vector<std::uint64_t> FinetuneEngine::backbone_checksums() const {
    std::vector<std::uint64_t> out;
    for (const auto &n : backbone_) out.push_back(matrix_checksum(n->val));
    return out;
}

VitModel pretrain_synthetic(const ModelConfig &cfg, std::uint64_t task_seed,
                            std::size_t per_class, const TrainConfig &tcfg,
                            double target_accuracy,
                            std::vector<EpochMetrics> *metrics_out) {
    VitModel model = init_model(cfg);
    Dataset data = make_blob_dataset(cfg, task_seed, per_class);
    TrainConfig full = tcfg;
    full.method = PeftMethod::FullFinetune;
    FinetuneEngine engine(model, full);
    std::vector<EpochMetrics> metrics = engine.train(data, data);
    if (metrics_out) *metrics_out = metrics;
    double best_acc = 0.0;
    for (const auto &m : metrics) best_acc = std::max(best_acc, m.eval_accuracy);
    if (best_acc < target_accuracy) {
        throw std::runtime_error(
            "pretrain did not reach target accuracy: best " + std::to_string(best_acc) +
            " < " + std::to_string(target_accuracy) + " after " +
            std::to_string(full.epochs) + " epochs");
    }
    return engine.materialized_model();
}

// --- checkpoints and reports ----------------------------------------------

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_model(const std::string &dir, const VitModel &model) {
    fs::create_directories(dir);
    json manifest;
    manifest["kind"] = "vit-checkpoint";
    manifest["config"] = {
        {"image_size", model.cfg.image_size}, {"patch_size", model.cfg.patch_size},
        {"dim", model.cfg.dim},               {"layers", model.cfg.layers},
        {"heads", model.cfg.heads},           {"classes", model.cfg.classes},
        {"seed", model.cfg.seed},
    };
    std::vector<std::string> names{"patch_embed", "cls_token", "pos_embed"};
    std::vector<const Matrix *> mats = model.backbone_matrices();
    for (std::size_t l = 0; l < model.cfg.layers; ++l) {
        for (const char *n : {"wq", "wk", "wv", "wo", "fc1", "fc2", "ln1_gamma",
                              "ln1_beta", "ln2_gamma", "ln2_beta"}) {
            names.push_back("layer" + std::to_string(l) + "." + n);
        }
    }
    names.push_back("final_ln_gamma");
    names.push_back("final_ln_beta");
    names.push_back("head_w");
    names.push_back("head_b");
    mats.push_back(&model.head_w);
    mats.push_back(&model.head_b);

    json blobs = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::string file = names[i] + ".mtx";
        write_mtx((fs::path(dir) / file).string(), *mats[i]);
        blobs.push_back({{"name", names[i]},
                         {"file", file},
                         {"checksum", matrix_checksum(*mats[i])}});
    }
    manifest["blobs"] = blobs;
    std::ofstream f(fs::path(dir) / "manifest.json");
    f << manifest.dump(2) << "\n";
}

VitModel load_model(const std::string &dir) {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw std::runtime_error("load_model: no manifest in " + dir);
    json manifest = json::parse(f);
    if (manifest.value("kind", "") != "vit-checkpoint")
        throw std::runtime_error("load_model: not a model checkpoint: " + dir);
    ModelConfig cfg;
    const json &c = manifest.at("config");
    cfg.image_size = c.at("image_size");
    cfg.patch_size = c.at("patch_size");
    cfg.dim = c.at("dim");
    cfg.layers = c.at("layers");
    cfg.heads = c.at("heads");
    cfg.classes = c.at("classes");
    cfg.seed = c.at("seed");

    VitModel model = init_model(cfg);
    std::map<std::string, Matrix *> slots;
    slots["patch_embed"] = &model.patch_embed;
    slots["cls_token"] = &model.cls_token;
    slots["pos_embed"] = &model.pos_embed;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        auto &lay = model.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        slots[p + "wq"] = &lay.wq;
        slots[p + "wk"] = &lay.wk;
        slots[p + "wv"] = &lay.wv;
        slots[p + "wo"] = &lay.wo;
        slots[p + "fc1"] = &lay.fc1;
        slots[p + "fc2"] = &lay.fc2;
        slots[p + "ln1_gamma"] = &lay.ln1_gamma;
        slots[p + "ln1_beta"] = &lay.ln1_beta;
        slots[p + "ln2_gamma"] = &lay.ln2_gamma;
        slots[p + "ln2_beta"] = &lay.ln2_beta;
    }
    slots["final_ln_gamma"] = &model.final_ln_gamma;
    slots["final_ln_beta"] = &model.final_ln_beta;
    slots["head_w"] = &model.head_w;
    slots["head_b"] = &model.head_b;

    for (const auto &blob : manifest.at("blobs")) {
        const std::string name = blob.at("name");
        auto it = slots.find(name);
        if (it == slots.end())
            throw std::runtime_error("load_model: unexpected blob '" + name + "'");
        Matrix m = read_mtx((fs::path(dir) / blob.at("file").get<std::string>()).string());
        if (matrix_checksum(m) != blob.at("checksum").get<std::uint64_t>())
            throw std::runtime_error("load_model: checksum mismatch for '" + name + "'");
        *it->second = std::move(m);
    }
    return model;
}

void save_adapters(const std::string &dir, const FinetuneEngine &engine) {
    fs::create_directories(dir);
    json manifest;
    manifest["kind"] = "adapter-checkpoint";
    manifest["method"] = method_name(engine.config().method);
    manifest["bottleneck"] = engine.config().bottleneck;
    json items = json::array();
    std::size_t idx = 0;
    for (const auto &p : engine.pieces()) {
        json item;
        item["layer"] = p.layer;
        item["target"] = p.target;
        auto dump = [&](const char *role, const ad::NodePtr &n) {
            if (!n) return;
            const std::string file =
                "piece" + std::to_string(idx) + "_" + role + ".mtx";
            write_mtx((fs::path(dir) / file).string(), n->val);
            item[role] = file;
        };
        dump("q_down", p.q_down);
        dump("q_up", p.q_up);
        dump("lambda", p.lambda);
        dump("gate", p.gate);
        dump("lora_a", p.lora_a);
        dump("lora_b", p.lora_b);
        items.push_back(item);
        ++idx;
    }
    manifest["pieces"] = items;
    std::ofstream f(fs::path(dir) / "manifest.json");
    f << manifest.dump(2) << "\n";
}

void write_metrics_csv(const std::string &path,
                       const std::vector<EpochMetrics> &metrics) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,train_loss,eval_accuracy,max_ortho_deviation,generator_norms\n";
    for (const auto &m : metrics) {
        f << m.epoch << "," << fmt17(m.train_loss) << "," << fmt17(m.eval_accuracy)
          << "," << fmt17(m.max_ortho_deviation) << ",";
        for (std::size_t i = 0; i < m.generator_norms.size(); ++i) {
            if (i) f << ";";
            f << fmt17(m.generator_norms[i]);
        }
        f << "\n";
    }
}

void write_summary_json(const std::string &path, const TrainConfig &cfg,
                        const std::vector<EpochMetrics> &metrics) {
    json j;
    j["method"] = method_name(cfg.method);
    j["epochs"] = cfg.epochs;
    j["lr"] = cfg.lr;
    j["seed"] = cfg.seed;
    j["bottleneck"] = cfg.bottleneck;
    if (!metrics.empty()) {
        j["final_train_loss"] = metrics.back().train_loss;
        j["final_eval_accuracy"] = metrics.back().eval_accuracy;
        j["final_max_ortho_deviation"] = metrics.back().max_ortho_deviation;
    }
    double wall = 0.0;
    for (const auto &m : metrics) wall += m.wall_seconds;
    j["metadata"] = {{"total_wall_seconds", wall}};
    std::ofstream f(path, std::ios::trunc);
    f << j.dump(2) << "\n";
}

}  // namespace aoft
