#include "aoft/peft.hpp"

#include <cstring>
#include <stdexcept>

namespace aoft {

Matrix scaled_down_factor(const AdaptedLayer &layer) {
    OrthoFactor down = build_ortho(layer.q_down, layer.d);
    Matrix f = std::move(down.factor);
    if (layer.lambda) {
        if (layer.lambda->size() != layer.d) {
            throw std::invalid_argument("lambda length " +
                                        std::to_string(layer.lambda->size()) +
                                        " does not match d = " +
                                        std::to_string(layer.d));
        }
        for (std::size_t i = 0; i < f.rows; ++i)
            for (std::size_t j = 0; j < f.cols; ++j) f(i, j) *= (*layer.lambda)[j];
    }
    if (layer.use_gate) f = scale(f, layer.gate);
    return f;
}

Matrix aoft_delta(const AdaptedLayer &layer) {
    Matrix down = scaled_down_factor(layer);
    OrthoFactor up = build_ortho(layer.q_up, layer.d);
    return matmul(down, transpose(up.factor));
}

Matrix lora_aoft_forward(const Matrix &x, const AdaptedLayer &layer) {
    if (layer.scheme != Scheme::LoraAoft) {
        throw std::invalid_argument("lora_aoft_forward: layer scheme is not LoRA");
    }
    if (x.cols != layer.base.rows) {
        throw std::invalid_argument("lora_aoft_forward: x " + shape_str(x) +
                                    " does not conform with W " +
                                    shape_str(layer.base));
    }
    return matmul(x, add(layer.base, aoft_delta(layer)));
}

Matrix adapter_aoft_forward(const Matrix &h, const AdaptedLayer &layer) {
    if (layer.scheme != Scheme::AdapterAoft) {
        throw std::invalid_argument("adapter_aoft_forward: layer scheme is not Adapter");
    }
    Matrix out = matmul(h, aoft_delta(layer));
    if (layer.residual) out = add(out, h);
    return out;
}

Matrix vpt_aoft_prepend(const Matrix &x, const GeneratorVector &q_prompt,
                        std::size_t n_prompts) {
    if (n_prompts == 0) return x;
    if (q_prompt.n() != x.cols) {
        throw std::invalid_argument("vpt_aoft_prepend: prompt vector length " +
                                    std::to_string(q_prompt.n()) +
                                    " does not match token width " +
                                    std::to_string(x.cols));
    }
    OrthoFactor f = build_ortho(q_prompt, n_prompts);  // D x n_prompts
    Matrix out(x.rows + n_prompts, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = x(i, j);
    for (std::size_t p = 0; p < n_prompts; ++p)
        for (std::size_t j = 0; j < x.cols; ++j)
            out(x.rows + p, j) = f.factor(j, p);  // prompt row = column p, transposed
    return out;
}

std::string method_name(PeftMethod m) {
    switch (m) {
        case PeftMethod::LinearProbe: return "linear-probe";
        case PeftMethod::FullFinetune: return "full-finetune";
        case PeftMethod::Lora: return "lora";
        case PeftMethod::LoraAoft: return "lora-aoft";
        case PeftMethod::AdapterAoft: return "adapter-aoft";
        case PeftMethod::VptAoftShallow: return "vpt-aoft-shallow";
        case PeftMethod::VptAoftDeep: return "vpt-aoft-deep";
    }
    return "unknown";
}

PeftMethod method_from_name(const std::string &name) {
    for (PeftMethod m : {PeftMethod::LinearProbe, PeftMethod::FullFinetune,
                         PeftMethod::Lora, PeftMethod::LoraAoft,
                         PeftMethod::AdapterAoft, PeftMethod::VptAoftShallow,
                         PeftMethod::VptAoftDeep}) {
        if (method_name(m) == name) return m;
    }
    throw std::invalid_argument("unknown PEFT method: " + name);
}

ParamBudget param_count(const BudgetConfig &cfg) {
    ParamBudget b;
    const std::size_t head = cfg.dim * cfg.classes + cfg.classes;
    const std::size_t adapted = cfg.layers * cfg.adapted_per_layer;

    auto push = [&](const std::string &name, std::size_t count) {
        b.breakdown.emplace_back(name, count);
        b.trainable_count += count;
    };

    switch (cfg.method) {
        case PeftMethod::LinearProbe:
            break;
        case PeftMethod::FullFinetune:
            push("backbone", cfg.backbone_params);
            break;
        case PeftMethod::Lora:
            push("lora-factors", adapted * 2 * cfg.dim * cfg.bottleneck);
            break;
        case PeftMethod::LoraAoft:
        case PeftMethod::AdapterAoft: {
            std::size_t per = 2 * cfg.dim;
            if (cfg.aoft_star) per += cfg.bottleneck;
            if (cfg.use_gate) per += 1;
            push("generator-vectors", adapted * per);
            break;
        }
        case PeftMethod::VptAoftShallow:
            push("prompt-generators", cfg.dim);
            break;
        case PeftMethod::VptAoftDeep:
            push("prompt-generators", cfg.layers * cfg.dim);
            break;
    }
    push("head", head);
    b.frozen_count = cfg.method == PeftMethod::FullFinetune ? 0 : cfg.backbone_params;
    return b;
}

std::uint64_t matrix_checksum(const Matrix &m) {
    // FNV-1a over the raw fp64 payload plus the shape.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const unsigned char *p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    std::uint64_t rows = m.rows, cols = m.cols;
    mix(reinterpret_cast<const unsigned char *>(&rows), 8);
    mix(reinterpret_cast<const unsigned char *>(&cols), 8);
    mix(reinterpret_cast<const unsigned char *>(m.data.data()),
        m.data.size() * sizeof(double));
    return h;
}

}  // namespace aoft
