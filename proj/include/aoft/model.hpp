#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aoft/autodiff.hpp"
#include "aoft/linalg.hpp"

namespace aoft {

struct ModelConfig {
    std::size_t image_size = 16;
    std::size_t patch_size = 4;
    std::size_t dim = 64;       // D
    std::size_t layers = 4;     // L
    std::size_t heads = 4;      // H
    std::size_t classes = 2;
    std::uint64_t seed = 0;

    std::size_t patches() const {
        return (image_size / patch_size) * (image_size / patch_size);
    }
    std::size_t tokens() const { return patches() + 1; }  // + [cls]
    std::size_t head_dim() const { return dim / heads; }
    void validate() const;
};

struct EncoderLayerWeights {
    Matrix wq, wk, wv, wo;  // D x D
    Matrix fc1;             // D x 4D
    Matrix fc2;             // 4D x D
    Matrix ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;  // 1 x D
};

struct VitModel {
    ModelConfig cfg;
    Matrix patch_embed;  // P^2 x D
    Matrix cls_token;    // 1 x D
    Matrix pos_embed;    // tokens x D
    std::vector<EncoderLayerWeights> layers;
    Matrix final_ln_gamma, final_ln_beta;  // 1 x D
    Matrix head_w;  // D x classes
    Matrix head_b;  // 1 x classes

    std::size_t backbone_param_count() const;  // everything except the head
    std::vector<const Matrix *> backbone_matrices() const;
    std::vector<std::uint64_t> backbone_checksums() const;
};

VitModel init_model(const ModelConfig &cfg);

// One image flattened to patch rows: patches x patch_size^2.
struct Sample {
    Matrix patches;
    std::size_t label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t classes = 0;
};

// Seed-parameterized Gaussian-blob classification task. Each class owns a
// smooth prototype image; samples are noisy draws of it.
Dataset make_blob_dataset(const ModelConfig &cfg, std::uint64_t task_seed,
                          std::size_t per_class, double noise_std = 0.35);

// Non-AD attention head used by the unit tests (single head, per the
// scalar-loop oracle checks).
Matrix attention_head(const Matrix &x, const Matrix &wq, const Matrix &wk,
                      const Matrix &wv);

// Frozen-weight forward of one sample through plain backbone + head.
Matrix forward_logits(const VitModel &model, const Sample &s);

double eval_accuracy(const VitModel &model, const Dataset &data);

// --- AD graph construction -------------------------------------------------

// Per-matrix adaptation hook: given the constant base weight node, return the
// effective weight node (base plus whatever delta the scheme adds).
// Identity by default.
struct GraphHooks {
    std::function<ad::NodePtr(std::size_t layer, const std::string &name,
                              const ad::NodePtr &base)>
        adapt_weight;
    // Adapter bottleneck applied to a block output (h is tokens x D).
    std::function<ad::NodePtr(std::size_t layer, const std::string &block,
                              const ad::NodePtr &h)>
        adapt_block;
    // Prompt rows prepended to the layer input (VPT); returns possibly taller x.
    std::function<ad::NodePtr(std::size_t layer, const ad::NodePtr &x)>
        prepend_prompts;
    std::size_t prompt_rows = 0;  // rows added by prepend_prompts per layer
};

struct ModelGraph {
    std::vector<ad::NodePtr> backbone_params;  // empty unless train_backbone
    ad::NodePtr head_w, head_b;
    // Weight nodes by role, for checksum-free reuse; populated on build.
};

// Builds logits for one sample. `params` nodes for the backbone/head are
// supplied by the caller so they persist across steps.
ad::NodePtr build_logits(const VitModel &model, const Sample &s,
                         const GraphHooks &hooks,
                         const std::vector<ad::NodePtr> &backbone_nodes,
                         const ad::NodePtr &head_w, const ad::NodePtr &head_b);

// Flattens model backbone weights into nodes, ordered to match
// backbone_matrices(). requires_grad set per train_backbone.
std::vector<ad::NodePtr> backbone_nodes(const VitModel &model, bool train_backbone);

// Writes updated node values back into the model (full fine-tuning path).
void write_back(VitModel &model, const std::vector<ad::NodePtr> &nodes,
                const ad::NodePtr &head_w, const ad::NodePtr &head_b);

}  // namespace aoft
