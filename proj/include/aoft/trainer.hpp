#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoft/autodiff.hpp"
#include "aoft/model.hpp"
#include "aoft/peft.hpp"

namespace aoft {

struct TrainConfig {
    double lr = 0.01;
    double weight_decay = 0.0;
    double dropout = 0.0;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::size_t warmup_epochs = 10;
    std::uint64_t seed = 0;
    PeftMethod method = PeftMethod::LoraAoft;
    std::size_t bottleneck = 8;
    bool residual = true;          // adapter scheme
    bool zero_gate = false;        // scalar gate on the delta, zero init
    bool aoft_star = false;        // learnable lambda column scaling
    bool decay_generators = false; // weight decay on q vectors (off by default)
    std::vector<std::string> lora_targets{"wq", "wv"};
    bool adapter_mha = false;      // adapter on MHA in addition to FFN

    void validate() const;
};

TrainConfig parse_train_config(const std::string &path);
void write_train_config(const std::string &path, const TrainConfig &cfg);

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double eval_accuracy = 0.0;
    std::vector<double> generator_norms;
    double max_ortho_deviation = 0.0;
    double wall_seconds = 0.0;  // reported in the JSON summary only
};

// Decoupled-weight-decay adaptive optimizer over a flat parameter list.
struct AdamWState {
    std::vector<Matrix> m, v;
    std::size_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init(const std::vector<ad::NodePtr> &params);
};

// decay_mask[i] selects which params receive weight decay.
void adamw_step(std::vector<ad::NodePtr> &params, AdamWState &state, double lr_t,
                double wd, const std::vector<bool> &decay_mask);

// Linear warmup to lr over warmup_epochs, then cosine decay to 0.
double cosine_lr(std::size_t epoch, const TrainConfig &cfg);

// One adapted location: a weight-matrix target ("wq"...), a block target
// ("ffn"/"mha"), or a prompt slot.
struct AdapterPiece {
    std::size_t layer = 0;
    std::string target;
    ad::NodePtr q_down, q_up;  // N x 1 columns (q_down doubles as q_prompt)
    ad::NodePtr lambda;        // 1 x d, AOFT* only
    ad::NodePtr gate;          // 1 x 1, zero-gate only
    ad::NodePtr lora_a, lora_b;  // plain-LoRA baseline factors, D x d
};

struct NamedMatrix {
    std::string name;
    Matrix value;
};

// Holds the model copy, trainable parameter nodes, and scheme wiring for one
// fine-tuning (or from-scratch training) run.
class FinetuneEngine {
  public:
    FinetuneEngine(const VitModel &model, const TrainConfig &cfg);

    std::vector<EpochMetrics> train(const Dataset &train_data,
                                    const Dataset &eval_data);

    double evaluate(const Dataset &data) const;
    Matrix logits(const Sample &s) const;

    std::size_t trainable_param_count() const;
    const TrainConfig &config() const { return cfg_; }
    const std::vector<AdapterPiece> &pieces() const { return pieces_; }
    const VitModel &model() const { return model_; }
    VitModel materialized_model() const;  // backbone/head with trained values

    // Realized adapter factors (AO factors, LoRA A/B, prompt matrices) for
    // the geometry diagnostics.
    std::vector<NamedMatrix> adapter_factors() const;

    std::vector<std::uint64_t> backbone_checksums() const;

  private:
    GraphHooks make_hooks(bool training, std::mt19937_64 *dropout_rng) const;
    void verify_frozen() const;
    double epoch_pass(const Dataset &train_data, std::mt19937_64 &shuffle_rng,
                      std::mt19937_64 &dropout_rng, double lr_t);

    VitModel model_;
    TrainConfig cfg_;
    std::vector<ad::NodePtr> backbone_;
    ad::NodePtr head_w_, head_b_;
    std::vector<AdapterPiece> pieces_;
    std::vector<ad::NodePtr> trainables_;
    std::vector<bool> decay_mask_;
    std::vector<std::uint64_t> frozen_checksums_;
    AdamWState opt_;
};

// From-scratch training on a synthetic task; throws after the patience
// budget if the accuracy target is never reached.
VitModel pretrain_synthetic(const ModelConfig &cfg, std::uint64_t task_seed,
                            std::size_t per_class, const TrainConfig &tcfg,
                            double target_accuracy = 0.95,
                            std::vector<EpochMetrics> *metrics_out = nullptr);

// Checkpoint = JSON manifest + MTX1 blobs in a directory.
void save_model(const std::string &dir, const VitModel &model);
VitModel load_model(const std::string &dir);

void save_adapters(const std::string &dir, const FinetuneEngine &engine);

void write_metrics_csv(const std::string &path,
                       const std::vector<EpochMetrics> &metrics);
void write_summary_json(const std::string &path, const TrainConfig &cfg,
                        const std::vector<EpochMetrics> &metrics);

}  // namespace aoft
