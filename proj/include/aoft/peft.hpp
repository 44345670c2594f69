#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoft/aoft_core.hpp"
#include "aoft/linalg.hpp"

namespace aoft {

enum class Scheme { LoraAoft, AdapterAoft, VptAoft };

// A frozen base weight plus the generated low-rank delta that adapts it.
// Only q_down, q_up, lambda (and the optional gate) are trainable.
struct AdaptedLayer {
    Matrix base;  // frozen
    Scheme scheme = Scheme::LoraAoft;
    GeneratorVector q_down;
    GeneratorVector q_up;
    std::size_t d = 0;
    std::optional<Vector> lambda;  // AOFT* per-column scaling of the down factor
    bool residual = true;          // Adapter scheme only
    bool use_gate = false;         // zero-init scalar gate on the delta
    double gate = 0.0;
};

// AO(q_down) with AOFT* column scaling and the optional gate applied.
Matrix scaled_down_factor(const AdaptedLayer &layer);

// The low-rank delta AO(q_down) [. diag(lambda)] AO(q_up)^T, gate included.
Matrix aoft_delta(const AdaptedLayer &layer);

// x (W + delta), the LoRA-style side path folded into the base weight.
Matrix lora_aoft_forward(const Matrix &x, const AdaptedLayer &layer);

// h AO(q_down) AO(q_up)^T, plus h itself when the residual flag is set.
Matrix adapter_aoft_forward(const Matrix &h, const AdaptedLayer &layer);

// Stacks n_prompts generated prompt rows (columns of AO(q), transposed)
// below the token rows.
Matrix vpt_aoft_prepend(const Matrix &x, const GeneratorVector &q_prompt,
                        std::size_t n_prompts);

enum class PeftMethod {
    LinearProbe,
    FullFinetune,
    Lora,       // plain LoRA baseline, trained A/B factors
    LoraAoft,
    AdapterAoft,
    VptAoftShallow,
    VptAoftDeep,
};

std::string method_name(PeftMethod m);
PeftMethod method_from_name(const std::string &name);

struct BudgetConfig {
    PeftMethod method = PeftMethod::LoraAoft;
    std::size_t dim = 64;               // hidden dimension D
    std::size_t bottleneck = 8;         // d
    std::size_t layers = 4;
    std::size_t adapted_per_layer = 2;  // matrices (LoRA) or modules (Adapter)
    std::size_t classes = 2;
    bool aoft_star = false;
    bool use_gate = false;
    std::size_t backbone_params = 0;    // census of frozen weights
};

struct ParamBudget {
    std::size_t trainable_count = 0;
    std::size_t frozen_count = 0;
    std::vector<std::pair<std::string, std::size_t>> breakdown;
};

ParamBudget param_count(const BudgetConfig &cfg);

// Order-independent content hash used for frozen-weight invariance checks.
std::uint64_t matrix_checksum(const Matrix &m);

}  // namespace aoft
