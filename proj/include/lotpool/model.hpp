// SPDX-License-Identifier: Apache-2.0
//
// ReLU multilayer perceptron with hand-written backprop. Parameters are laid
// out as W_1, b_1, W_2, b_2, ... with W_l of shape [fan_in, fan_out].
#pragma once

#include <cstdint>
#include <vector>

#include "lotpool/data.hpp"
#include "lotpool/mask.hpp"
#include "lotpool/tensor.hpp"

namespace lotpool {

struct MlpConfig {
    std::vector<std::size_t> layer_sizes;  // [d_in, h_1, ..., h_k, n_classes]
    std::uint64_t init_seed = 0;

    void validate() const;
    bool operator==(const MlpConfig&) const = default;
};

struct Batch {
    Tensor inputs;            // [B, d_in]
    std::vector<int> labels;  // B class indices
};

/// Glorot-uniform weights, zero biases; deterministic in init_seed.
ParamSet init_params(const MlpConfig& config);

/// Recovers [d_in, ..., n_classes] from a ParamSet; throws AlignmentError on a malformed layout.
std::vector<std::size_t> layer_sizes_of(const ParamSet& params);

/// Logits [B, n_classes]. Masked-out weights act as exact zeros.
Tensor forward(const ParamSet& params, const Mask* mask, const Tensor& inputs);

struct LossAndGrads {
    double loss = 0.0;  // mean softmax cross-entropy
    ParamSet grads;     // zero at masked-out positions
};

LossAndGrads loss_and_grads(const ParamSet& params, const Mask* mask, const Batch& batch);

/// Index of the largest logit; ties go to the lowest index.
int argmax_row(const float* logits, std::size_t n);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

EvalResult evaluate(const ParamSet& params, const Mask* mask, const Dataset& data);

/// Logits over a full dataset, evaluated in fixed-size chunks.
Tensor dataset_logits(const ParamSet& params, const Mask* mask, const Dataset& data);

/// Argmax prediction per row of `data`.
std::vector<int> predict(const ParamSet& params, const Mask* mask, const Dataset& data);

}  // namespace lotpool
