// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lotpool/data.hpp"
#include "lotpool/mask.hpp"
#include "lotpool/tensor.hpp"

namespace lotpool {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 128;
    double base_lr = 0.1;
    double lr_drop_factor = 10.0;    // lr is divided by this at every drop epoch
    std::vector<int> lr_drop_epochs;  // strictly increasing, each < epochs
    int warmup_epochs = 0;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int rewind_epoch = 0;             // snapshot taken after this many completed epochs
    std::uint64_t shuffle_seed = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct EpochStats {
    double train_loss = 0.0;
    std::optional<double> val_accuracy;
};

struct TrainResult {
    ParamSet final_params;
    ParamSet rewind_params;
    std::vector<EpochStats> history;
};

/// Learning rate for a step. Warmup ramps linearly from base/warmup_steps up to
/// base over all warmup steps; afterwards base / factor^(#drop epochs <= epoch).
double lr_at(const TrainConfig& config, int epoch, int step_in_epoch, int steps_per_epoch);

/// Minibatch SGD with momentum and L2 weight decay. Incomplete final batches
/// are dropped. Masked-out weights start at zero and stay exactly zero.
/// A fresh momentum buffer is used for every call.
TrainResult train(const ParamSet& params, const Mask* mask, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& config);

}  // namespace lotpool
