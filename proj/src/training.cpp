// SPDX-License-Identifier: Apache-2.0
#include "lotpool/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lotpool/errors.hpp"
#include "lotpool/model.hpp"
#include "lotpool/random.hpp"

namespace lotpool {

void TrainConfig::validate() const {
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (!std::isfinite(base_lr) || base_lr < 0.0) throw DomainError("base_lr must be finite and >= 0");
    if (!(lr_drop_factor > 0.0) || !std::isfinite(lr_drop_factor)) throw DomainError("lr_drop_factor must be > 0");
    for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
        if (lr_drop_epochs[i] < 0 || lr_drop_epochs[i] >= epochs)
            throw DomainError("lr drop epochs must lie in [0, epochs)");
        if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])
            throw DomainError("lr drop epochs must be strictly increasing");
    }
    if (warmup_epochs < 0) throw DomainError("warmup_epochs must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must lie in [0,1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw DomainError("weight_decay must be >= 0");
    if (rewind_epoch < 0 || rewind_epoch >= epochs) throw DomainError("rewind_epoch must lie in [0, epochs)");
}

double lr_at(const TrainConfig& config, int epoch, int step_in_epoch, int steps_per_epoch) {
    const long warmup_steps = static_cast<long>(config.warmup_epochs) * steps_per_epoch;
    const long step = static_cast<long>(epoch) * steps_per_epoch + step_in_epoch;
    if (step < warmup_steps)
        return config.base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    const auto drops = std::count_if(config.lr_drop_epochs.begin(), config.lr_drop_epochs.end(),
                                     [epoch](int e) { return e <= epoch; });
    return config.base_lr / std::pow(config.lr_drop_factor, static_cast<double>(drops));
}

namespace {

Batch gather(const Dataset& data, std::span<const std::size_t> rows) {
    const std::size_t d = data.input_dim();
    std::vector<float> x(rows.size() * d);
    std::vector<int> y(rows.size());
    const auto src = data.features.data();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                    x.begin() + static_cast<std::ptrdiff_t>(r * d));
        y[r] = data.labels[rows[r]];
    }
    return {Tensor({rows.size(), d}, std::move(x)), std::move(y)};
}

}  // namespace

TrainResult train(const ParamSet& params, const Mask* mask, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& config) {
    config.validate();
    if (train_set.size() == 0) throw DomainError("training set is empty");
    const auto batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t steps_per_epoch = train_set.size() / batch;
    if (steps_per_epoch == 0)
        throw DomainError("training set of " + std::to_string(train_set.size()) + " rows is smaller than one batch");

    TrainResult result;
    ParamSet w = mask ? apply_mask(params, *mask) : params;
    ParamSet velocity = zeros_like(w);
    if (config.rewind_epoch == 0) result.rewind_params = w;

    // Per weight entry, the mask bits (nullptr for biases or when unmasked).
    std::vector<const std::uint8_t*> bits(w.num_entries(), nullptr);
    if (mask) {
        std::size_t m = 0;
        for (std::size_t e = 0; e < w.num_entries(); ++e)
            if (w[e].is_weight()) bits[e] = (*mask)[m++].bits.data();
    }

    const auto momentum = static_cast<float>(config.momentum);
    const auto decay = static_cast<float>(config.weight_decay);
    std::vector<std::size_t> order(train_set.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(Rng::mix(config.shuffle_seed) + static_cast<std::uint64_t>(epoch));
        rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const Batch b = gather(train_set, std::span<const std::size_t>(order).subspan(s * batch, batch));
            const LossAndGrads lg = loss_and_grads(w, mask, b);
            loss_sum += lg.loss;
            const auto lr = static_cast<float>(
                lr_at(config, epoch, static_cast<int>(s), static_cast<int>(steps_per_epoch)));
            for (std::size_t e = 0; e < w.num_entries(); ++e) {
                auto wv = w[e].tensor.data();
                auto vv = velocity[e].tensor.data();
                auto gv = lg.grads[e].tensor.data();
                const std::uint8_t* keep = bits[e];
                for (std::size_t i = 0; i < wv.size(); ++i) {
                    if (keep && !keep[i]) continue;
                    const float g = gv[i] + decay * wv[i];
                    vv[i] = momentum * vv[i] + g;
                    wv[i] -= lr * vv[i];
                }
            }
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
        if (val_set) stats.val_accuracy = evaluate(w, mask, *val_set).accuracy;
        result.history.push_back(stats);
        if (epoch + 1 == config.rewind_epoch) result.rewind_params = w;
    }
    result.final_params = std::move(w);
    return result;
}

}  // namespace lotpool
