// SPDX-License-Identifier: Apache-2.0
//
// Global unstructured magnitude pruning over every weight tensor (biases are
// never pruned). Equal magnitudes are ordered by (tensor order, flat index):
// the earlier position is pruned first.
#pragma once

#include <utility>

#include "lotpool/mask.hpp"
#include "lotpool/tensor.hpp"

namespace lotpool {

/// One IMP step: switches off floor(p * kept) of the currently kept weights with
/// the smallest magnitude. The result is a subset of `mask`.
Mask prune_fraction(const ParamSet& params, const Mask& mask, double p);

/// Switches off the smallest currently kept weights until exactly `keep` remain.
Mask prune_within(const ParamSet& params, const Mask& mask, std::size_t keep);

/// Number of weights kept at a density target: round-half-up(density * total).
std::size_t kept_count_for_density(double target_density, std::size_t total);

struct Pruned {
    ParamSet params;  // zero at pruned positions
    Mask mask;
};

/// Keeps exactly `keep` largest-magnitude weights over all weight tensors.
Pruned prune_to_count(const ParamSet& params, std::size_t keep);

/// Keeps round-half-up(target_density * total) largest-magnitude weights.
/// target_density == 1 returns the input with a full mask.
Pruned prune_to_density(const ParamSet& params, double target_density);

}  // namespace lotpool
