// SPDX-License-Identifier: Apache-2.0
#include "lotpool/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lotpool/errors.hpp"

namespace lotpool {

namespace {

struct Ranked {
    float magnitude;
    std::uint32_t slot;  // position in the concatenation of weight tensors
};

// Removal order: smaller magnitude first, then earlier position.
bool removed_before(const Ranked& a, const Ranked& b) {
    return a.magnitude < b.magnitude || (a.magnitude == b.magnitude && a.slot < b.slot);
}

// Marks the `n_remove` first positions of `pool` in removal order as pruned.
void remove_smallest(std::vector<Ranked>& pool, std::size_t n_remove, std::vector<std::uint8_t>& flat_bits) {
    if (n_remove == 0) return;
    if (n_remove < pool.size())
        std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_remove), pool.end(),
                         removed_before);
    for (std::size_t i = 0; i < n_remove; ++i) flat_bits[pool[i].slot] = 0;
}

std::vector<std::uint8_t> flatten(const Mask& mask) {
    std::vector<std::uint8_t> flat;
    flat.reserve(mask.total());
    for (const auto& e : mask.entries()) flat.insert(flat.end(), e.bits.begin(), e.bits.end());
    return flat;
}

Mask unflatten(const ParamSet& params, const std::vector<std::uint8_t>& flat) {
    Mask m;
    std::size_t off = 0;
    for (const auto& e : params.entries()) {
        if (!e.is_weight()) continue;
        m.add(e.name, e.tensor.shape(),
              std::vector<std::uint8_t>(flat.begin() + static_cast<std::ptrdiff_t>(off),
                                        flat.begin() + static_cast<std::ptrdiff_t>(off + e.tensor.size())));
        off += e.tensor.size();
    }
    return m;
}

std::vector<Ranked> rank_weights(const ParamSet& params, const std::vector<std::uint8_t>* eligible) {
    std::vector<Ranked> pool;
    pool.reserve(params.weight_count());
    std::uint32_t slot = 0;
    for (const auto& e : params.entries()) {
        if (!e.is_weight()) continue;
        for (float v : e.tensor.data()) {
            if (!eligible || (*eligible)[slot]) pool.push_back({std::fabs(v), slot});
            ++slot;
        }
    }
    return pool;
}

}  // namespace

Mask prune_fraction(const ParamSet& params, const Mask& mask, double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("pruning fraction must lie in (0,1)");
    require_aligned(params, mask);
    const std::size_t kept = mask.kept();
    if (kept == 0) throw DegenerateMaskError("mask keeps no weights; nothing left to prune");
    const auto n_remove = static_cast<std::size_t>(std::floor(p * static_cast<double>(kept)));
    if (n_remove >= kept) throw DegenerateMaskError("pruning step would empty the mask");
    return prune_within(params, mask, kept - n_remove);
}

Mask prune_within(const ParamSet& params, const Mask& mask, std::size_t keep) {
    require_aligned(params, mask);
    auto flat = flatten(mask);
    auto pool = rank_weights(params, &flat);
    if (keep == 0) throw DegenerateMaskError("pruning step would empty the mask");
    if (keep > pool.size())
        throw DomainError("cannot keep " + std::to_string(keep) + " of " + std::to_string(pool.size()) +
                          " surviving weights");
    remove_smallest(pool, pool.size() - keep, flat);
    return unflatten(params, flat);
}

std::size_t kept_count_for_density(double target_density, std::size_t total) {
    if (!(target_density > 0.0 && target_density <= 1.0)) throw DomainError("target density must lie in (0,1]");
    return static_cast<std::size_t>(std::floor(target_density * static_cast<double>(total) + 0.5));
}

Pruned prune_to_count(const ParamSet& params, std::size_t keep) {
    const std::size_t total = params.weight_count();
    if (keep == 0) throw DegenerateMaskError("pruning to zero kept weights");
    if (keep > total) throw DomainError("cannot keep " + std::to_string(keep) + " of " + std::to_string(total) +
                                        " weights");
    std::vector<std::uint8_t> flat(total, 1);
    auto pool = rank_weights(params, nullptr);
    remove_smallest(pool, total - keep, flat);
    Mask mask = unflatten(params, flat);
    return {apply_mask(params, mask), std::move(mask)};
}

Pruned prune_to_density(const ParamSet& params, double target_density) {
    const std::size_t keep = kept_count_for_density(target_density, params.weight_count());
    if (target_density == 1.0) return {params, Mask::full_for(params)};
    return prune_to_count(params, keep);
}

}  // namespace lotpool
