// SPDX-License-Identifier: Apache-2.0
#include "lotpool/mask.hpp"

#include "lotpool/errors.hpp"

namespace lotpool {

Mask Mask::full_for(const ParamSet& params) {
    Mask m;
    for (const auto& e : params.entries())
        if (e.is_weight()) m.add(e.name, e.tensor.shape(), std::vector<std::uint8_t>(e.tensor.size(), 1));
    return m;
}

void Mask::add(std::string name, Shape shape, std::vector<std::uint8_t> bits) {
    if (bits.size() != shape_numel(shape)) throw DomainError("mask entry '" + name + "' length does not match shape");
    for (auto b : bits)
        if (b > 1) throw DomainError("mask entry '" + name + "' holds a non-binary value");
    entries_.push_back({std::move(name), std::move(shape), std::move(bits)});
}

std::size_t Mask::kept() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        for (auto b : e.bits) n += b;
    return n;
}

std::size_t Mask::total() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.bits.size();
    return n;
}

double Mask::density() const {
    const std::size_t t = total();
    return t == 0 ? 0.0 : static_cast<double>(kept()) / static_cast<double>(t);
}

bool Mask::subset_of(const Mask& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t e = 0; e < entries_.size(); ++e) {
        const auto& a = entries_[e];
        const auto& b = other.entries_[e];
        if (a.name != b.name || a.shape != b.shape) return false;
        for (std::size_t i = 0; i < a.bits.size(); ++i)
            if (a.bits[i] && !b.bits[i]) return false;
    }
    return true;
}

void require_aligned(const ParamSet& params, const Mask& mask) {
    std::size_t m = 0;
    for (const auto& e : params.entries()) {
        if (!e.is_weight()) continue;
        if (m >= mask.num_entries())
            throw AlignmentError("mask is not aligned: weight entry '" + e.name + "' has no mask");
        const auto& me = mask[m++];
        if (me.name != e.name)
            throw AlignmentError("mask is not aligned: expected entry '" + e.name + "', found '" + me.name + "'");
        if (me.shape != e.tensor.shape())
            throw AlignmentError("mask is not aligned: entry '" + e.name + "' shape " + shape_to_string(me.shape) +
                                 " vs " + shape_to_string(e.tensor.shape()));
    }
    if (m != mask.num_entries())
        throw AlignmentError("mask is not aligned: extra mask entry '" + mask[m].name + "'");
}

ParamSet apply_mask(const ParamSet& params, const Mask& mask) {
    require_aligned(params, mask);
    ParamSet out = params;
    std::size_t m = 0;
    for (auto& e : out.entries()) {
        if (!e.is_weight()) continue;
        const auto& bits = mask[m++].bits;
        auto w = e.tensor.data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = bits[i] ? w[i] : 0.0f;
    }
    return out;
}

double density_of(const ParamSet& params) {
    std::size_t nonzero = 0, total = 0;
    for (const auto& e : params.entries()) {
        if (!e.is_weight()) continue;
        for (float v : e.tensor.data()) nonzero += v != 0.0f;
        total += e.tensor.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(nonzero) / static_cast<double>(total);
}

double density_of(const Mask& mask) { return mask.density(); }

}  // namespace lotpool
