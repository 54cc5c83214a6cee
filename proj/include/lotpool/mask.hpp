// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lotpool/tensor.hpp"

namespace lotpool {

struct MaskEntry {
    std::string name;
    Shape shape;
    std::vector<std::uint8_t> bits;  // one byte per element, 0 or 1

    bool operator==(const MaskEntry&) const = default;
};

/// Binary support over the weight tensors of a ParamSet. Bias entries have no mask.
class Mask {
  public:
    Mask() = default;

    /// All-ones mask over every weight entry of `params`.
    static Mask full_for(const ParamSet& params);

    void add(std::string name, Shape shape, std::vector<std::uint8_t> bits);

    const std::vector<MaskEntry>& entries() const noexcept { return entries_; }
    std::vector<MaskEntry>& entries() noexcept { return entries_; }
    std::size_t num_entries() const noexcept { return entries_.size(); }
    const MaskEntry& operator[](std::size_t i) const { return entries_[i]; }
    MaskEntry& operator[](std::size_t i) { return entries_[i]; }

    std::size_t kept() const;
    std::size_t total() const;
    double density() const;

    /// True when every kept position here is also kept in `other` (shapes must agree).
    bool subset_of(const Mask& other) const;

    bool operator==(const Mask&) const = default;

  private:
    std::vector<MaskEntry> entries_;
};

/// Throws AlignmentError unless the mask covers exactly the weight entries of `params`, in order.
void require_aligned(const ParamSet& params, const Mask& mask);

/// Weights outside the support become 0; biases pass through.
ParamSet apply_mask(const ParamSet& params, const Mask& mask);

/// Nonzero fraction over weight entries (biases excluded).
double density_of(const ParamSet& params);
double density_of(const Mask& mask);

}  // namespace lotpool
