// SPDX-License-Identifier: Apache-2.0
//
// Dense float tensors and the named parameter collection every other module
// operates on. All arithmetic here is pure: inputs are never mutated.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lotpool {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    bool operator==(const Tensor&) const = default;

  private:
    Shape shape_;
    std::vector<float> data_;
};

struct ParamEntry {
    std::string name;
    Tensor tensor;

    /// Weight tensors (rank >= 2) are prunable; rank-1 tensors are biases.
    bool is_weight() const noexcept { return tensor.rank() >= 2; }

    bool operator==(const ParamEntry&) const = default;
};

/// Ordered, uniquely named tensors holding every weight and bias of one network.
class ParamSet {
  public:
    ParamSet() = default;

    void add(std::string name, Tensor tensor);

    const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
    std::vector<ParamEntry>& entries() noexcept { return entries_; }
    std::size_t num_entries() const noexcept { return entries_.size(); }

    const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }
    ParamEntry& operator[](std::size_t i) { return entries_[i]; }

    const Tensor* find(const std::string& name) const;

    /// d: total number of scalars over all entries.
    std::size_t total_count() const;
    /// Number of scalars over weight (prunable) entries only.
    std::size_t weight_count() const;

    bool operator==(const ParamSet&) const = default;

  private:
    std::vector<ParamEntry> entries_;
};

/// Description of the first (name, shape) mismatch, or nullopt when aligned.
std::optional<std::string> alignment_mismatch(const ParamSet& a, const ParamSet& b);
/// Throws AlignmentError naming the first mismatching entry.
void require_aligned(const ParamSet& a, const ParamSet& b);

/// alpha * a + (1 - alpha) * b, elementwise. alpha weights the first argument.
ParamSet lerp(const ParamSet& a, const ParamSet& b, double alpha);

/// c_acc * acc + c_x * x, elementwise.
ParamSet scale_add(const ParamSet& acc, const ParamSet& x, double c_acc, double c_x);

/// A copy with every entry zero-filled.
ParamSet zeros_like(const ParamSet& p);

}  // namespace lotpool
