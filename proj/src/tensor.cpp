// SPDX-License-Identifier: Apache-2.0
#include "lotpool/tensor.hpp"

#include <cmath>
#include <sstream>

#include "lotpool/errors.hpp"

namespace lotpool {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw DomainError("tensor shape must have at least one dimension");
    for (std::size_t d : shape)
        if (d == 0) throw DomainError("tensor dimensions must be positive, got " + shape_to_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_numel(shape_))
        throw DomainError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                          shape_to_string(shape_));
}

void ParamSet::add(std::string name, Tensor tensor) {
    if (find(name) != nullptr) throw DomainError("duplicate parameter name '" + name + "'");
    entries_.push_back({std::move(name), std::move(tensor)});
}

const Tensor* ParamSet::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return &e.tensor;
    return nullptr;
}

std::size_t ParamSet::total_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

std::size_t ParamSet::weight_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.is_weight()) n += e.tensor.size();
    return n;
}

std::optional<std::string> alignment_mismatch(const ParamSet& a, const ParamSet& b) {
    const std::size_t n = std::min(a.num_entries(), b.num_entries());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ea = a[i];
        const auto& eb = b[i];
        if (ea.name != eb.name)
            return "entry " + std::to_string(i) + ": name '" + ea.name + "' vs '" + eb.name + "'";
        if (ea.tensor.shape() != eb.tensor.shape())
            return "entry '" + ea.name + "': shape " + shape_to_string(ea.tensor.shape()) + " vs " +
                   shape_to_string(eb.tensor.shape());
    }
    if (a.num_entries() != b.num_entries()) {
        const auto& longer = a.num_entries() > b.num_entries() ? a : b;
        return "entry '" + longer[n].name + "' present on one side only";
    }
    return std::nullopt;
}

void require_aligned(const ParamSet& a, const ParamSet& b) {
    if (auto why = alignment_mismatch(a, b)) throw AlignmentError("parameter sets are not aligned: " + *why);
}

ParamSet scale_add(const ParamSet& acc, const ParamSet& x, double c_acc, double c_x) {
    if (!std::isfinite(c_acc) || !std::isfinite(c_x)) throw DomainError("scale_add coefficients must be finite");
    require_aligned(acc, x);
    const float ca = static_cast<float>(c_acc);
    const float cx = static_cast<float>(c_x);
    ParamSet out = acc;
    for (std::size_t e = 0; e < out.num_entries(); ++e) {
        auto dst = out[e].tensor.data();
        auto src = x[e].tensor.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = ca * dst[i] + cx * src[i];
    }
    return out;
}

ParamSet lerp(const ParamSet& a, const ParamSet& b, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("interpolation coefficient must lie in [0,1]");
    require_aligned(a, b);
    // Endpoints are returned verbatim so signed zeros survive.
    if (alpha == 1.0) return a;
    if (alpha == 0.0) return b;
    return scale_add(a, b, alpha, 1.0 - alpha);
}

ParamSet zeros_like(const ParamSet& p) {
    ParamSet out;
    for (const auto& e : p.entries()) out.add(e.name, Tensor(e.tensor.shape()));
    return out;
}

}  // namespace lotpool
