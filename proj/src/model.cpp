// SPDX-License-Identifier: Apache-2.0
#include "lotpool/model.hpp"

#include <algorithm>
#include <cmath>

#include "lotpool/errors.hpp"
#include "lotpool/random.hpp"

namespace lotpool {

void MlpConfig::validate() const {
    if (layer_sizes.size() < 2) throw DomainError("MLP needs at least an input and an output size");
    for (std::size_t s : layer_sizes)
        if (s < 1) throw DomainError("MLP layer sizes must be positive");
}

ParamSet init_params(const MlpConfig& config) {
    config.validate();
    Rng rng(config.init_seed);
    ParamSet p;
    for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
        const std::size_t fan_in = config.layer_sizes[l];
        const std::size_t fan_out = config.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor w({fan_in, fan_out});
        for (float& v : w.data()) v = static_cast<float>(rng.uniform(-limit, limit));
        const std::string idx = std::to_string(l + 1);
        p.add("W_" + idx, std::move(w));
        p.add("b_" + idx, Tensor({fan_out}));
    }
    return p;
}

std::vector<std::size_t> layer_sizes_of(const ParamSet& params) {
    if (params.num_entries() == 0 || params.num_entries() % 2 != 0)
        throw AlignmentError("MLP parameters must come in (weight, bias) pairs");
    std::vector<std::size_t> sizes;
    for (std::size_t e = 0; e < params.num_entries(); e += 2) {
        const auto& w = params[e].tensor;
        const auto& b = params[e + 1].tensor;
        if (w.rank() != 2 || b.rank() != 1 || b.shape()[0] != w.shape()[1])
            throw AlignmentError("entry '" + params[e].name + "' / '" + params[e + 1].name +
                                 "' is not a [fan_in, fan_out] weight followed by a [fan_out] bias");
        if (sizes.empty()) sizes.push_back(w.shape()[0]);
        if (sizes.back() != w.shape()[0])
            throw AlignmentError("entry '" + params[e].name + "' expects fan_in " + std::to_string(w.shape()[0]) +
                                 " but the previous layer produces " + std::to_string(sizes.back()));
        sizes.push_back(w.shape()[1]);
    }
    return sizes;
}

namespace {

// Activations per layer in double; acts[0] is the input, acts.back() the logits.
struct Trace {
    std::vector<std::size_t> sizes;
    std::vector<std::vector<double>> acts;
};

Trace run_forward(const ParamSet& params, const float* inputs, std::size_t rows, std::size_t d_in) {
    Trace tr;
    tr.sizes = layer_sizes_of(params);
    if (tr.sizes.front() != d_in)
        throw AlignmentError("input dimension " + std::to_string(d_in) + " does not match network input " +
                             std::to_string(tr.sizes.front()));
    const std::size_t n_layers = tr.sizes.size() - 1;
    tr.acts.resize(n_layers + 1);
    tr.acts[0].assign(inputs, inputs + rows * d_in);

    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t n_in = tr.sizes[l], n_out = tr.sizes[l + 1];
        const float* w = params[2 * l].tensor.data().data();
        const float* b = params[2 * l + 1].tensor.data().data();
        const auto& in = tr.acts[l];
        auto& out = tr.acts[l + 1];
        out.assign(rows * n_out, 0.0);
        const bool hidden = l + 1 < n_layers;
        for (std::size_t r = 0; r < rows; ++r) {
            double* acc = out.data() + r * n_out;
            for (std::size_t j = 0; j < n_out; ++j) acc[j] = b[j];
            const double* x = in.data() + r * n_in;
            for (std::size_t i = 0; i < n_in; ++i) {
                const double xi = x[i];
                if (xi == 0.0) continue;
                const float* wr = w + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) acc[j] += xi * static_cast<double>(wr[j]);
            }
            if (hidden)
                for (std::size_t j = 0; j < n_out; ++j) acc[j] = acc[j] > 0.0 ? acc[j] : 0.0;
        }
    }
    return tr;
}

// Softmax cross-entropy of one row, log-sum-exp stabilized.
double row_cross_entropy(const double* z, std::size_t n, int label, double* probs_out) {
    const double zmax = *std::max_element(z, z + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(z[j] - zmax);
    if (probs_out)
        for (std::size_t j = 0; j < n; ++j) probs_out[j] = std::exp(z[j] - zmax) / sum;
    return std::log(sum) + zmax - z[static_cast<std::size_t>(label)];
}

void check_labels(const std::vector<int>& labels, std::size_t rows, std::size_t n_classes) {
    if (rows == 0) throw DomainError("batch must hold at least one sample");
    if (labels.size() != rows) throw AlignmentError("batch has " + std::to_string(rows) + " rows but " +
                                                    std::to_string(labels.size()) + " labels");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
            throw DomainError("label " + std::to_string(l) + " outside the network's " + std::to_string(n_classes) +
                              " classes");
}

std::pair<std::size_t, std::size_t> matrix_dims(const Tensor& inputs) {
    if (inputs.rank() != 2) throw AlignmentError("inputs must be a [B, d_in] tensor");
    return {inputs.shape()[0], inputs.shape()[1]};
}

}  // namespace

Tensor forward(const ParamSet& params, const Mask* mask, const Tensor& inputs) {
    if (mask) return forward(apply_mask(params, *mask), nullptr, inputs);
    const auto [rows, d_in] = matrix_dims(inputs);
    const Trace tr = run_forward(params, inputs.data().data(), rows, d_in);
    const auto& z = tr.acts.back();
    std::vector<float> logits(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) logits[i] = static_cast<float>(z[i]);
    return Tensor({rows, tr.sizes.back()}, std::move(logits));
}

LossAndGrads loss_and_grads(const ParamSet& params, const Mask* mask, const Batch& batch) {
    const ParamSet eff = mask ? apply_mask(params, *mask) : params;
    const auto [rows, d_in] = matrix_dims(batch.inputs);
    const Trace tr = run_forward(eff, batch.inputs.data().data(), rows, d_in);
    const std::size_t n_layers = tr.sizes.size() - 1;
    const std::size_t n_classes = tr.sizes.back();
    check_labels(batch.labels, rows, n_classes);

    LossAndGrads out;
    std::vector<double> delta(rows * n_classes);
    double loss = 0.0;
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double* d = delta.data() + r * n_classes;
        loss += row_cross_entropy(tr.acts.back().data() + r * n_classes, n_classes, batch.labels[r], d);
        d[static_cast<std::size_t>(batch.labels[r])] -= 1.0;
        for (std::size_t j = 0; j < n_classes; ++j) d[j] *= inv_rows;
    }
    out.loss = loss * inv_rows;

    std::vector<std::vector<double>> gw(n_layers), gb(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        const std::size_t n_in = tr.sizes[l], n_out = tr.sizes[l + 1];
        const auto& in = tr.acts[l];
        gw[l].assign(n_in * n_out, 0.0);
        gb[l].assign(n_out, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* d = delta.data() + r * n_out;
            for (std::size_t j = 0; j < n_out; ++j) gb[l][j] += d[j];
            const double* x = in.data() + r * n_in;
            for (std::size_t i = 0; i < n_in; ++i) {
                const double xi = x[i];
                if (xi == 0.0) continue;
                double* g = gw[l].data() + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) g[j] += xi * d[j];
            }
        }
        if (l == 0) break;
        // Back through W_l and the ReLU of the previous layer (active iff its output is positive).
        const float* w = eff[2 * l].tensor.data().data();
        std::vector<double> prev(rows * n_in, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* d = delta.data() + r * n_out;
            const double* x = in.data() + r * n_in;
            double* p = prev.data() + r * n_in;
            for (std::size_t i = 0; i < n_in; ++i) {
                if (x[i] <= 0.0) continue;
                const float* wr = w + i * n_out;
                double s = 0.0;
                for (std::size_t j = 0; j < n_out; ++j) s += d[j] * static_cast<double>(wr[j]);
                p[i] = s;
            }
        }
        delta = std::move(prev);
    }

    out.grads = zeros_like(params);
    std::size_t m = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        auto g = out.grads[2 * l].tensor.data();
        const std::uint8_t* bits = mask ? (*mask)[m++].bits.data() : nullptr;
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = (bits && !bits[i]) ? 0.0f : static_cast<float>(gw[l][i]);
        auto gbias = out.grads[2 * l + 1].tensor.data();
        for (std::size_t j = 0; j < gbias.size(); ++j) gbias[j] = static_cast<float>(gb[l][j]);
    }
    return out;
}

int argmax_row(const float* logits, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
        if (logits[j] > logits[best]) best = j;
    return static_cast<int>(best);
}

Tensor dataset_logits(const ParamSet& params, const Mask* mask, const Dataset& data) {
    if (data.size() == 0) throw DomainError("cannot evaluate on an empty dataset");
    const ParamSet eff = mask ? apply_mask(params, *mask) : params;
    constexpr std::size_t kChunk = 512;
    const std::size_t n = data.size(), d = data.input_dim();
    const std::size_t n_classes = layer_sizes_of(eff).back();
    std::vector<float> all(n * n_classes);
    const auto feats = data.features.data();
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t rows = std::min(kChunk, n - start);
        std::vector<float> chunk(feats.begin() + static_cast<std::ptrdiff_t>(start * d),
                                 feats.begin() + static_cast<std::ptrdiff_t>((start + rows) * d));
        const Tensor z = forward(eff, nullptr, Tensor({rows, d}, std::move(chunk)));
        std::copy(z.data().begin(), z.data().end(), all.begin() + static_cast<std::ptrdiff_t>(start * n_classes));
    }
    return Tensor({n, n_classes}, std::move(all));
}

std::vector<int> predict(const ParamSet& params, const Mask* mask, const Dataset& data) {
    const Tensor z = dataset_logits(params, mask, data);
    const std::size_t c = z.shape()[1];
    std::vector<int> out(data.size());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = argmax_row(z.data().data() + r * c, c);
    return out;
}

EvalResult evaluate(const ParamSet& params, const Mask* mask, const Dataset& data) {
    const Tensor z = dataset_logits(params, mask, data);
    const std::size_t n = data.size(), c = z.shape()[1];
    check_labels(data.labels, n, c);
    std::size_t correct = 0;
    double loss = 0.0;
    std::vector<double> row(c);
    for (std::size_t r = 0; r < n; ++r) {
        const float* zr = z.data().data() + r * c;
        correct += argmax_row(zr, c) == data.labels[r];
        for (std::size_t j = 0; j < c; ++j) row[j] = zr[j];
        loss += row_cross_entropy(row.data(), c, data.labels[r], nullptr);
    }
    return {static_cast<double>(correct) / static_cast<double>(n), loss / static_cast<double>(n)};
}

}  // namespace lotpool
