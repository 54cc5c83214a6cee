// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lotpool/tensor.hpp"

namespace lotpool {

/// Labelled examples: features [N, d_in], one class index per row.
struct Dataset {
    Tensor features;
    std::vector<int> labels;
    int n_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t input_dim() const noexcept { return features.rank() == 2 ? features.shape()[1] : 0; }

    /// Throws DomainError if the invariants (N >= 1, labels in range, finite features) fail.
    void validate() const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (magic 0x00000801).
/// Pixels are scaled by 1/255 and images flattened row-major. n_classes == 0
/// infers max(label) + 1.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 int n_classes = 0);

/// Writes features as IDX ubyte images of rows x cols (values quantized to round(255 v)).
void write_idx(const Dataset& data, std::size_t rows, std::size_t cols, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// Isotropic Gaussian blobs. Class centers depend only on (class, d_in), so
/// sets drawn with different seeds share the same geometry.
Dataset synth_gaussians(int n_classes, std::size_t d_in, std::size_t n_per_class, double spread,
                        std::uint64_t seed);

struct GlyphOptions {
    double jitter_px = 1.5;    // std of stroke endpoint displacement
    int max_shift_px = 1;      // global translation, uniform in [-max, max]
    double pixel_noise = 0.1;  // additive Gaussian noise before clipping
    int distractors = 1;       // random strokes shared by no class
};

/// 28x28 stroke-drawn images in 10 classes with values in [0,1], quantized
/// to 1/255 steps. Class prototypes are fixed; `seed` drives per-sample noise.
Dataset synth_glyphs(std::size_t n, std::uint64_t seed, const GlyphOptions& opts = {});

/// Rows of `data` at the given indices, in that order.
Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

/// The first n rows.
Dataset take(const Dataset& data, std::size_t n);

/// Deterministic shuffle by seed; the first round(val_fraction * N) rows form the validation part.
std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction, std::uint64_t seed);

/// 64-bit FNV-1a content hash of shape, features, labels and class count, as 16 hex digits.
std::string fingerprint(const Dataset& data);

}  // namespace lotpool
