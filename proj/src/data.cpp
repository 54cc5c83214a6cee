// SPDX-License-Identifier: Apache-2.0
#include "lotpool/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lotpool/errors.hpp"
#include "lotpool/random.hpp"

namespace lotpool {

void Dataset::validate() const {
    if (labels.empty()) throw DomainError("dataset is empty");
    if (features.rank() != 2 || features.shape()[0] != labels.size())
        throw DomainError("dataset features must be [N, d_in] with N = " + std::to_string(labels.size()));
    if (n_classes < 1) throw DomainError("dataset needs at least one class");
    for (int l : labels)
        if (l < 0 || l >= n_classes)
            throw DomainError("label " + std::to_string(l) + " outside [0, " + std::to_string(n_classes) + ")");
    for (float v : features.data())
        if (!std::isfinite(v)) throw DomainError("dataset contains a non-finite feature value");
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off, const std::string& what) {
    if (off + 4 > buf.size()) throw FormatError("truncated IDX header while reading " + what, off);
    return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
           (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), b.size());
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 int n_classes) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (std::uint32_t magic = read_be32(img, 0, "image magic"); magic != kIdxImages)
        throw FormatError("bad IDX image magic in '" + images_path.string() + "'", 0);
    const std::size_t n = read_be32(img, 4, "image count");
    const std::size_t rows = read_be32(img, 8, "row count");
    const std::size_t cols = read_be32(img, 12, "column count");
    if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX image file declares an empty dimension", 4);
    const std::size_t pixels = rows * cols;
    if (img.size() < 16 + n * pixels)
        throw FormatError("truncated IDX image data in '" + images_path.string() + "'", img.size());

    if (std::uint32_t magic = read_be32(lab, 0, "label magic"); magic != kIdxLabels)
        throw FormatError("bad IDX label magic in '" + labels_path.string() + "'", 0);
    const std::size_t n_labels = read_be32(lab, 4, "label count");
    if (n_labels != n)
        throw FormatError("label count " + std::to_string(n_labels) + " does not match image count " +
                              std::to_string(n),
                          4);
    if (lab.size() < 8 + n) throw FormatError("truncated IDX label data in '" + labels_path.string() + "'", lab.size());

    Dataset ds;
    std::vector<float> feats(n * pixels);
    for (std::size_t i = 0; i < feats.size(); ++i) feats[i] = static_cast<float>(img[16 + i]) / 255.0f;
    ds.features = Tensor({n, pixels}, std::move(feats));
    ds.labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = lab[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.n_classes = n_classes > 0 ? n_classes : max_label + 1;
    ds.validate();
    return ds;
}

void write_idx(const Dataset& data, std::size_t rows, std::size_t cols, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    data.validate();
    if (rows * cols != data.input_dim())
        throw DomainError("IDX geometry " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " does not match input dimension " + std::to_string(data.input_dim()));
    for (int l : data.labels)
        if (l > 255) throw DomainError("IDX labels are bytes; label " + std::to_string(l) + " does not fit");

    std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
    std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
    if (!img || !lab) throw std::runtime_error("cannot create IDX output files");
    put_be32(img, kIdxImages);
    put_be32(img, static_cast<std::uint32_t>(data.size()));
    put_be32(img, static_cast<std::uint32_t>(rows));
    put_be32(img, static_cast<std::uint32_t>(cols));
    std::vector<char> bytes(data.features.size());
    const auto f = data.features.data();
    for (std::size_t i = 0; i < f.size(); ++i) {
        const float v = std::clamp(f[i], 0.0f, 1.0f);
        bytes[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
    img.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

    put_be32(lab, kIdxLabels);
    put_be32(lab, static_cast<std::uint32_t>(data.size()));
    for (int l : data.labels) lab.put(static_cast<char>(l));
    if (!img || !lab) throw std::runtime_error("failed writing IDX output files");
}

Dataset synth_gaussians(int n_classes, std::size_t d_in, std::size_t n_per_class, double spread,
                        std::uint64_t seed) {
    if (n_classes < 1 || d_in < 1 || n_per_class < 1) throw DomainError("synth_gaussians sizes must be positive");
    if (!(spread >= 0.0)) throw DomainError("spread must be non-negative");

    std::vector<std::vector<double>> centers(n_classes, std::vector<double>(d_in));
    for (int c = 0; c < n_classes; ++c) {
        Rng rng(0x5eed0000ULL + static_cast<std::uint64_t>(c) * 7919 + d_in);
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (auto& v : centers[c]) {
                v = rng.normal();
                norm += v * v;
            }
        }
        norm = std::sqrt(norm);
        for (auto& v : centers[c]) v = 2.0 * v / norm;
    }

    const std::size_t n = n_per_class * static_cast<std::size_t>(n_classes);
    std::vector<float> feats(n * d_in);
    std::vector<int> labels(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(n_classes));
        labels[i] = c;
        for (std::size_t k = 0; k < d_in; ++k)
            feats[i * d_in + k] = static_cast<float>(centers[c][k] + spread * rng.normal());
    }
    return Dataset{Tensor({n, d_in}, std::move(feats)), std::move(labels), n_classes};
}

namespace {

struct Stroke {
    double x0, y0, x1, y1;
};

double segment_distance_sq(double px, double py, const Stroke& s) {
    const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    const double len_sq = dx * dx + dy * dy;
    double u = len_sq > 0.0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len_sq : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const double cx = s.x0 + u * dx - px, cy = s.y0 + u * dy - py;
    return cx * cx + cy * cy;
}

Stroke random_stroke(Rng& rng) {
    return {rng.uniform(5.0, 22.0), rng.uniform(5.0, 22.0), rng.uniform(5.0, 22.0), rng.uniform(5.0, 22.0)};
}

}  // namespace

Dataset synth_glyphs(std::size_t n, std::uint64_t seed, const GlyphOptions& opts) {
    constexpr int kClasses = 10;
    constexpr int kStrokes = 3;
    constexpr std::size_t kSide = 28;
    constexpr double kWidth = 1.1;
    if (n == 0) throw DomainError("synth_glyphs needs n >= 1");

    std::array<std::array<Stroke, kStrokes>, kClasses> prototypes{};
    Rng proto_rng(0x6c797068ULL);
    for (auto& glyph : prototypes)
        for (auto& s : glyph) s = random_stroke(proto_rng);

    Rng rng(seed);
    std::vector<float> feats(n * kSide * kSide);
    std::vector<int> labels(n);
    std::vector<Stroke> strokes;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(rng.below(kClasses));
        labels[i] = c;
        const double sx = static_cast<double>(static_cast<int>(rng.below(2 * opts.max_shift_px + 1)) - opts.max_shift_px);
        const double sy = static_cast<double>(static_cast<int>(rng.below(2 * opts.max_shift_px + 1)) - opts.max_shift_px);
        strokes.clear();
        for (const auto& p : prototypes[c])
            strokes.push_back({p.x0 + sx + opts.jitter_px * rng.normal(), p.y0 + sy + opts.jitter_px * rng.normal(),
                               p.x1 + sx + opts.jitter_px * rng.normal(), p.y1 + sy + opts.jitter_px * rng.normal()});
        for (int k = 0; k < opts.distractors; ++k) strokes.push_back(random_stroke(rng));
        const double ink = rng.uniform(0.7, 1.0);

        float* img = feats.data() + i * kSide * kSide;
        for (std::size_t y = 0; y < kSide; ++y) {
            for (std::size_t x = 0; x < kSide; ++x) {
                double best = 0.0;
                for (const auto& s : strokes) {
                    const double d2 = segment_distance_sq(static_cast<double>(x), static_cast<double>(y), s);
                    best = std::max(best, std::exp(-d2 / (2.0 * kWidth * kWidth)));
                }
                const double v = std::clamp(ink * best + opts.pixel_noise * rng.normal(), 0.0, 1.0);
                img[y * kSide + x] = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
            }
        }
    }
    return Dataset{Tensor({n, kSide * kSide}, std::move(feats)), std::move(labels), kClasses};
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw DomainError("subset would be empty");
    const std::size_t d = data.input_dim();
    std::vector<float> feats(indices.size() * d);
    std::vector<int> labels(indices.size());
    const auto src = data.features.data();
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        if (i >= data.size()) throw DomainError("subset index out of range");
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * d), d, feats.begin() + static_cast<std::ptrdiff_t>(r * d));
        labels[r] = data.labels[i];
    }
    return Dataset{Tensor({indices.size(), d}, std::move(feats)), std::move(labels), data.n_classes};
}

Dataset take(const Dataset& data, std::size_t n) {
    if (n == 0 || n > data.size()) throw DomainError("take: n must be in [1, " + std::to_string(data.size()) + "]");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return subset(data, idx);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw DomainError("val_fraction must lie in (0,1)");
    const std::size_t n = data.size();
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n) + 0.5));
    if (n_val == 0 || n_val >= n)
        throw DomainError("split of " + std::to_string(n) + " rows at fraction " + std::to_string(val_fraction) +
                          " leaves an empty part");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    return {subset(data, train_idx), subset(data, val_idx)};
}

std::string fingerprint(const Dataset& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v, int bytes) {
        for (int b = 0; b < bytes; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (std::size_t d : data.features.shape()) feed(d, 8);
    for (float v : data.features.data()) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        feed(bits, 4);
    }
    for (int l : data.labels) feed(static_cast<std::uint32_t>(l), 4);
    feed(static_cast<std::uint32_t>(data.n_classes), 4);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    return out;
}

}  // namespace lotpool
