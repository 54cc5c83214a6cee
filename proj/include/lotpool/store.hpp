// SPDX-License-Identifier: Apache-2.0
//
// LPCK checkpoint files:
//
//   "LPCK" | u32 version | u32 meta_len | meta (UTF-8 "key=value\n" lines)
//   | u32 tensor_count | tensor* | u32 crc32 of every preceding byte
//
//   tensor := u32 name_len | name | u8 dtype | u32 ndim | u32 dims[ndim] | data
//   dtype 1: float32, dtype 2: mask bits packed 8 per byte, LSB first,
//   unused high bits of the last byte zero.
//
// Every integer and float is little-endian. Parameters are written first,
// mask entries after them, each in entry order.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lotpool/mask.hpp"
#include "lotpool/tensor.hpp"

namespace lotpool {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    int imp_iteration = 0;
    double density = 1.0;
    int rewind_epoch = 0;
    double prune_fraction = 0.0;
    std::vector<std::size_t> layer_sizes;
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 0;
    std::uint32_t schema_version = kCheckpointVersion;
    std::map<std::string, std::string> extra;  // free-form provenance, e.g. method=pool_interp

    bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
    ParamSet params;
    Mask mask;
    CheckpointMeta meta;

    bool operator==(const Checkpoint&) const = default;
};

/// Throws DomainError unless the mask is aligned and params vanish outside it.
void validate_checkpoint(const Checkpoint& ckpt);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// FormatError on bad magic, version or truncation; CorruptionError on CRC mismatch.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Packs one byte per bit into LSB-first bytes.
std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& bits);

/// Index of a pooling run directory, stored as plain key=value text.
struct RunManifest {
    std::vector<std::string> checkpoints;  // file names relative to the run directory, t = 0..T
    std::string rewind_file;
    std::map<std::string, std::string> config;  // echo of the producing configuration
    std::string dataset_fingerprint;
    std::string created;  // ISO-8601 UTC

    bool operator==(const RunManifest&) const = default;
};

inline constexpr const char* kManifestName = "manifest.txt";

void save_manifest(const RunManifest& manifest, const std::filesystem::path& dir);
/// Parses the manifest and checks every listed file exists and decodes.
RunManifest load_manifest(const std::filesystem::path& dir);

/// Current UTC time as ISO-8601; SOURCE_DATE_EPOCH overrides the clock.
std::string utc_timestamp();

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace lotpool
