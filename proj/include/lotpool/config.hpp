// SPDX-License-Identifier: Apache-2.0
//
// Run configuration files and dataset specifications used by the command line.
//
// Config files are plain `key=value` lines ('#' starts a comment). Keys are
// the ImpConfig field names plus the data keys below; anything else is rejected.
//
// Data specs:
//   idx:IMAGES,LABELS                       IDX image/label pair
//   synth:classes=C,dim=D,n=N,spread=S,seed=K   Gaussian blobs (n per class)
//   glyphs:n=N,seed=K[,jitter=..,noise=..,shift=..,distractors=..]
//   run:DIR:train|val|test                  the split used by a saved run
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lotpool/data.hpp"
#include "lotpool/imp.hpp"

namespace lotpool {

/// Parses key=value text. Throws DomainError on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_kv_text(const std::string& text);

struct RunSpec {
    ImpConfig imp;
    std::string train_data;
    std::string test_data;  // optional
    double val_fraction = 0.1;
    std::uint64_t split_seed = 0;
    std::size_t train_limit = 0;  // 0 = use every row

    /// Data-related keys, for echoing into a run manifest.
    std::map<std::string, std::string> data_kv() const;
};

/// Builds a RunSpec from parsed keys, rejecting unknown ones. Relative idx
/// paths are resolved against base_dir.
RunSpec run_spec_from_kv(const std::map<std::string, std::string>& kv, const std::filesystem::path& base_dir);
RunSpec load_run_spec(const std::filesystem::path& config_file);

/// Rewrites relative paths in an idx: spec against base_dir.
std::string resolve_data_spec(const std::string& spec, const std::filesystem::path& base_dir);

/// Loads a dataset from a spec (see header comment).
Dataset load_data_spec(const std::string& spec);

struct RunData {
    Dataset full;  // after train_limit, before the split
    Dataset train;
    Dataset val;
    std::optional<Dataset> test;
};

RunData prepare_data(const RunSpec& spec);

/// Recreates the data splits of a saved run and checks the dataset fingerprint.
RunData data_for_run(const std::filesystem::path& run_dir);

}  // namespace lotpool
