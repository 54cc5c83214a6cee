// SPDX-License-Identifier: Apache-2.0
//
// Iterative magnitude pruning with rewinding: train dense, then repeatedly
// prune a fraction of the surviving weights, reset the survivors to the
// rewind point and retrain. Every round's trained network joins the pool.
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lotpool/data.hpp"
#include "lotpool/model.hpp"
#include "lotpool/store.hpp"
#include "lotpool/training.hpp"

namespace lotpool {

enum class RewindMode { to_epoch, to_init };

std::string to_string(RewindMode m);
RewindMode rewind_mode_from_string(const std::string& s);

struct ImpConfig {
    MlpConfig model;
    TrainConfig train;
    int iterations = 1;
    double prune_fraction = 0.2;
    RewindMode rewind_mode = RewindMode::to_epoch;

    void validate() const;
    bool operator==(const ImpConfig&) const = default;
};

/// Key=value echo of every ImpConfig field (keys match the config file).
std::map<std::string, std::string> to_kv(const ImpConfig& config);
/// Reads the ImpConfig keys out of `kv`, starting from defaults. Keys not
/// belonging to ImpConfig are ignored here; callers decide whether they are legal.
ImpConfig imp_config_from_kv(const std::map<std::string, std::string>& kv);
/// Names of all keys understood by imp_config_from_kv.
const std::vector<std::string>& imp_config_keys();

struct ImpRun {
    std::vector<Checkpoint> checkpoints;  // t = 0..T, t = 0 is the trained dense network
    ParamSet rewind_params;
    ImpConfig config;

    int last_iteration() const { return static_cast<int>(checkpoints.size()) - 1; }
};

struct ImpProgress {
    int iteration;
    double density;
    double val_accuracy;  // NaN without a validation set
};

struct ImpOptions {
    std::optional<std::filesystem::path> out_dir;  // persist checkpoints + manifest here
    std::map<std::string, std::string> manifest_extra;
    std::string dataset_fingerprint;
    std::function<void(const ImpProgress&)> on_round;
};

/// Kept-weight count after round t: round-half-up((1 - p)^t * total). Each
/// round prunes the survivors of the previous round down to this count, so
/// rounding does not accumulate across rounds.
std::size_t imp_kept_count(std::size_t total, double p, int t);

ImpRun run_imp(const ImpConfig& config, const Dataset& train_set, const Dataset* val_set,
               const ImpOptions& options = {});

/// Writes ckpt_###.lpck per iteration, rewind.lpck and the manifest.
void save_run(const ImpRun& run, const std::filesystem::path& dir, const std::map<std::string, std::string>& extra,
              const std::string& dataset_fingerprint);

struct LoadedRun {
    ImpRun run;
    RunManifest manifest;
};

LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace lotpool
