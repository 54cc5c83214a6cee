// SPDX-License-Identifier: Apache-2.0
#include "lotpool/imp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lotpool/errors.hpp"
#include "lotpool/pruning.hpp"

namespace lotpool {

std::string to_string(RewindMode m) { return m == RewindMode::to_epoch ? "rewind_to_j" : "rewind_to_init"; }

RewindMode rewind_mode_from_string(const std::string& s) {
    if (s == "rewind_to_j") return RewindMode::to_epoch;
    if (s == "rewind_to_init") return RewindMode::to_init;
    throw DomainError("unknown rewind_mode '" + s + "' (expected rewind_to_j or rewind_to_init)");
}

void ImpConfig::validate() const {
    model.validate();
    train.validate();
    if (iterations < 1) throw DomainError("iterations must be >= 1");
    if (!(prune_fraction > 0.0 && prune_fraction < 1.0)) throw DomainError("prune_fraction must lie in (0,1)");
}

namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw DomainError("config key '" + key + "': cannot parse '" + text + "'");
    return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    if (text.empty()) return out;
    std::istringstream is(text);
    std::string part;
    while (std::getline(is, part, ',')) out.push_back(parse_value<T>(key, part));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

const std::vector<std::string>& imp_config_keys() {
    static const std::vector<std::string> keys = {
        "layer_sizes",   "init_seed",     "epochs",       "batch_size",  "base_lr",
        "lr_drop_factor", "lr_drop_epochs", "warmup_epochs", "momentum",    "weight_decay",
        "rewind_epoch",  "shuffle_seed",  "iterations",   "prune_fraction", "rewind_mode"};
    return keys;
}

std::map<std::string, std::string> to_kv(const ImpConfig& c) {
    return {
        {"layer_sizes", join(c.model.layer_sizes)},
        {"init_seed", std::to_string(c.model.init_seed)},
        {"epochs", std::to_string(c.train.epochs)},
        {"batch_size", std::to_string(c.train.batch_size)},
        {"base_lr", format_double(c.train.base_lr)},
        {"lr_drop_factor", format_double(c.train.lr_drop_factor)},
        {"lr_drop_epochs", join(c.train.lr_drop_epochs)},
        {"warmup_epochs", std::to_string(c.train.warmup_epochs)},
        {"momentum", format_double(c.train.momentum)},
        {"weight_decay", format_double(c.train.weight_decay)},
        {"rewind_epoch", std::to_string(c.train.rewind_epoch)},
        {"shuffle_seed", std::to_string(c.train.shuffle_seed)},
        {"iterations", std::to_string(c.iterations)},
        {"prune_fraction", format_double(c.prune_fraction)},
        {"rewind_mode", to_string(c.rewind_mode)},
    };
}

ImpConfig imp_config_from_kv(const std::map<std::string, std::string>& kv) {
    ImpConfig c;
    auto get = [&kv](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto v = get("layer_sizes")) c.model.layer_sizes = parse_list<std::size_t>("layer_sizes", *v);
    if (auto v = get("init_seed")) c.model.init_seed = parse_value<std::uint64_t>("init_seed", *v);
    if (auto v = get("epochs")) c.train.epochs = parse_value<int>("epochs", *v);
    if (auto v = get("batch_size")) c.train.batch_size = parse_value<int>("batch_size", *v);
    if (auto v = get("base_lr")) c.train.base_lr = parse_value<double>("base_lr", *v);
    if (auto v = get("lr_drop_factor")) c.train.lr_drop_factor = parse_value<double>("lr_drop_factor", *v);
    if (auto v = get("lr_drop_epochs")) c.train.lr_drop_epochs = parse_list<int>("lr_drop_epochs", *v);
    if (auto v = get("warmup_epochs")) c.train.warmup_epochs = parse_value<int>("warmup_epochs", *v);
    if (auto v = get("momentum")) c.train.momentum = parse_value<double>("momentum", *v);
    if (auto v = get("weight_decay")) c.train.weight_decay = parse_value<double>("weight_decay", *v);
    if (auto v = get("rewind_epoch")) c.train.rewind_epoch = parse_value<int>("rewind_epoch", *v);
    if (auto v = get("shuffle_seed")) c.train.shuffle_seed = parse_value<std::uint64_t>("shuffle_seed", *v);
    if (auto v = get("iterations")) c.iterations = parse_value<int>("iterations", *v);
    if (auto v = get("prune_fraction")) c.prune_fraction = parse_value<double>("prune_fraction", *v);
    if (auto v = get("rewind_mode")) c.rewind_mode = rewind_mode_from_string(*v);
    c.validate();
    return c;
}

ImpRun run_imp(const ImpConfig& config, const Dataset& train_set, const Dataset* val_set, const ImpOptions& options) {
    config.validate();
    const ParamSet init = init_params(config.model);
    if (layer_sizes_of(init).front() != train_set.input_dim())
        throw AlignmentError("model input size does not match the training data");

    ImpRun run;
    run.config = config;
    const bool to_init = config.rewind_mode == RewindMode::to_init;

    auto meta_for = [&config, to_init](int t, const Mask& mask) {
        CheckpointMeta m;
        m.imp_iteration = t;
        m.density = mask.density();
        m.rewind_epoch = to_init ? 0 : config.train.rewind_epoch;
        m.prune_fraction = config.prune_fraction;
        m.layer_sizes = config.model.layer_sizes;
        m.init_seed = config.model.init_seed;
        m.shuffle_seed = config.train.shuffle_seed;
        m.extra["method"] = "imp";
        m.extra["rewind_mode"] = to_string(config.rewind_mode);
        return m;
    };
    auto report = [&](int t, const Checkpoint& ck) {
        if (!options.on_round) return;
        const double acc = val_set ? evaluate(ck.params, &ck.mask, *val_set).accuracy
                                   : std::numeric_limits<double>::quiet_NaN();
        options.on_round({t, ck.mask.density(), acc});
    };

    TrainResult dense = train(init, nullptr, train_set, val_set, config.train);
    run.rewind_params = to_init ? init : dense.rewind_params;
    {
        Mask full = Mask::full_for(dense.final_params);
        run.checkpoints.push_back({std::move(dense.final_params), full, meta_for(0, full)});
        report(0, run.checkpoints.back());
    }

    for (int t = 1; t <= config.iterations; ++t) {
        const Checkpoint& prev = run.checkpoints.back();
        const std::size_t keep = imp_kept_count(prev.mask.total(), config.prune_fraction, t);
        if (keep == 0) throw DegenerateMaskError("IMP round " + std::to_string(t) + " would empty the mask");
        Mask mask = prune_within(prev.params, prev.mask, std::min(keep, prev.mask.kept()));
        TrainResult round = train(apply_mask(run.rewind_params, mask), &mask, train_set, val_set, config.train);
        CheckpointMeta meta = meta_for(t, mask);
        run.checkpoints.push_back({std::move(round.final_params), std::move(mask), std::move(meta)});
        report(t, run.checkpoints.back());
    }

    if (options.out_dir) save_run(run, *options.out_dir, options.manifest_extra, options.dataset_fingerprint);
    return run;
}

std::size_t imp_kept_count(std::size_t total, double p, int t) {
    const double target = std::pow(1.0 - p, t) * static_cast<double>(total);
    return static_cast<std::size_t>(std::floor(target + 0.5));
}

void save_run(const ImpRun& run, const std::filesystem::path& dir, const std::map<std::string, std::string>& extra,
              const std::string& dataset_fingerprint) {
    std::filesystem::create_directories(dir);
    RunManifest manifest;
    for (std::size_t t = 0; t < run.checkpoints.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "ckpt_%03zu.lpck", t);
        save_checkpoint(run.checkpoints[t], dir / name);
        manifest.checkpoints.emplace_back(name);
    }
    Checkpoint rewind{run.rewind_params, Mask::full_for(run.rewind_params), {}};
    rewind.meta.layer_sizes = run.config.model.layer_sizes;
    rewind.meta.init_seed = run.config.model.init_seed;
    rewind.meta.shuffle_seed = run.config.train.shuffle_seed;
    rewind.meta.rewind_epoch = run.config.rewind_mode == RewindMode::to_init ? 0 : run.config.train.rewind_epoch;
    rewind.meta.extra["method"] = "rewind_point";
    save_checkpoint(rewind, dir / "rewind.lpck");
    manifest.rewind_file = "rewind.lpck";
    manifest.config = to_kv(run.config);
    for (const auto& [k, v] : extra) manifest.config[k] = v;
    manifest.dataset_fingerprint = dataset_fingerprint;
    manifest.created = utc_timestamp();
    save_manifest(manifest, dir);
}

LoadedRun load_run(const std::filesystem::path& dir) {
    LoadedRun out;
    out.manifest = load_manifest(dir);
    out.run.config = imp_config_from_kv(out.manifest.config);
    for (const auto& f : out.manifest.checkpoints) out.run.checkpoints.push_back(load_checkpoint(dir / f));
    if (!out.manifest.rewind_file.empty()) out.run.rewind_params = load_checkpoint(dir / out.manifest.rewind_file).params;
    if (out.run.checkpoints.empty()) throw DomainError("run '" + dir.string() + "' has no checkpoints");
    return out;
}

}  // namespace lotpool
