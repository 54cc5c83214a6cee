// SPDX-License-Identifier: Apache-2.0
#include "lotpool/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "lotpool/errors.hpp"
#include "lotpool/store.hpp"

namespace lotpool {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T number(const std::string& key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw DomainError("'" + key + "': cannot parse '" + text + "'");
    return v;
}

const std::vector<std::string>& data_keys() {
    static const std::vector<std::string> keys = {"train_data", "test_data", "val_fraction", "split_seed",
                                                  "train_limit"};
    return keys;
}

// "a=1,b=2" -> {a:1, b:2}
std::map<std::string, std::string> parse_params(const std::string& text, const std::string& kind) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string part;
    while (std::getline(is, part, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw DomainError(kind + " data spec parameter without '=': '" + part + "'");
        out[trim(part.substr(0, eq))] = trim(part.substr(eq + 1));
    }
    return out;
}

template <typename T>
T param(const std::map<std::string, std::string>& p, const std::string& key, std::optional<T> fallback = {}) {
    auto it = p.find(key);
    if (it == p.end()) {
        if (fallback) return *fallback;
        throw DomainError("data spec is missing '" + key + "'");
    }
    return number<T>(key, it->second);
}

void reject_unknown(const std::map<std::string, std::string>& p, const std::set<std::string>& known,
                    const std::string& kind) {
    for (const auto& [k, v] : p)
        if (!known.count(k)) throw DomainError("unknown " + kind + " data spec parameter '" + k + "'");
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError("line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw DomainError("line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
            throw DomainError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return kv;
}

std::map<std::string, std::string> RunSpec::data_kv() const {
    std::map<std::string, std::string> kv{{"train_data", train_data},
                                          {"val_fraction", format_double(val_fraction)},
                                          {"split_seed", std::to_string(split_seed)},
                                          {"train_limit", std::to_string(train_limit)}};
    if (!test_data.empty()) kv["test_data"] = test_data;
    return kv;
}

std::string resolve_data_spec(const std::string& spec, const std::filesystem::path& base_dir) {
    if (spec.rfind("idx:", 0) != 0) return spec;
    const std::string body = spec.substr(4);
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw DomainError("idx data spec needs IMAGES,LABELS");
    auto resolve = [&base_dir](const std::string& p) {
        std::filesystem::path path(p);
        return (path.is_absolute() ? path : std::filesystem::absolute(base_dir / path)).lexically_normal().string();
    };
    return "idx:" + resolve(body.substr(0, comma)) + "," + resolve(body.substr(comma + 1));
}

RunSpec run_spec_from_kv(const std::map<std::string, std::string>& kv, const std::filesystem::path& base_dir) {
    std::set<std::string> known(imp_config_keys().begin(), imp_config_keys().end());
    known.insert(data_keys().begin(), data_keys().end());
    for (const auto& [k, v] : kv)
        if (!known.count(k)) throw DomainError("unknown config key '" + k + "'");

    RunSpec spec;
    spec.imp = imp_config_from_kv(kv);
    auto get = [&kv](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto v = get("train_data")) spec.train_data = resolve_data_spec(*v, base_dir);
    else throw DomainError("config is missing 'train_data'");
    if (auto v = get("test_data")) spec.test_data = resolve_data_spec(*v, base_dir);
    if (auto v = get("val_fraction")) spec.val_fraction = number<double>("val_fraction", *v);
    if (auto v = get("split_seed")) spec.split_seed = number<std::uint64_t>("split_seed", *v);
    if (auto v = get("train_limit")) spec.train_limit = number<std::size_t>("train_limit", *v);
    if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) throw DomainError("val_fraction must lie in (0,1)");
    return spec;
}

RunSpec load_run_spec(const std::filesystem::path& config_file) {
    std::ifstream in(config_file);
    if (!in) throw std::runtime_error("cannot open config '" + config_file.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return run_spec_from_kv(parse_kv_text(ss.str()), config_file.parent_path());
}

Dataset load_data_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw DomainError("data spec '" + spec + "' lacks a kind prefix");
    const std::string kind = spec.substr(0, colon), body = spec.substr(colon + 1);
    if (kind == "idx") {
        const auto comma = body.find(',');
        if (comma == std::string::npos) throw DomainError("idx data spec needs IMAGES,LABELS");
        return load_idx(body.substr(0, comma), body.substr(comma + 1));
    }
    if (kind == "synth") {
        const auto p = parse_params(body, kind);
        reject_unknown(p, {"classes", "dim", "n", "spread", "seed"}, kind);
        return synth_gaussians(param<int>(p, "classes"), param<std::size_t>(p, "dim"), param<std::size_t>(p, "n"),
                               param<double>(p, "spread"), param<std::uint64_t>(p, "seed"));
    }
    if (kind == "glyphs") {
        const auto p = parse_params(body, kind);
        reject_unknown(p, {"n", "seed", "jitter", "noise", "shift", "distractors"}, kind);
        GlyphOptions o;
        o.jitter_px = param<double>(p, "jitter", o.jitter_px);
        o.pixel_noise = param<double>(p, "noise", o.pixel_noise);
        o.max_shift_px = param<int>(p, "shift", o.max_shift_px);
        o.distractors = param<int>(p, "distractors", o.distractors);
        return synth_glyphs(param<std::size_t>(p, "n"), param<std::uint64_t>(p, "seed"), o);
    }
    if (kind == "run") {
        const auto sep = body.rfind(':');
        if (sep == std::string::npos) throw DomainError("run data spec needs DIR:train|val|test");
        const std::string part = body.substr(sep + 1);
        RunData d = data_for_run(body.substr(0, sep));
        if (part == "train") return d.train;
        if (part == "val") return d.val;
        if (part == "test") {
            if (!d.test) throw DomainError("run has no test_data");
            return *d.test;
        }
        throw DomainError("unknown run split '" + part + "'");
    }
    throw DomainError("unknown data spec kind '" + kind + "'");
}

RunData prepare_data(const RunSpec& spec) {
    RunData d;
    d.full = load_data_spec(spec.train_data);
    if (spec.train_limit > 0) d.full = take(d.full, std::min(spec.train_limit, d.full.size()));
    std::tie(d.train, d.val) = split(d.full, spec.val_fraction, spec.split_seed);
    if (!spec.test_data.empty()) d.test = load_data_spec(spec.test_data);
    return d;
}

RunData data_for_run(const std::filesystem::path& run_dir) {
    const RunManifest m = load_manifest(run_dir);
    const RunSpec spec = run_spec_from_kv(m.config, run_dir);
    RunData d = prepare_data(spec);
    if (!m.dataset_fingerprint.empty() && fingerprint(d.full) != m.dataset_fingerprint)
        throw DomainError("training data no longer matches the fingerprint recorded for run '" + run_dir.string() +
                          "'");
    return d;
}

}  // namespace lotpool
